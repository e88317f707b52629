"""Countermodel construction and semantic verification.

At the lifting fixpoint every unhappy topmost layer is simulated by an
earlier layer.  Wiring each of its labels up to a simulating twin makes
the pending right implications and boxes happy, and the happy sequent
then reads off directly as a finite birelational model.  Verification
re-evaluates forcing from scratch and trusts nothing the search cached.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InternalError
from .formula import And, Atom, Bot, Box, Dia, Formula, Imp, Or, fmt, key
from .lift import simulating_layer
from .sequent import Sequent

Simulations = dict[tuple[int, ...], set[tuple[int, int]]]


def layer_simulations(g: Sequent) -> Simulations:
    """Simulation onto a happy layer for each unhappy topmost layer of g.

    A simulating layer may itself be unhappy (when it is simulated in
    turn), so chains are composed; layer creation order strictly
    decreases along a chain, which bounds it.
    """

    def happy(layer) -> bool:
        return all(g.label_happiness(x) == "happy" for x in layer)

    sims: Simulations = {}
    for layer in g.topmost_layers():
        if happy(layer):
            continue
        found = simulating_layer(g, layer)
        if found is None:
            raise InternalError(f"unhappy layer {layer} unsimulated at fixpoint")
        cur, sim = found
        while not happy(cur):
            found = simulating_layer(g, cur)
            if found is None:
                raise InternalError(f"unhappy layer {cur} unsimulated at fixpoint")
            cur, step = found
            sim = {(v, x) for (v, u) in step for (up, x) in sim if up == u}
        if {x for (_, x) in sim} != set(layer):
            raise InternalError(f"composed simulation misses part of {layer}")
        sims[tuple(layer)] = sim
    return sims


def star_closure(g: Sequent, sims: Simulations = None) -> Sequent:
    """Happy closure of a saturated sequent at the lifting fixpoint.

    Adds x <= x' for every simulation pair (x', x), closes <= under
    transitivity, and re-checks the result instead of trusting it.
    """
    if sims is None:
        sims = layer_simulations(g)
    star = g.clone()
    for sim in sims.values():
        for (xp, x) in sorted(sim):
            star.add_le(x, xp)
    star.close_le_transitive()
    problems = star.structural_violations(cap=3)
    if problems:
        raise InternalError(f"closure broke structural saturation: {problems[0]}")
    unhappy = [x for x in star.labels() if star.label_happiness(x) != "happy"]
    if unhappy:
        raise InternalError(f"closure left unhappy labels {unhappy[:5]}")
    return star


@dataclass
class Model:
    """Finite birelational model; treated as immutable once built."""

    worlds: tuple[int, ...]
    rel_r: frozenset
    rel_le: frozenset
    valuation: dict[int, frozenset[str]]

    def _adjacency(self) -> tuple:
        adj = getattr(self, "_adj", None)
        if adj is None:
            le_succ = {w: set() for w in self.worlds}
            r_succ = {w: set() for w in self.worlds}
            r_pred = {w: set() for w in self.worlds}
            for (x, y) in self.rel_le:
                le_succ.setdefault(x, set()).add(y)
            for (x, y) in self.rel_r:
                r_succ.setdefault(x, set()).add(y)
                r_pred.setdefault(y, set()).add(x)
            adj = (le_succ, r_succ, r_pred)
            self._adj = adj
        return adj

    def to_json(self) -> dict:
        return {
            "worlds": sorted(self.worlds),
            "r": sorted(list(p) for p in self.rel_r),
            "le": sorted(list(p) for p in self.rel_le),
            "valuation": {str(w): sorted(self.valuation[w]) for w in sorted(self.worlds)},
        }

    def to_dot(self) -> str:
        # reflexive edges hold by construction and are omitted from the drawing
        lines = ["digraph model {", "  rankdir=BT;"]
        for w in sorted(self.worlds):
            atoms = ",".join(sorted(self.valuation[w]))
            text = f"{w}" + (f": {atoms}" if atoms else "")
            lines.append(f'  n{w} [label="{text}" shape=circle];')
        for (x, y) in sorted(self.rel_r):
            if x != y:
                lines.append(f"  n{x} -> n{y};")
        for (x, y) in sorted(self.rel_le):
            if x != y:
                lines.append(f"  n{x} -> n{y} [style=dashed];")
        lines.append("}")
        return "\n".join(lines) + "\n"


def model_from_json(data: dict) -> Model:
    worlds = tuple(sorted(int(w) for w in data["worlds"]))
    return Model(
        worlds,
        frozenset((int(x), int(y)) for x, y in data["r"]),
        frozenset((int(x), int(y)) for x, y in data["le"]),
        {int(w): frozenset(atoms) for w, atoms in data["valuation"].items()},
    )


def extract_model(g: Sequent) -> Model:
    """Read a happy sequent as a model: labels, relations, black atoms."""
    worlds = tuple(g.labels())
    valuation = {
        w: frozenset(f.name for f in g.left_at(w) if isinstance(f, Atom))
        for w in worlds
    }
    return Model(worlds, frozenset(g.rel_r), frozenset(g.rel_le), valuation)


def forces(m: Model, w: int, a: Formula) -> bool:
    """Kripke forcing at w, by structural recursion on the formula."""
    return _forces(m, w, a, {})


def _forces(m: Model, w: int, a: Formula, memo: dict) -> bool:
    k = (w, a)
    hit = memo.get(k)
    if hit is not None:
        return hit
    if isinstance(a, Bot):
        out = False
    elif isinstance(a, Atom):
        out = a.name in m.valuation.get(w, frozenset())
    elif isinstance(a, And):
        out = _forces(m, w, a.left, memo) and _forces(m, w, a.right, memo)
    elif isinstance(a, Or):
        out = _forces(m, w, a.left, memo) or _forces(m, w, a.right, memo)
    elif isinstance(a, Imp):
        le_succ, _, _ = m._adjacency()
        out = all(
            _forces(m, v, a.right, memo)
            for v in le_succ.get(w, ())
            if _forces(m, v, a.left, memo)
        )
    elif isinstance(a, Box):
        le_succ, r_succ, _ = m._adjacency()
        out = all(
            _forces(m, u, a.sub, memo)
            for v in le_succ.get(w, ())
            for u in r_succ.get(v, ())
        )
    elif isinstance(a, Dia):
        _, r_succ, _ = m._adjacency()
        out = any(_forces(m, u, a.sub, memo) for u in r_succ.get(w, ()))
    else:
        raise InternalError(f"not a formula: {a!r}")
    memo[k] = out
    return out


def check_model(m: Model, cap: int = 20) -> list[str]:
    """Audit the birelational model conditions; empty list means all hold.

    Reflexivity and transitivity of both relations, the two frame
    conditions, and valuation monotonicity, each ranging over every
    pair or triple meeting its guard; the existential witness checks
    are set intersections, not samples.
    """
    problems: list[str] = []

    def report(msg: str) -> bool:
        problems.append(msg)
        return len(problems) >= cap

    ws = m.worlds
    le_succ, r_succ, r_pred = m._adjacency()
    for w in ws:
        if (w, w) not in m.rel_r and report(f"R not reflexive at {w}"):
            return problems
        if (w, w) not in m.rel_le and report(f"<= not reflexive at {w}"):
            return problems
    for succ, name in ((r_succ, "R"), (le_succ, "<=")):
        for (x, y) in sorted((x, y) for x in succ for y in succ[x]):
            missing = succ.get(y, set()) - succ[x]
            if missing and report(f"{name} not transitive: {x},{y},{sorted(missing)[0]}"):
                return problems
    for (x, y) in sorted(m.rel_r):
        for z in sorted(le_succ.get(y, ())):
            if not (le_succ.get(x, set()) & r_pred.get(z, set())):
                if report(f"F1 fails at {x} R {y} <= {z}"):
                    return problems
    for (x, z) in sorted(m.rel_le):
        for y in sorted(r_succ.get(x, ())):
            if not (r_succ.get(z, set()) & le_succ.get(y, set())):
                if report(f"F2 fails at {x} <= {z}, {x} R {y}"):
                    return problems
    for (w, v) in sorted(m.rel_le):
        extra = m.valuation.get(w, frozenset()) - m.valuation.get(v, frozenset())
        if extra and report(f"valuation not monotone on {w} <= {v}: {sorted(extra)}"):
            return problems
    return problems


def verify_countermodel(
    m: Model, g: Sequent, f: Formula, root: int, cap: int = 20
) -> list[str]:
    """Full audit of an extracted countermodel; empty list means it holds.

    Checks the model conditions by enumeration, then that forcing
    agrees with every labelled formula of g, and that f fails at root.
    """
    if set(m.worlds) != set(g.labels()):
        return ["model worlds differ from sequent labels"]
    problems = check_model(m, cap)
    if len(problems) >= cap:
        return problems

    def report(msg: str) -> bool:
        problems.append(msg)
        return len(problems) >= cap

    memo: dict = {}
    for w in m.worlds:
        for a in sorted(g.left_at(w), key=key):
            if not _forces(m, w, a, memo):
                if report(f"black {fmt(a)} at {w} is not forced"):
                    return problems
        for a in sorted(g.right_at(w), key=key):
            if _forces(m, w, a, memo):
                if report(f"white {fmt(a)} at {w} is forced"):
                    return problems
    if f not in g.right_at(root):
        report(f"goal {fmt(f)} is not white at root {root}")
    elif _forces(m, root, f, memo):
        report(f"goal {fmt(f)} is forced at root {root}")
    return problems


def build_countermodel(g: Sequent) -> tuple[Model, Sequent]:
    """Close, extract, and return (model, closed sequent) for a fixpoint g."""
    star = star_closure(g)
    return extract_model(star), star
