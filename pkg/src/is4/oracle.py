"""Brute-force semantic side of the cross-check.

Enumerates every reflexive-transitive birelational model up to a world
bound, modulo isomorphism, and searches it exhaustively for a world
refuting a formula.  Deliberately shares nothing with the search
machinery beyond the Model type; the two sides meet only in
cross_check.  Refutation-only: a silent oracle never certifies a
theorem.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations, product
from random import Random

from .formula import And, Atom, Bot, Box, Dia, Formula, Imp, Or, fmt, subformulas
from .model import Model, build_countermodel, forces, verify_countermodel
from .search import NON_THEOREM, THEOREM, decide


@dataclass(frozen=True)
class ModelBound:
    max_worlds: int
    atoms: tuple[str, ...] = ()

    def __post_init__(self):
        if self.max_worlds < 1:
            raise ValueError("max_worlds must be at least 1")


def formula_atoms(f: Formula) -> tuple[str, ...]:
    return tuple(sorted({s.name for s in subformulas(f) if isinstance(s, Atom)}))


def _is_transitive(rel: frozenset, n: int) -> bool:
    return all(
        (x, z) in rel
        for (x, y) in rel
        for z in range(n)
        if (y, z) in rel
    )


_preorder_cache: dict[int, list[frozenset]] = {}


def _preorders(n: int) -> list[frozenset]:
    if n not in _preorder_cache:
        diag = frozenset((i, i) for i in range(n))
        off = [(i, j) for i in range(n) for j in range(n) if i != j]
        found = []
        for bits in range(1 << len(off)):
            rel = diag | {off[k] for k in range(len(off)) if bits >> k & 1}
            if _is_transitive(rel, n):
                found.append(frozenset(rel))
        _preorder_cache[n] = found
    return _preorder_cache[n]


def _frame_ok(r: frozenset, le: frozenset, n: int) -> bool:
    for (x, y) in r:
        for z in range(n):
            if (y, z) in le:
                if not any((x, u) in le and (u, z) in r for u in range(n)):
                    return False
    for (x, z) in le:
        for y in range(n):
            if (x, y) in r:
                if not any((z, u) in r and (y, u) in le for u in range(n)):
                    return False
    return True


def _apply(rel: frozenset, pi) -> tuple:
    return tuple(sorted((pi[x], pi[y]) for (x, y) in rel))


_frame_cache: dict[int, list[tuple]] = {}


def _frames(n: int) -> list[tuple]:
    """Canonical (R, <=, automorphisms) triples over worlds 0..n-1."""
    if n not in _frame_cache:
        found = []
        pis = list(permutations(range(n)))
        for r in _preorders(n):
            for le in _preorders(n):
                if not _frame_ok(r, le, n):
                    continue
                enc = (tuple(sorted(r)), tuple(sorted(le)))
                images = [(_apply(r, pi), _apply(le, pi)) for pi in pis]
                if min(images) < enc:
                    continue
                auts = [pi for pi, img in zip(pis, images) if img == enc]
                found.append((r, le, auts))
        _frame_cache[n] = found
    return _frame_cache[n]


def _up_sets(le: frozenset, n: int) -> list[frozenset]:
    out = []
    for bits in range(1 << n):
        s = frozenset(i for i in range(n) if bits >> i & 1)
        if all(v in s for w in s for (w2, v) in le if w2 == w):
            out.append(s)
    return out


def enumerate_models(bound: ModelBound):
    """All models up to bound.max_worlds worlds, modulo isomorphism.

    Deterministic order: world count, then frame encoding, then
    valuation encoding; valuations are deduplicated under the frame's
    automorphisms.
    """
    atoms = tuple(bound.atoms)
    for n in range(1, bound.max_worlds + 1):
        worlds = tuple(range(n))
        for (r, le, auts) in _frames(n):
            for combo in product(_up_sets(le, n), repeat=len(atoms)):
                enc = tuple(tuple(sorted(s)) for s in combo)
                if any(
                    tuple(tuple(sorted(pi[w] for w in s)) for s in combo) < enc
                    for pi in auts
                ):
                    continue
                valuation = {
                    w: frozenset(atoms[k] for k in range(len(atoms)) if w in combo[k])
                    for w in worlds
                }
                yield Model(worlds, r, le, valuation)


def bounded_countermodel(f: Formula, bound: ModelBound):
    """First enumerated (model, world) refuting f, or None within bound."""
    for m in enumerate_models(bound):
        for w in m.worlds:
            if not forces(m, w, f):
                return m, w
    return None


@dataclass
class CrossReport:
    formula: str
    verdict: str
    oracle_hit: bool
    problems: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems


def cross_check(f: Formula, max_worlds: int = 3, **decide_kw) -> CrossReport:
    """Decide f and audit the verdict against exhaustive bounded search.

    A theorem verdict with an oracle countermodel is a hard failure.
    A non-theorem verdict must ship a model that survives full
    verification; the oracle staying silent below the bound is fine.
    """
    res = decide(f, **decide_kw)
    hit = bounded_countermodel(f, ModelBound(max_worlds, formula_atoms(f)))
    problems = []
    if res.verdict == THEOREM and hit is not None:
        m, w = hit
        problems.append(
            f"decide says theorem but {len(m.worlds)} worlds refute it at {w}"
        )
    if res.verdict == NON_THEOREM:
        g = res.final[res.model_sid]
        m, _ = build_countermodel(g)
        problems.extend(verify_countermodel(m, g, f, root=1))
    return CrossReport(fmt(f), res.verdict, hit is not None, problems)


def random_formula(rng: Random, max_depth: int, atoms: tuple[str, ...]) -> Formula:
    """Seeded random formula, depth-bounded, implication-leaning."""
    leaves = [Atom(a) for a in atoms] + [Bot()]
    if max_depth <= 0 or rng.random() < 0.2:
        return rng.choice(leaves)
    shape = rng.choice(("and", "or", "imp", "imp", "box", "dia"))
    if shape == "box":
        return Box(random_formula(rng, max_depth - 1, atoms))
    if shape == "dia":
        return Dia(random_formula(rng, max_depth - 1, atoms))
    left = random_formula(rng, max_depth - 1, atoms)
    right = random_formula(rng, max_depth - 1, atoms)
    if shape == "and":
        return And(left, right)
    if shape == "or":
        return Or(left, right)
    return Imp(left, right)
