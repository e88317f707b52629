"""Top-level decision procedure.

Repeats: fully saturate the working set; if every sequent is axiomatic
the formula is a theorem; otherwise lift the lowest non-axiomatic
sequent.  A lifting fixpoint means that sequent yields a countermodel.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from .errors import GuardViolation, InternalError
from .formula import Formula, subformulas
from .lift import apply_lift, lifting_saturation
from .loops import full_saturate
from .sequent import Sequent, initial_sequent
from .trace import (
    EvDiaChild,
    EvDiaMerge,
    EvLift,
    EvLoopMerge,
    EvSemiAdd,
    EvSemiBranch,
    SearchTrace,
)

THEOREM = "theorem"
NON_THEOREM = "non-theorem"

# beyond this exponent the branch bound stops being meaningfully checkable
_MAX_BRANCH_EXP = 4096


@dataclass
class Bounds:
    n: int
    max_label_size: int
    max_cluster_size: int
    max_branches: int
    max_steps: int

    @staticmethod
    def for_formula(f: Formula, max_steps: Optional[int] = None) -> "Bounds":
        n = len(subformulas(f))
        return Bounds(
            n=n,
            max_label_size=n,
            max_cluster_size=2**n,
            max_branches=n * 2 ** min(2**n, _MAX_BRANCH_EXP),
            max_steps=max_steps if max_steps is not None else 200_000,
        )


@dataclass
class SearchResult:
    verdict: str
    trace: SearchTrace
    final: dict[int, Sequent]
    bounds: Bounds
    model_sid: Optional[int] = None


class _Invariants:
    """Per-rewrite checks: structure, shape, and the termination bounds.

    Formula adds leave the relations alone and always land in topmost
    layers (adds at inner labels would break mon-l), so semi events get a
    cheap local check and a periodic deep sweep; every relation-changing
    event gets the full sweep.
    """

    DEEP_EVERY = 512

    def __init__(self, bounds: Bounds, seqs: dict[int, Sequent], trace: SearchTrace,
                 full: bool):
        self.bounds = bounds
        self.seqs = seqs
        self.trace = trace
        self.full = full
        self.calls = 0

    def _label_guard(self, g: Sequent, labels) -> None:
        b = self.bounds
        for x in labels:
            size = len(g.left_at(x)) + len(g.right_at(x))
            if size > b.max_label_size:
                raise GuardViolation(
                    f"label {x} holds {size} formulas, bound {b.max_label_size}"
                )

    def _sweep(self, g: Sequent) -> None:
        b = self.bounds
        problems = g.structural_violations(cap=3)
        if problems:
            raise InternalError(f"structural saturation lost: {problems}")
        if not g.is_tree_layered():
            raise InternalError("sequent is not tree-layered")
        if not g.is_tree_clustered():
            raise InternalError("sequent is not tree-clustered")
        for c in g.clusters():
            if len(c) > b.max_cluster_size:
                raise GuardViolation(
                    f"cluster {c} has {len(c)} labels, bound {b.max_cluster_size}"
                )

    def __call__(self, g: Sequent, ev: object = None) -> None:
        b = self.bounds
        self.calls += 1
        if len(self.seqs) > b.max_branches:
            raise GuardViolation(
                f"{len(self.seqs)} branches, bound {b.max_branches}"
            )
        if len(self.trace.events) > b.max_steps:
            raise GuardViolation(
                f"{len(self.trace.events)} rewrites, bound {b.max_steps}"
            )
        if isinstance(ev, EvSemiAdd):
            touched = {lab for (_, lab, _) in ev.adds}
            self._label_guard(g, touched)
            if self.full:
                stray = touched - g.topmost_labels()
                if stray:
                    raise InternalError(
                        f"semi add landed on inner labels {sorted(stray)}"
                    )
                if self.calls % self.DEEP_EVERY == 0:
                    self._sweep(g)
        elif isinstance(ev, EvSemiBranch):
            self._label_guard(g, (ev.x,))
            if self.full and ev.x not in g.topmost_labels():
                raise InternalError(f"branch at inner label {ev.x}")
        else:
            # dia step, loop merge, or lift: relations changed
            self._label_guard(g, g.labels())
            if self.full:
                self._sweep(g)


def decide(
    f: Formula,
    *,
    check_invariants: bool = True,
    max_steps: Optional[int] = None,
) -> SearchResult:
    bounds = Bounds.for_formula(f, max_steps)
    trace = SearchTrace(formula=f)
    seqs: dict[int, Sequent] = {0: initial_sequent(f, sid=0)}
    counter = itertools.count(1)
    next_sid = lambda: next(counter)
    on_rewrite = _Invariants(bounds, seqs, trace, full=check_invariants)

    rounds = 0
    while True:
        rounds += 1
        if rounds > bounds.max_steps:
            raise GuardViolation(f"{rounds} search rounds, bound {bounds.max_steps}")
        full_saturate(seqs, next_sid, trace, on_rewrite)
        if check_invariants:
            for g in seqs.values():
                if not (g.is_axiomatic() or g.is_saturated()):
                    raise InternalError(f"sequent {g.sid} not saturated after full saturation")
        if all(g.is_axiomatic() for g in seqs.values()):
            trace.verdict = THEOREM
            trace.final_sids = sorted(seqs)
            return SearchResult(THEOREM, trace, seqs, bounds)
        gi = next(seqs[sid] for sid in sorted(seqs) if not seqs[sid].is_axiomatic())
        events = lifting_saturation(gi, trace, round_no=rounds)
        if not events:
            trace.verdict = NON_THEOREM
            trace.final_sids = sorted(seqs)
            trace.model_sid = gi.sid
            return SearchResult(NON_THEOREM, trace, seqs, bounds, model_sid=gi.sid)
        on_rewrite(gi, events[-1])
        if check_invariants and not gi.is_stable():
            raise InternalError(f"sequent {gi.sid} not stable after lifting")


def replay(trace: SearchTrace) -> dict[int, Sequent]:
    """Rebuild the final sequent set by reapplying every recorded event.

    Fresh labels are allocated in the same order as during the search, so
    any drift between an event and what reapplication produces is a bug.
    """
    seqs: dict[int, Sequent] = {0: initial_sequent(trace.formula, sid=0)}
    evs = trace.events
    i = 0
    while i < len(evs):
        e = evs[i]
        if isinstance(e, EvSemiAdd):
            g = seqs[e.sid]
            for side, lab, f in e.adds:
                g.add_formula(side, lab, f)
            i += 1
        elif isinstance(e, EvSemiBranch):
            g = seqs.pop(e.sid)
            g1, g2 = g.clone(e.sid1), g.clone(e.sid2)
            g1.add_formula(*e.add1)
            g2.add_formula(*e.add2)
            seqs[e.sid1], seqs[e.sid2] = g1, g2
            i += 1
        elif isinstance(e, EvDiaMerge):
            seqs[e.sid].substitute(keep=e.x, drop=e.y)
            i += 1
        elif isinstance(e, EvDiaChild):
            g = seqs[e.sid]
            z = g.fresh_label(layer=g.info[e.y].layer)
            if z != e.z:
                raise InternalError(f"replay drift: fresh label {z}, trace says {e.z}")
            g.add_le(z, z)
            g.add_r(z, z)
            g.add_r(e.y, z)
            g.add_left(z, e.f.sub)
            g.close_r_transitive()
            i += 1
        elif isinstance(e, EvLoopMerge):
            seqs[e.sid].substitute(keep=e.s, drop=e.t)
            i += 1
        elif isinstance(e, EvLift):
            g = seqs[e.sid]
            base = g.clone()
            while (
                i < len(evs)
                and isinstance(evs[i], EvLift)
                and evs[i].sid == e.sid
                and evs[i].round_no == e.round_no
            ):
                rec = evs[i]
                got = apply_lift(g, base, rec.x, rec.f)
                got.round_no = rec.round_no
                if got != rec:
                    raise InternalError(f"replay drift in lift: {got} vs {rec}")
                i += 1
        else:
            raise InternalError(f"unknown event {e!r}")
    return seqs


def guard_bounds(f: Formula) -> Bounds:
    return Bounds.for_formula(f)


def decide_corpus(formulas, **kw) -> list:
    """Decide each formula independently; errors become result entries."""
    out: list = []
    for f in formulas:
        try:
            out.append(decide(f, **kw))
        except Exception as exc:  # noqa: BLE001 - reported, not swallowed
            out.append(exc)
    return out
