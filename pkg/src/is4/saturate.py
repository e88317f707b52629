"""In-layer saturation: semi-saturation and left-dia saturation.

Both operate on a working set of sequents keyed by sequent id and record
every rewrite in the trace.  Scan order is fixed (lowest sequent id,
lowest label, case number, formula print key) so runs are reproducible.
"""

from __future__ import annotations

from typing import Callable, Iterable, Optional

from .formula import And, Box, Dia, Imp, Or, key
from .sequent import LEFT, RIGHT, Sequent
from .trace import EvDiaChild, EvDiaMerge, EvSemiAdd, EvSemiBranch, SearchTrace

# callback(sequent, trace event) after each rewrite
OnRewrite = Optional[Callable[[Sequent, object], None]]

# rewrite cases in their fixed order; 1-4 add in place, 5-7 branch
_CASES = (
    (1, LEFT, And),
    (2, RIGHT, Or),
    (3, LEFT, Box),
    (4, RIGHT, Dia),
    (5, LEFT, Or),
    (6, RIGHT, And),
    (7, LEFT, Imp),
)


def _label_target(g: Sequent, x: int):
    for case, side, typ in _CASES:
        cands = [f for f in g.side(side).get(x, ()) if isinstance(f, typ)]
        for f in sorted(cands, key=key):
            if not g.happy(side, x, f):
                return case, side, f
    return None


def find_semi_target(g: Sequent):
    for x in g.labels():
        t = _label_target(g, x)
        if t is not None:
            case, side, f = t
            return case, x, side, f
    return None


def _apply_semi_add(g: Sequent, case: int, x: int, f) -> tuple:
    adds = []

    def put(side, lab, sub):
        if g.add_formula(side, lab, sub):
            adds.append((side, lab, sub))

    if case == 1:
        put(LEFT, x, f.left)
        put(LEFT, x, f.right)
    elif case == 2:
        put(RIGHT, x, f.left)
        put(RIGHT, x, f.right)
    elif case == 3:
        for z in sorted(g.r_succs(x)):
            put(LEFT, z, f.sub)
            put(LEFT, z, f)
    elif case == 4:
        for y in sorted(g.r_succs(x)):
            put(RIGHT, y, f.sub)
            put(RIGHT, y, f)
    return tuple(adds)


def _branch_adds(case: int, x: int, f) -> tuple:
    if case == 5:
        return (LEFT, x, f.left), (LEFT, x, f.right)
    if case == 6:
        return (RIGHT, x, f.left), (RIGHT, x, f.right)
    return (RIGHT, x, f.left), (LEFT, x, f.right)  # case 7


def semi_saturate(
    seqs: dict[int, Sequent],
    dirty: Iterable[int],
    next_sid: Callable[[], int],
    trace: SearchTrace,
    on_rewrite: OnRewrite = None,
) -> None:
    """Drive every dirty sequent to its semi-saturation normal form."""
    work = sorted(set(dirty))
    # labels that may still hold a target; a clean label stays clean until
    # it receives an add (the seven cases are monotone in formula presence
    # and relations do not change here)
    pending: dict[int, set[int]] = {}
    while work:
        sid = work.pop(0)
        g = seqs[sid]
        if g.is_axiomatic():
            # final for the search: never picked, never lifted, stays axiomatic
            pending.pop(sid, None)
            continue
        labs = pending.get(sid)
        if labs is None:
            labs = pending[sid] = set(g.labels())
        target = None
        for x in sorted(labs):
            t = _label_target(g, x)
            if t is None:
                labs.discard(x)
                continue
            case, side, f = t
            target = (case, x, side, f)
            break
        if target is None:
            pending.pop(sid, None)
            continue
        case, x, side, f = target
        if case <= 4:
            adds = _apply_semi_add(g, case, x, f)
            labs.update(lab for (_, lab, _) in adds)
            ev = EvSemiAdd(sid=sid, case=case, x=x, side=side, f=f, adds=adds)
            trace.add(ev)
            if on_rewrite:
                on_rewrite(g, ev)
            work.insert(0, sid)
        else:
            add1, add2 = _branch_adds(case, x, f)
            sid1, sid2 = next_sid(), next_sid()
            g1, g2 = g.clone(sid1), g.clone(sid2)
            g1.add_formula(*add1)
            g2.add_formula(*add2)
            del seqs[sid]
            seqs[sid1], seqs[sid2] = g1, g2
            pending[sid1] = set(labs) | {x}
            pending[sid2] = set(labs) | {x}
            pending.pop(sid, None)
            ev = EvSemiBranch(
                sid=sid, case=case, x=x, f=f,
                sid1=sid1, sid2=sid2, add1=add1, add2=add2,
            )
            trace.add(ev)
            if on_rewrite:
                on_rewrite(g1, ev)
                on_rewrite(g2, ev)
            work = sorted(set(work) | {sid1, sid2})


def find_dia_target(g: Sequent):
    """Unhappy left-dia whose strict R-predecessors are all almost happy."""
    for y in g.labels():
        dias = sorted(
            (f for f in g.left_at(y) if isinstance(f, Dia) and not g.happy(LEFT, y, f)),
            key=key,
        )
        if not dias:
            continue
        strict_preds = {
            u for u in g.r_preds(y) if u != y and (y, u) not in g.rel_r
        }
        if all(g.label_at_least(u, "almost") for u in strict_preds):
            return y, dias[0]
    return None


def _option1_candidate(g: Sequent, y: int, f) -> Optional[int]:
    for x in g.labels():
        if (
            x != y
            and (x, y) in g.rel_r
            and g.left_at(x) == g.left_at(y)
            and g.right_at(x) == g.right_at(y)
            and g.happy(LEFT, x, f)
            and all(g.has_no_past(u) for u in g.r_succs(x))
        ):
            return x
    return None


def dia_step(g: Sequent, trace: SearchTrace):
    """Apply one left-dia saturation step; returns the event or None."""
    target = find_dia_target(g)
    if target is None:
        return None
    y, f = target
    x = _option1_candidate(g, y, f)
    if x is not None:
        g.substitute(keep=x, drop=y)
        ev = EvDiaMerge(sid=g.sid, y=y, f=f, x=x)
    else:
        z = g.fresh_label(layer=g.info[y].layer)
        g.add_le(z, z)
        g.add_r(z, z)
        g.add_r(y, z)
        g.add_left(z, f.sub)
        g.close_r_transitive()
        ev = EvDiaChild(sid=g.sid, y=y, f=f, z=z)
    trace.add(ev)
    return ev


def dia_saturate(
    seqs: dict[int, Sequent],
    next_sid: Callable[[], int],
    trace: SearchTrace,
    on_rewrite: OnRewrite = None,
) -> None:
    """Alternate dia steps with re-semi-saturation until no step applies."""
    progress = True
    while progress:
        progress = False
        for sid in sorted(seqs):
            g = seqs[sid]
            if g.is_axiomatic():
                continue
            ev = dia_step(g, trace)
            if ev is not None:
                if on_rewrite:
                    on_rewrite(g, ev)
                semi_saturate(seqs, [sid], next_sid, trace, on_rewrite)
                progress = True
                break
