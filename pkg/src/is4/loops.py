"""Triangle-loop detection across layers and loop saturation.

A triangle loop spots a cluster in a topmost layer that repeats a
cluster from a lower layer under conditions that guarantee the steps
between them could repeat forever.  Collapsing the repetition (merging
label t into s) is what turns infinite growth into clusters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .errors import InternalError
from .saturate import OnRewrite, dia_saturate, semi_saturate
from .sequent import Sequent, clusters_equivalent, equivalent
from .trace import EvLoopMerge, SearchTrace


@dataclass
class LoopWitness:
    kind: str  # "R" or "U"
    l1: tuple[int, ...]
    l2: tuple[int, ...]
    c1: tuple[int, ...]
    c2: tuple[int, ...]
    cr: Optional[tuple[int, ...]]  # R-kind only
    s: int
    t: int


def _suricata_between(g: Sequent, layers, layer_of, c1, l1, l2) -> bool:
    """Some member of c1 has a suricata label in a layer strictly above l1
    and at most l2."""
    for u in g.labels():
        p = g.info[u].suricata_of
        if p is None or p not in c1:
            continue
        lu = layer_of[u]
        if lu == l1:
            continue
        if g.layer_le(l1, lu) and g.layer_le(lu, l2):
            return True
    return False


def _no_past_in(g: Sequent, l1, v: int) -> bool:
    return not any((u, v) in g.rel_le for u in l1)


def _is_suricata(g: Sequent, u: int) -> bool:
    return g.info[u].suricata_of is not None


def _r_triangle_witness(g: Sequent, l1, l2, c1, c2, clusters2):
    rest = [x for x in l2 if x not in c2]
    for cr in clusters2:
        if not g.cluster_le(c1, cr):
            continue
        if not g.cluster_r(cr, c2):
            continue
        between_ok = all(
            _no_past_in(g, l1, v)
            for v in l2
            if v not in cr and g.cluster_r(cr, (v,)) and g.cluster_r((v,), c2)
        )
        if not between_ok:
            continue
        for s in rest:
            if not g.cluster_r(cr, (s,)):
                continue
            for t in rest:
                if (
                    t != s
                    and (s, t) in g.rel_r
                    and equivalent(g, s, g, t)
                    and g.cluster_r((t,), c2)
                    and not any(
                        _is_suricata(g, u)
                        and g.cluster_r(cr, (u,))
                        and (u, t) in g.rel_r
                        for u in l2
                    )
                    and not g.cluster_r(c2, (t,))
                ):
                    return LoopWitness("R", l1, l2, c1, c2, cr, s, t)
    return None


def _u_triangle_witness(g: Sequent, l1, l2, c1, c2):
    if not g.cluster_le(c1, c2):
        return None
    rest = [x for x in l2 if x not in c2]
    for s in rest:
        if not g.cluster_le(c1, (s,)):
            continue
        for t in rest:
            if t == s or not g.cluster_le(c1, (t,)):
                continue
            if not equivalent(g, s, g, t):
                continue
            chain = (g.cluster_r(c2, (s,)) and (s, t) in g.rel_r) or (
                (s, t) in g.rel_r and g.cluster_r((t,), c2)
            )
            if not chain:
                continue
            if any(
                _is_suricata(g, u) and (s, u) in g.rel_r and (u, t) in g.rel_r
                for u in l2
            ):
                continue
            if g.cluster_r((s,), c2) and g.cluster_r(c2, (t,)):
                continue
            return LoopWitness("U", l1, l2, c1, c2, None, s, t)
    return None


def _cluster_sig(g: Sequent, c) -> tuple:
    counts: dict = {}
    for x in c:
        k = (frozenset(g.left_at(x)), frozenset(g.right_at(x)))
        counts[k] = counts.get(k, 0) + 1
    return len(c), frozenset(counts.items())


def find_unhappy_loop(g: Sequent) -> Optional[LoopWitness]:
    """Scan (topmost layer, lower layer, cluster pair) in fixed order.

    Same scan as the defining quadruple loop over layers() and clusters()
    but with the equivalence screen precomputed: two clusters can only
    match when their member-signature counts agree.
    """
    layers, lidx, lpairs = g._layer_tables()
    clusters = g.clusters()
    by_layer: dict[int, list] = {}
    sig_of: dict[int, tuple] = {}
    for c in clusters:
        by_layer.setdefault(lidx[c[0]], []).append(c)
        sig_of[c[0]] = _cluster_sig(g, c)
    # suricata labels indexed by the parent they discharge
    suri: dict[int, list[int]] = {}
    for u in g.labels():
        p = g.info[u].suricata_of
        if p is not None:
            suri.setdefault(p, []).append(lidx[u])
    has_out = {i for (i, j) in lpairs if i != j}
    gate_cache: dict[tuple[int, int, int], bool] = {}

    def suri_gate(c1, i1: int, i2: int) -> bool:
        kk = (c1[0], i1, i2)
        hit = gate_cache.get(kk)
        if hit is None:
            hit = any(
                lu != i1 and (i1, lu) in lpairs and (lu, i2) in lpairs
                for x in c1
                for lu in suri.get(x, ())
            )
            gate_cache[kk] = hit
        return hit

    for i2, l2 in enumerate(layers):
        if i2 in has_out:
            continue
        clusters2 = by_layer.get(i2, [])
        mates: dict[tuple, list] = {}
        for c in clusters2:
            mates.setdefault(sig_of[c[0]], []).append(c)
        for i1, l1 in enumerate(layers):
            if i1 == i2 or (i1, i2) not in lpairs or (i2, i1) in lpairs:
                continue
            for c1 in by_layer.get(i1, ()):
                twins = mates.get(sig_of[c1[0]])
                if not twins or not suri_gate(c1, i1, i2):
                    continue
                for c2 in twins:
                    w = _r_triangle_witness(g, l1, l2, c1, c2, clusters2)
                    if w is not None:
                        return w
                    w = _u_triangle_witness(g, l1, l2, c1, c2)
                    if w is not None:
                        return w
    return None


def validate_loop(g: Sequent, w: LoopWitness) -> list[str]:
    """Re-check every condition of the witness from scratch."""
    bad = []
    layers = g.layers()
    layer_of = {x: l for l in layers for x in l}
    if w.l1 not in layers or w.l2 not in layers:
        return ["layers not found"]
    if not (g.layer_le(w.l1, w.l2) and w.l1 != w.l2):
        bad.append("l1 not strictly below l2")
    if w.l2 not in g.topmost_layers():
        bad.append("l2 not topmost")
    if w.c1 not in g.clusters() or w.c2 not in g.clusters():
        bad.append("clusters not found")
        return bad
    if not clusters_equivalent(g, w.c1, g, w.c2):
        bad.append("c1 !~ c2")
    if not _suricata_between(g, layers, layer_of, w.c1, w.l1, w.l2):
        bad.append("no suricata of c1 between l1 and l2")
    if w.s in w.c2 or w.t in w.c2 or w.s == w.t:
        bad.append("s/t not distinct labels outside c2")
    if not equivalent(g, w.s, g, w.t):
        bad.append("s !~ t")
    if w.kind == "R":
        cr = w.cr
        if cr is None:
            return bad + ["missing cr"]
        if not g.cluster_le(w.c1, cr):
            bad.append("c1 <= cr fails")
        if not g.cluster_r(cr, w.c2):
            bad.append("cr R c2 fails")
        for v in w.l2:
            if v in cr:
                continue
            if g.cluster_r(cr, (v,)) and g.cluster_r((v,), w.c2):
                if not _no_past_in(g, w.l1, v):
                    bad.append(f"label {v} between cr and c2 has a past in l1")
        if not (g.cluster_r(cr, (w.s,)) and (w.s, w.t) in g.rel_r
                and g.cluster_r((w.t,), w.c2)):
            bad.append("cr R s R t R c2 chain fails")
        if any(
            _is_suricata(g, u) and g.cluster_r(cr, (u,)) and (u, w.t) in g.rel_r
            for u in w.l2
        ):
            bad.append("suricata between cr and t")
        if g.cluster_r(w.c2, (w.t,)):
            bad.append("c2 R t holds")
    else:
        if not g.cluster_le(w.c1, w.c2):
            bad.append("c1 <= c2 fails")
        if not (g.cluster_le(w.c1, (w.s,)) and g.cluster_le(w.c1, (w.t,))):
            bad.append("c1 <= s/t fails")
        chain = (g.cluster_r(w.c2, (w.s,)) and (w.s, w.t) in g.rel_r) or (
            (w.s, w.t) in g.rel_r and g.cluster_r((w.t,), w.c2)
        )
        if not chain:
            bad.append("c2 R s R t or s R t R c2 fails")
        if any(
            _is_suricata(g, u) and (w.s, u) in g.rel_r and (u, w.t) in g.rel_r
            for u in w.l2
        ):
            bad.append("suricata between s and t")
        if g.cluster_r((w.s,), w.c2) and g.cluster_r(w.c2, (w.t,)):
            bad.append("s R c2 R t holds")
    return bad


def apply_loop(g: Sequent, w: LoopWitness, trace: SearchTrace) -> EvLoopMerge:
    g.substitute(keep=w.s, drop=w.t)
    ev = EvLoopMerge(sid=g.sid, kind=w.kind, s=w.s, t=w.t, c1=w.c1, c2=w.c2)
    trace.add(ev)
    return ev


def loop_saturate(
    seqs: dict[int, Sequent],
    trace: SearchTrace,
    on_rewrite: OnRewrite = None,
) -> None:
    progress = True
    while progress:
        progress = False
        for sid in sorted(seqs):
            g = seqs[sid]
            if g.is_axiomatic():
                continue
            w = find_unhappy_loop(g)
            if w is None:
                continue
            problems = validate_loop(g, w)
            if problems:
                raise InternalError(f"loop witness fails validation: {problems}")
            ev = apply_loop(g, w, trace)
            if on_rewrite:
                on_rewrite(g, ev)
            if not g.is_saturated():
                raise InternalError("sequent lost saturation after loop merge")
            progress = True
            break


def full_saturate(
    seqs: dict[int, Sequent],
    next_sid: Callable[[], int],
    trace: SearchTrace,
    on_rewrite: OnRewrite = None,
) -> None:
    """Semi-saturation, then dia saturation, then loop saturation."""
    semi_saturate(seqs, list(seqs), next_sid, trace, on_rewrite)
    dia_saturate(seqs, next_sid, trace, on_rewrite)
    loop_saturate(seqs, trace, on_rewrite)
