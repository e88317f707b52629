"""Layer lifting and the simulation loop check.

A lift copies a topmost layer above itself to host the witness demanded
by an unhappy right implication or box.  When the principal label sits
in a non-singleton cluster, the cluster is copied twice and the fresh
principal copy is wired strictly between the two copies.
"""

from __future__ import annotations

from typing import Optional

from .errors import InternalError
from .formula import Box, Formula, Imp, key
from .sequent import LEFT, RIGHT, Sequent
from .trace import EvLift, SearchTrace


def apply_lift(g: Sequent, base: Sequent, x: int, f: Formula) -> EvLift:
    """Add one lifted layer to g for the unhappy right formula f at x.

    All old-side reads go through `base`, the sequent as it was before
    this round of lifting started: simultaneous lifts must not see each
    other's fresh labels.
    """
    if not isinstance(f, (Imp, Box)):
        raise InternalError(f"lift principal must be an implication or box: {f}")
    layer = next(l for l in base.layers() if x in l)
    cluster = base.cluster_of(x)
    h = len(cluster)
    ys = [y for y in layer if y not in cluster] if h > 1 else [y for y in layer if y != x]

    lay = g.fresh_layer()
    is_imp = isinstance(f, Imp)
    yhat = {y: g.fresh_label(lay) for y in ys}
    primed = {c: g.fresh_label(lay) for c in cluster} if h > 1 else {}
    xhat = g.fresh_label(lay, suricata_of=x if is_imp else None)
    doubled = {c: g.fresh_label(lay) for c in cluster} if h > 1 else {}
    hat = list(yhat.values()) + list(primed.values()) + [xhat] + list(doubled.values())

    for v in hat:
        g.add_le(v, v)
        g.add_r(v, v)

    old_le = base.rel_le
    old_r = base.rel_r
    for w in base.labels():
        for y in ys:
            if (w, y) in old_le:
                g.add_le(w, yhat[y])
        if (w, x) in old_le:
            g.add_le(w, xhat)
        for c in cluster:
            if h > 1 and (w, c) in old_le:
                g.add_le(w, primed[c])
                g.add_le(w, doubled[c])

    for a in ys:
        for b in ys:
            if (a, b) in old_r:
                g.add_r(yhat[a], yhat[b])
        for c in cluster:
            if h > 1 and (a, c) in old_r:
                g.add_r(yhat[a], primed[c])
                g.add_r(yhat[a], doubled[c])
            if h > 1 and (c, a) in old_r:
                g.add_r(primed[c], yhat[a])
                g.add_r(doubled[c], yhat[a])
        if (a, x) in old_r:
            g.add_r(yhat[a], xhat)
        if (x, a) in old_r:
            g.add_r(xhat, yhat[a])
    for c in cluster:
        for c2 in cluster:
            if h > 1:
                g.add_r(primed[c], primed[c2])
                g.add_r(doubled[c], doubled[c2])
                # transitive completion of primed -> xhat -> doubled
                g.add_r(primed[c], doubled[c2])
        if h > 1:
            g.add_r(primed[c], xhat)
            g.add_r(xhat, doubled[c])

    for y in ys:
        for c in sorted(base.left_at(y), key=key):
            g.add_left(yhat[y], c)
    for c in cluster:
        for cf in sorted(base.left_at(c), key=key):
            if h > 1:
                g.add_left(primed[c], cf)
                g.add_left(doubled[c], cf)
    for cf in sorted(base.left_at(x), key=key):
        g.add_left(xhat, cf)

    z: Optional[int] = None
    if is_imp:
        g.add_left(xhat, f.left)
        g.add_right(xhat, f.right)
        suricata = xhat
    else:
        z = g.fresh_label(lay, suricata_of=x)
        g.add_r(z, z)
        g.add_le(z, z)
        g.add_right(z, f.sub)
        for v in hat:
            if (v, xhat) in g.rel_r:
                g.add_r(v, z)
        suricata = z

    return EvLift(
        sid=g.sid,
        x=x,
        f=f,
        layer=lay,
        copies=tuple((y, yhat[y]) for y in ys) + ((x, xhat),),
        primed=tuple((c, primed[c]) for c in cluster) if h > 1 else (),
        doubled=tuple((c, doubled[c]) for c in cluster) if h > 1 else (),
        suricata=suricata,
        z=z,
    )


def lift_targets(g: Sequent, layer) -> list[tuple[int, Formula]]:
    """Unhappy right implications/boxes in the layer, in scan order."""
    out = []
    for x in sorted(layer):
        for f in sorted(g.right_at(x), key=key):
            if isinstance(f, (Imp, Box)) and not g.happy(RIGHT, x, f):
                out.append((x, f))
    return out


def max_simulation(g: Sequent, lp, l) -> set[tuple[int, int]]:
    """Greatest simulation between layers lp and l; empty if none."""
    sim = {
        (xp, x)
        for xp in lp
        for x in l
        if g.left_at(xp) == g.left_at(x) and g.right_at(xp) == g.right_at(x)
    }
    changed = True
    while changed:
        changed = False
        for (xp, x) in sorted(sim):
            ok = all(
                any((xp, yp) in g.rel_r and (yp, y) in sim for yp in lp)
                for y in g.r_succs(x)
                if y in l
            ) and all(
                any((yp, xp) in g.rel_r and (yp, y) in sim for yp in lp)
                for y in g.r_preds(x)
                if y in l
            )
            if not ok:
                sim.discard((xp, x))
                changed = True
    return sim


def simulating_layer(g: Sequent, layer):
    """First earlier-created layer that simulates `layer`.

    Fresh labels grow monotonically, so the smallest label of a layer
    orders layers by creation.  Layers above `layer` are always younger
    and excluded by the order check alone.
    """
    for lp in g.layers():
        if lp[0] >= layer[0]:
            break
        sim = max_simulation(g, lp, layer)
        if sim:
            covered = {x for (_, x) in sim}
            if covered != set(layer):
                raise InternalError("simulation misses part of the simulated layer")
            return lp, sim
    return None


def lifting_saturation(
    g: Sequent, trace: Optional[SearchTrace] = None, round_no: int = 0
) -> list[EvLift]:
    """Lift every unhappy non-simulated topmost layer of g, in place.

    Returns the lift events; an empty list means g is a fixpoint and
    defines a countermodel.
    """
    base = g.clone()
    events = []
    for layer in base.topmost_layers():
        targets = lift_targets(base, layer)
        if not targets:
            continue
        if simulating_layer(base, layer) is not None:
            continue
        for x, f in targets:
            ev = apply_lift(g, base, x, f)
            ev.round_no = round_no
            events.append(ev)
            if trace is not None:
                trace.add(ev)
    return events
