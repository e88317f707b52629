"""Labelled sequents over two relations.

A sequent holds relational atoms over R (modal accessibility) and <=
(intuitionistic order) plus left ("black") and right ("white") formula
sets per label.  Left/right are sets, so contraction is built in.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

from .errors import InternalError
from .formula import And, Atom, Bot, Box, Dia, Formula, Imp, Or, fmt, key

LEFT = "left"
RIGHT = "right"

# Shapes whose unhappiness is tolerated by the weaker label grades.
_ALMOST_EXC = {(LEFT, Bot), (RIGHT, Atom), (RIGHT, Imp), (RIGHT, Box)}
_NAIVE_EXC = _ALMOST_EXC | {(LEFT, Dia)}


@dataclass
class LabelInfo:
    layer: int
    suricata_of: Optional[int] = None


class _DSU:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x, y):
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            # keep the smaller id as representative for determinism
            if ry < rx:
                rx, ry = ry, rx
            self.parent[ry] = rx

    def groups(self) -> list[tuple[int, ...]]:
        by_root: dict[int, list[int]] = {}
        for x in self.parent:
            by_root.setdefault(self.find(x), []).append(x)
        return sorted(tuple(sorted(g)) for g in by_root.values())


class Sequent:
    def __init__(self, sid: int = 0):
        self.sid = sid
        self.rel_r: set[tuple[int, int]] = set()
        self.rel_le: set[tuple[int, int]] = set()
        self.left: dict[int, set[Formula]] = {}
        self.right: dict[int, set[Formula]] = {}
        self.info: dict[int, LabelInfo] = {}
        self.next_label = 1
        self.next_layer = 0
        # caches; _version bumps on any relation or label mutation
        self._version = 0
        self._adj_version = -1
        self._adj: Optional[tuple] = None
        self._layer_version = -1
        self._layer_tab: Optional[tuple] = None
        self._cluster_version = -1
        self._cluster_tab: Optional[tuple] = None
        self._top_version = -1
        self._top_labels: frozenset[int] = frozenset()
        self._axiomatic = False
        # copy-on-write bookkeeping: formula buckets and relation sets may be
        # shared with clones until first mutation
        self._own_buckets: set[tuple[str, int]] = set()
        self._own_rels = True

    # -- construction ------------------------------------------------

    def fresh_layer(self) -> int:
        lay = self.next_layer
        self.next_layer += 1
        return lay

    def fresh_label(self, layer: int, suricata_of: Optional[int] = None) -> int:
        x = self.next_label
        self.next_label += 1
        self.info[x] = LabelInfo(layer=layer, suricata_of=suricata_of)
        self._version += 1
        return x

    def _own_relations(self) -> None:
        if not self._own_rels:
            self.rel_r = set(self.rel_r)
            self.rel_le = set(self.rel_le)
            self._own_rels = True

    def add_r(self, x: int, y: int) -> bool:
        if (x, y) in self.rel_r:
            return False
        self._own_relations()
        self.rel_r.add((x, y))
        self._version += 1
        return True

    def add_le(self, x: int, y: int) -> bool:
        if (x, y) in self.rel_le:
            return False
        self._own_relations()
        self.rel_le.add((x, y))
        self._version += 1
        return True

    def _own_bucket(self, side: str, x: int) -> set:
        store = self.left if side == LEFT else self.right
        bucket = store.get(x)
        if bucket is None:
            bucket = store[x] = set()
            self._own_buckets.add((side, x))
        elif (side, x) not in self._own_buckets:
            bucket = store[x] = set(bucket)
            self._own_buckets.add((side, x))
        return bucket

    def add_formula(self, side: str, x: int, f: Formula) -> bool:
        if f in (self.left if side == LEFT else self.right).get(x, ()):
            return False
        self._own_bucket(side, x).add(f)
        if not self._axiomatic:
            if side == LEFT:
                if isinstance(f, Bot) or (
                    isinstance(f, Atom) and f in self.right.get(x, ())
                ):
                    self._axiomatic = True
            elif isinstance(f, Atom) and f in self.left.get(x, ()):
                self._axiomatic = True
        return True

    def add_left(self, x: int, f: Formula) -> bool:
        return self.add_formula(LEFT, x, f)

    def add_right(self, x: int, f: Formula) -> bool:
        return self.add_formula(RIGHT, x, f)

    def clone(self, sid: Optional[int] = None) -> "Sequent":
        # buckets, relation sets, LabelInfo records, and structure caches are
        # shared; both sides copy on write
        g = Sequent(self.sid if sid is None else sid)
        g.rel_r = self.rel_r
        g.rel_le = self.rel_le
        g.left = dict(self.left)
        g.right = dict(self.right)
        g.info = dict(self.info)
        g.next_label = self.next_label
        g.next_layer = self.next_layer
        g._axiomatic = self._axiomatic
        g._version = self._version
        g._adj_version, g._adj = self._adj_version, self._adj
        g._layer_version, g._layer_tab = self._layer_version, self._layer_tab
        g._cluster_version, g._cluster_tab = self._cluster_version, self._cluster_tab
        g._top_version, g._top_labels = self._top_version, self._top_labels
        g._own_rels = False
        self._own_rels = False
        self._own_buckets = set()
        return g

    # -- access ------------------------------------------------------

    def labels(self) -> list[int]:
        return sorted(self.info)

    def side(self, which: str) -> dict[int, set[Formula]]:
        return self.left if which == LEFT else self.right

    def left_at(self, x: int) -> set[Formula]:
        return self.left.get(x, set())

    def right_at(self, x: int) -> set[Formula]:
        return self.right.get(x, set())

    def has(self, side: str, x: int, f: Formula) -> bool:
        return f in self.side(side).get(x, ())

    def formulas_at(self, x: int) -> list[tuple[str, Formula]]:
        out = [(LEFT, f) for f in self.left_at(x)]
        out += [(RIGHT, f) for f in self.right_at(x)]
        out.sort(key=lambda p: (p[0], key(p[1])))
        return out

    def _adjacency(self) -> tuple:
        if self._adj_version != self._version:
            rs: dict[int, set[int]] = {}
            rp: dict[int, set[int]] = {}
            ls: dict[int, set[int]] = {}
            lp: dict[int, set[int]] = {}
            for (a, b) in self.rel_r:
                rs.setdefault(a, set()).add(b)
                rp.setdefault(b, set()).add(a)
            for (a, b) in self.rel_le:
                ls.setdefault(a, set()).add(b)
                lp.setdefault(b, set()).add(a)
            self._adj = (rs, rp, ls, lp)
            self._adj_version = self._version
        return self._adj

    def r_succs(self, x: int) -> set[int]:
        return self._adjacency()[0].get(x, set())

    def r_preds(self, x: int) -> set[int]:
        return self._adjacency()[1].get(x, set())

    def le_succs(self, x: int) -> set[int]:
        return self._adjacency()[2].get(x, set())

    def le_preds(self, x: int) -> set[int]:
        return self._adjacency()[3].get(x, set())

    def has_no_past(self, x: int) -> bool:
        return all(a == x for a in self.le_preds(x))

    # -- happiness ---------------------------------------------------

    def happy(self, side: str, x: int, f: Formula) -> bool:
        if side == LEFT:
            if isinstance(f, Atom):
                return True
            if isinstance(f, Bot):
                return False
            if isinstance(f, And):
                at = self.left_at(x)
                return f.left in at and f.right in at
            if isinstance(f, Or):
                at = self.left_at(x)
                return f.left in at or f.right in at
            if isinstance(f, Imp):
                return f.left in self.right_at(x) or f.right in self.left_at(x)
            if isinstance(f, Box):
                return all(
                    f.sub in self.left_at(z) and f in self.left_at(z)
                    for z in self.r_succs(x)
                )
            if isinstance(f, Dia):
                return any(f.sub in self.left_at(y) for y in self.r_succs(x))
        else:
            if isinstance(f, Atom):
                return f not in self.left_at(x)
            if isinstance(f, Bot):
                return True
            if isinstance(f, And):
                at = self.right_at(x)
                return f.left in at or f.right in at
            if isinstance(f, Or):
                at = self.right_at(x)
                return f.left in at and f.right in at
            if isinstance(f, Imp):
                return any(
                    f.left in self.left_at(y) and f.right in self.right_at(y)
                    for y in self.le_succs(x)
                )
            if isinstance(f, Box):
                return any(
                    f.sub in self.right_at(z)
                    for y in self.le_succs(x)
                    for z in self.r_succs(y)
                )
            if isinstance(f, Dia):
                return all(
                    f.sub in self.right_at(y) and f in self.right_at(y)
                    for y in self.r_succs(x)
                )
        raise InternalError(f"unknown formula kind {f!r}")

    def unhappy_at(self, x: int) -> list[tuple[str, Formula]]:
        return [(s, f) for s, f in self.formulas_at(x) if not self.happy(s, x, f)]

    def label_happiness(self, x: int) -> str:
        """One of 'happy', 'almost', 'naive', 'unhappy'."""
        bad = self.unhappy_at(x)
        if not bad:
            return "happy"
        shapes = {(s, type(f)) for s, f in bad}
        if shapes <= _ALMOST_EXC:
            return "almost"
        if shapes <= _NAIVE_EXC:
            return "naive"
        return "unhappy"

    def label_at_least(self, x: int, grade: str) -> bool:
        order = ["unhappy", "naive", "almost", "happy"]
        return order.index(self.label_happiness(x)) >= order.index(grade)

    # -- structural saturation ----------------------------------------

    def structural_violations(self, cap: int = 20) -> list[str]:
        out: list[str] = []

        def report(msg: str) -> bool:
            out.append(msg)
            return len(out) >= cap

        rs, _, ls, _ = self._adjacency()
        empty: set[int] = set()
        for (x, y) in sorted(self.rel_le):
            if x == y:
                continue
            missing = self.left_at(x) - self.left_at(y)
            for f in sorted(missing, key=key):
                if report(f"mon-l: {x}<={y} but {fmt(f)} only left at {x}"):
                    return out
        # up_r[x]: one <= step from x, then one R step
        up_r: dict[int, set[int]] = {}
        for (x, y) in sorted(self.rel_r):
            have = up_r.get(x)
            if have is None:
                have = set()
                for u in ls.get(x, empty):
                    have |= rs.get(u, empty)
                up_r[x] = have
            need = ls.get(y, empty)
            if not need <= have:
                for z in sorted(need - have):
                    if report(f"F1: {x}R{y}, {y}<={z}, no u with {x}<=u R {z}"):
                        return out
            lsy = ls.get(y, empty)
            for z in sorted(ls.get(x, empty)):
                if not rs.get(z, empty) & lsy:
                    if report(f"F2: {x}R{y}, {x}<={z}, no u with {y}<=u, {z}Ru"):
                        return out
        for (x, y) in sorted(self.rel_le):
            gap = ls.get(y, empty) - ls.get(x, empty)
            for z in sorted(gap):
                if report(f"le-tr: {x}<={y}<={z} but not {x}<={z}"):
                    return out
        for (x, y) in sorted(self.rel_r):
            gap = rs.get(y, empty) - rs.get(x, empty)
            for z in sorted(gap):
                if report(f"R-tr: {x}R{y}R{z} but not {x}R{z}"):
                    return out
        for x in self.labels():
            if (x, x) not in self.rel_le:
                if report(f"le-rf: missing {x}<={x}"):
                    return out
            if (x, x) not in self.rel_r:
                if report(f"R-rf: missing {x}R{x}"):
                    return out
        return out

    def is_structurally_saturated(self) -> bool:
        return not self.structural_violations(cap=1)

    # -- layers and clusters -------------------------------------------

    def _layer_tables(self) -> tuple:
        """(layers, label->index, le-related index pairs), version cached."""
        if self._layer_version != self._version:
            dsu = _DSU(self.labels())
            for (x, y) in self.rel_r:
                dsu.union(x, y)
            ls = dsu.groups()
            idx = {x: i for i, l in enumerate(ls) for x in l}
            pairs = {(idx[a], idx[b]) for (a, b) in self.rel_le}
            self._layer_tab = (ls, idx, pairs)
            self._layer_version = self._version
        return self._layer_tab

    def layers(self) -> list[tuple[int, ...]]:
        return self._layer_tables()[0]

    def layer_le(self, l1, l2) -> bool:
        ls, idx, pairs = self._layer_tables()
        i, j = idx.get(l1[0]), idx.get(l2[0])
        if i is not None and j is not None and ls[i] == tuple(l1) and ls[j] == tuple(l2):
            return (i, j) in pairs
        # arbitrary label groups: fall back to the defining scan
        return any((x, y) in self.rel_le for x in l1 for y in l2)

    def topmost_layers(self) -> list[tuple[int, ...]]:
        ls, idx, pairs = self._layer_tables()
        has_out = {i for (i, j) in pairs if i != j}
        return [l for i, l in enumerate(ls) if i not in has_out]

    def inner_layers(self) -> list[tuple[int, ...]]:
        top = set(self.topmost_layers())
        return [l for l in self.layers() if l not in top]

    def topmost_labels(self) -> frozenset:
        if self._top_version != self._version:
            self._top_labels = frozenset(
                x for l in self.topmost_layers() for x in l
            )
            self._top_version = self._version
        return self._top_labels

    def _cluster_tables(self) -> tuple:
        """(clusters, label->index, R-related index pairs), version cached."""
        if self._cluster_version != self._version:
            if not self.is_structurally_saturated():
                raise InternalError(
                    "clusters undefined: sequent not structurally saturated"
                )
            dsu = _DSU(self.labels())
            for (x, y) in self.rel_r:
                if (y, x) in self.rel_r:
                    dsu.union(x, y)
            cs = dsu.groups()
            idx = {x: i for i, c in enumerate(cs) for x in c}
            pairs = {(idx[a], idx[b]) for (a, b) in self.rel_r}
            self._cluster_tab = (cs, idx, pairs)
            self._cluster_version = self._version
        return self._cluster_tab

    def clusters(self) -> list[tuple[int, ...]]:
        return self._cluster_tables()[0]

    def cluster_of(self, x: int) -> tuple[int, ...]:
        cs, idx, _ = self._cluster_tables()
        if x not in idx:
            raise InternalError(f"label {x} not in any cluster")
        return cs[idx[x]]

    def cluster_r(self, c1, c2) -> bool:
        if self._cluster_version == self._version:
            cs, idx, pairs = self._cluster_tab
            i, j = idx.get(c1[0]), idx.get(c2[0])
            if (
                i is not None
                and j is not None
                and cs[i] == tuple(c1)
                and cs[j] == tuple(c2)
            ):
                return (i, j) in pairs
        return any((x, y) in self.rel_r for x in c1 for y in c2)

    def cluster_le(self, c1, c2) -> bool:
        # universal form: every member of c2 is seen from some member of c1
        return all(any((x, y) in self.rel_le for x in c1) for y in c2)

    # -- shape predicates ----------------------------------------------

    def is_layered(self) -> bool:
        hat = [(x, y) for (x, y) in self.rel_r if x != y]
        for (x, y) in hat:
            if (x, y) in self.rel_le or (y, x) in self.rel_le:
                return False
        # no R-edge may cross strictly between the endpoints of another;
        # that needs a <=-edge running against the layer order, so rule it
        # out wholesale before the quadratic scan
        _, idx, pairs = self._layer_tables()
        down = any(i != j and (j, i) in pairs for (i, j) in pairs)
        if not down and not any(
            x != y and idx[x] == idx[y] for (x, y) in self.rel_le
        ):
            return True
        for (x2, y2) in hat:
            for x in self.le_preds(x2):
                if x == x2:
                    continue
                if any(
                    y != x and (y2, y) in self.rel_le for y in self.r_succs(x)
                ):
                    return False
        return True

    def is_tree_layered(self) -> bool:
        if not self.is_layered():
            return False
        ls, _, pairs = self._layer_tables()
        n = len(ls)
        if not any(all((i, j) in pairs for j in range(n)) for i in range(n)):
            return False
        for i in range(n):
            below = [j for j in range(n) if (j, i) in pairs]
            for a in below:
                for b in below:
                    if (a, b) not in pairs and (b, a) not in pairs:
                        return False
        return True

    def is_tree_clustered(self) -> bool:
        # per layer: clusters form a tree under the existential cluster R
        if not self.is_structurally_saturated():
            return False
        cs, _, cpairs = self._cluster_tables()
        _, lidx, _ = self._layer_tables()
        by_layer: dict[int, list[int]] = {}
        for ci, c in enumerate(cs):
            by_layer.setdefault(lidx[c[0]], []).append(ci)
        for local in by_layer.values():
            for i in local:
                for j in local:
                    if not any(
                        (k, i) in cpairs and (k, j) in cpairs for k in local
                    ):
                        return False
            for i in local:
                above = [j for j in local if (j, i) in cpairs]
                for a in above:
                    for b in above:
                        if (a, b) not in cpairs and (b, a) not in cpairs:
                            return False
        return True

    def is_axiomatic(self) -> bool:
        # maintained incrementally by add_formula and substitute
        return self._axiomatic

    def is_stable(self) -> bool:
        if not (self.is_tree_layered() and self.is_tree_clustered()):
            return False
        return all(
            self.label_happiness(x) == "happy"
            for l in self.inner_layers()
            for x in l
        )

    def _topmost_grade(self, grade: str) -> bool:
        return all(
            self.label_at_least(x, grade) for l in self.topmost_layers() for x in l
        )

    def is_semi_saturated(self) -> bool:
        return self.is_stable() and self._topmost_grade("naive")

    def is_saturated(self) -> bool:
        return self.is_stable() and self._topmost_grade("almost")

    def is_happy(self) -> bool:
        return self.is_structurally_saturated() and all(
            self.label_happiness(x) == "happy" for x in self.labels()
        )

    def classify(self) -> dict[str, bool]:
        return {
            "layered": self.is_layered(),
            "tree_layered": self.is_tree_layered(),
            "tree_clustered": self.is_tree_clustered(),
            "stable": self.is_stable(),
            "semi_saturated": self.is_semi_saturated(),
            "saturated": self.is_saturated(),
            "axiomatic": self.is_axiomatic(),
            "happy": self.is_happy(),
        }

    # -- rewriting -----------------------------------------------------

    def close_r_transitive(self) -> None:
        succ: dict[int, set[int]] = {}
        for (a, b) in self.rel_r:
            succ.setdefault(a, set()).add(b)
        closed: set[tuple[int, int]] = set()
        for a in succ:
            seen: set[int] = set()
            stack = list(succ[a])
            while stack:
                b = stack.pop()
                if b in seen:
                    continue
                seen.add(b)
                stack.extend(succ.get(b, ()))
            closed.update((a, b) for b in seen)
        if closed != self.rel_r:
            self.rel_r = closed
            self._version += 1

    def close_le_transitive(self) -> None:
        succ: dict[int, set[int]] = {}
        for (a, b) in self.rel_le:
            succ.setdefault(a, set()).add(b)
        closed: set[tuple[int, int]] = set()
        for a in succ:
            seen: set[int] = set()
            stack = list(succ[a])
            while stack:
                b = stack.pop()
                if b in seen:
                    continue
                seen.add(b)
                stack.extend(succ.get(b, ()))
            closed.update((a, b) for b in seen)
        if closed != self.rel_le:
            self.rel_le = closed
            self._version += 1

    def substitute(self, keep: int, drop: int) -> None:
        """Replace drop by keep everywhere, then close R under transitivity."""
        if keep == drop or drop not in self.info:
            raise InternalError(f"bad substitution {keep}<-{drop}")
        sub = lambda v: keep if v == drop else v
        self.rel_r = {(sub(a), sub(b)) for (a, b) in self.rel_r}
        self.rel_le = {(sub(a), sub(b)) for (a, b) in self.rel_le}
        self._own_rels = True
        for side, store in ((LEFT, self.left), (RIGHT, self.right)):
            if drop in store:
                dropped = store.pop(drop)
                self._own_buckets.discard((side, drop))
                self._own_bucket(side, keep).update(dropped)
        del self.info[drop]
        for x, i in list(self.info.items()):
            if i.suricata_of == drop:
                self.info[x] = LabelInfo(i.layer, keep)
        self._version += 1
        if not self._axiomatic:
            at_left = self.left.get(keep, set())
            if Bot() in at_left or any(
                isinstance(f, Atom) and f in at_left for f in self.right.get(keep, ())
            ):
                self._axiomatic = True
        self.close_r_transitive()

    # -- export ----------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "sid": self.sid,
            "labels": [
                {
                    "id": x,
                    "layer": self.info[x].layer,
                    "suricata_of": self.info[x].suricata_of,
                }
                for x in self.labels()
            ],
            "R": sorted(self.rel_r),
            "le": sorted(self.rel_le),
            "left": {str(x): sorted(map(fmt, self.left_at(x))) for x in self.labels()},
            "right": {str(x): sorted(map(fmt, self.right_at(x))) for x in self.labels()},
        }


def equivalent(g: Sequent, x: int, h: Sequent, y: int) -> bool:
    """Same left set and same right set."""
    return g.left_at(x) == h.left_at(y) and g.right_at(x) == h.right_at(y)


def clusters_equivalent(g: Sequent, c1, h: Sequent, c2) -> bool:
    """A bijection pairing equivalent labels exists iff the per-signature
    member counts agree."""
    if len(c1) != len(c2):
        return False

    def sig_counts(s: Sequent, c) -> dict:
        counts: dict = {}
        for x in c:
            k = (frozenset(s.left_at(x)), frozenset(s.right_at(x)))
            counts[k] = counts.get(k, 0) + 1
        return counts

    return sig_counts(g, c1) == sig_counts(h, c2)


def initial_sequent(f: Formula, sid: int = 0) -> Sequent:
    """Root sequent: a single reflexive label refuting f."""
    g = Sequent(sid)
    r = g.fresh_label(layer=g.fresh_layer())
    g.add_le(r, r)
    g.add_r(r, r)
    g.add_right(r, f)
    return g
