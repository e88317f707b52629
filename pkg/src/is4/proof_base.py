"""Base-calculus derivations and their checker.

Sequents here carry formula multisets and relation sets; rules cover the
core logical/relational schemas plus the admissible structural ones
(monotonicity, 4-propagation, contraction, weakening).  A derivation
stores only the endsequent and the rule tree: every premise is
recomputed from its conclusion, so checking is bit-exact by
construction and the only failure modes are schema violations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

from .errors import InternalError
from .formula import And, Atom, Bot, Box, Dia, Formula, Imp, Or, fmt, key, parse

Item = tuple[int, Formula]
Pair = tuple[int, int]


class SchemaError(Exception):
    """Schema violation; message names the failing component."""


def _mset(items: Iterable[Item]) -> tuple[Item, ...]:
    return tuple(sorted(items, key=lambda it: (it[0], key(it[1]))))


@dataclass(frozen=True)
class ProofSequent:
    rel_le: frozenset[Pair]
    rel_r: frozenset[Pair]
    left: tuple[Item, ...]
    right: tuple[Item, ...]

    def labels(self) -> set[int]:
        out = set()
        for (x, y) in self.rel_le:
            out.add(x)
            out.add(y)
        for (x, y) in self.rel_r:
            out.add(x)
            out.add(y)
        for (x, _) in self.left:
            out.add(x)
        for (x, _) in self.right:
            out.add(x)
        return out

    def to_json(self) -> dict:
        return {
            "le": sorted(map(list, self.rel_le)),
            "R": sorted(map(list, self.rel_r)),
            "left": [[x, fmt(f)] for (x, f) in self.left],
            "right": [[x, fmt(f)] for (x, f) in self.right],
        }


def pseq(le=(), r=(), left=(), right=()) -> ProofSequent:
    return ProofSequent(frozenset(le), frozenset(r), _mset(left), _mset(right))


def pseq_from_json(data: dict) -> ProofSequent:
    return pseq(
        le=(tuple(p) for p in data["le"]),
        r=(tuple(p) for p in data["R"]),
        left=((x, parse(s)) for x, s in data["left"]),
        right=((x, parse(s)) for x, s in data["right"]),
    )


def _plus(ms: tuple[Item, ...], *items: Item) -> tuple[Item, ...]:
    return _mset(ms + items)


def _minus(ms: tuple[Item, ...], item: Item, what: str) -> tuple[Item, ...]:
    out = list(ms)
    try:
        out.remove(item)
    except ValueError:
        raise SchemaError(f"{what} {item[0]}:{fmt(item[1])} not present")
    return tuple(out)


@dataclass(frozen=True)
class Node:
    rule: str
    data: dict
    children: tuple["Node", ...] = ()


@dataclass(frozen=True)
class BaseDerivation:
    conclusion: ProofSequent
    root: Node


# -- rule schemas ------------------------------------------------------
#
# Each handler maps a conclusion to its premises, raising SchemaError when
# a side condition fails.  Leaf rules return no premises.


def _lab(d: dict, k: str) -> int:
    v = d.get(k)
    if not isinstance(v, int):
        raise SchemaError(f"missing label {k!r}")
    return v


def _form(d: dict, k: str = "f") -> Formula:
    v = d.get(k)
    if v is None:
        raise SchemaError(f"missing formula {k!r}")
    return v


def _need_le(s: ProofSequent, x: int, y: int) -> None:
    if (x, y) not in s.rel_le:
        raise SchemaError(f"relational atom {x}<={y} not present")


def _need_r(s: ProofSequent, x: int, y: int) -> None:
    if (x, y) not in s.rel_r:
        raise SchemaError(f"relational atom {x}R{y} not present")


def _need_fresh(s: ProofSequent, lab: int, k: str) -> None:
    if lab in s.labels():
        raise SchemaError(f"label {k}={lab} must be fresh")


def _principal(s: ProofSequent, side: str, x: int, f: Formula, typ) -> None:
    if not isinstance(f, typ):
        raise SchemaError(f"principal {fmt(f)} has the wrong shape")
    ms = s.left if side == "left" else s.right
    if (x, f) not in ms:
        raise SchemaError(f"principal {x}:{fmt(f)} not on the {side}")


def _h_id(s, d):
    x, y, a = _lab(d, "x"), _lab(d, "y"), _form(d, "a")
    if not isinstance(a, Atom):
        raise SchemaError(f"{fmt(a)} is not an atom")
    _need_le(s, x, y)
    _principal(s, "left", x, a, Atom)
    _principal(s, "right", y, a, Atom)
    return ()


def _h_bot_left(s, d):
    x = _lab(d, "x")
    _principal(s, "left", x, Bot(), Bot)
    return ()


def _h_and_left(s, d):
    x, f = _lab(d, "x"), _form(d)
    _principal(s, "left", x, f, And)
    left = _plus(_minus(s.left, (x, f), "principal"), (x, f.left), (x, f.right))
    return (ProofSequent(s.rel_le, s.rel_r, left, s.right),)


def _h_and_right(s, d):
    x, f = _lab(d, "x"), _form(d)
    _principal(s, "right", x, f, And)
    base = _minus(s.right, (x, f), "principal")
    return tuple(
        ProofSequent(s.rel_le, s.rel_r, s.left, _plus(base, (x, g)))
        for g in (f.left, f.right)
    )


def _h_or_left(s, d):
    x, f = _lab(d, "x"), _form(d)
    _principal(s, "left", x, f, Or)
    base = _minus(s.left, (x, f), "principal")
    return tuple(
        ProofSequent(s.rel_le, s.rel_r, _plus(base, (x, g)), s.right)
        for g in (f.left, f.right)
    )


def _h_or_right(s, d):
    x, f = _lab(d, "x"), _form(d)
    _principal(s, "right", x, f, Or)
    right = _plus(_minus(s.right, (x, f), "principal"), (x, f.left), (x, f.right))
    return (ProofSequent(s.rel_le, s.rel_r, s.left, right),)


def _h_imp_left(s, d):
    x, y, f = _lab(d, "x"), _lab(d, "y"), _form(d)
    _need_le(s, x, y)
    _principal(s, "left", x, f, Imp)
    p1 = ProofSequent(s.rel_le, s.rel_r, s.left, _plus(s.right, (y, f.left)))
    p2 = ProofSequent(
        s.rel_le,
        s.rel_r,
        _plus(_minus(s.left, (x, f), "principal"), (y, f.right)),
        s.right,
    )
    return (p1, p2)


def _h_imp_right(s, d):
    x, z, f = _lab(d, "x"), _lab(d, "z"), _form(d)
    _principal(s, "right", x, f, Imp)
    _need_fresh(s, z, "z")
    return (
        ProofSequent(
            s.rel_le | {(x, z)},
            s.rel_r,
            _plus(s.left, (z, f.left)),
            _plus(_minus(s.right, (x, f), "principal"), (z, f.right)),
        ),
    )


def _h_box_left(s, d):
    x, y, z, f = _lab(d, "x"), _lab(d, "y"), _lab(d, "z"), _form(d)
    _need_le(s, x, y)
    _need_r(s, y, z)
    _principal(s, "left", x, f, Box)
    return (ProofSequent(s.rel_le, s.rel_r, _plus(s.left, (z, f.sub)), s.right),)


def _h_box_right(s, d):
    x, u, z, f = _lab(d, "x"), _lab(d, "u"), _lab(d, "z"), _form(d)
    _principal(s, "right", x, f, Box)
    _need_fresh(s, u, "u")
    _need_fresh(s, z, "z")
    if u == z:
        raise SchemaError("u and z must be distinct fresh labels")
    return (
        ProofSequent(
            s.rel_le | {(x, u)},
            s.rel_r | {(u, z)},
            s.left,
            _plus(_minus(s.right, (x, f), "principal"), (z, f.sub)),
        ),
    )


def _h_dia_left(s, d):
    x, y, f = _lab(d, "x"), _lab(d, "y"), _form(d)
    _principal(s, "left", x, f, Dia)
    _need_fresh(s, y, "y")
    return (
        ProofSequent(
            s.rel_le,
            s.rel_r | {(x, y)},
            _plus(_minus(s.left, (x, f), "principal"), (y, f.sub)),
            s.right,
        ),
    )


def _h_dia_right(s, d):
    x, y, f = _lab(d, "x"), _lab(d, "y"), _form(d)
    _need_r(s, x, y)
    _principal(s, "right", x, f, Dia)
    return (ProofSequent(s.rel_le, s.rel_r, s.left, _plus(s.right, (y, f.sub))),)


def _h_le_rf(s, d):
    x = _lab(d, "x")
    if x not in s.labels():
        raise SchemaError(f"label {x} does not occur")
    return (ProofSequent(s.rel_le | {(x, x)}, s.rel_r, s.left, s.right),)


def _h_le_tr(s, d):
    x, y, z = _lab(d, "x"), _lab(d, "y"), _lab(d, "z")
    _need_le(s, x, y)
    _need_le(s, y, z)
    return (ProofSequent(s.rel_le | {(x, z)}, s.rel_r, s.left, s.right),)


def _h_r_rf(s, d):
    x = _lab(d, "x")
    if x not in s.labels():
        raise SchemaError(f"label {x} does not occur")
    return (ProofSequent(s.rel_le, s.rel_r | {(x, x)}, s.left, s.right),)


def _h_r_tr(s, d):
    x, y, z = _lab(d, "x"), _lab(d, "y"), _lab(d, "z")
    _need_r(s, x, y)
    _need_r(s, y, z)
    return (ProofSequent(s.rel_le, s.rel_r | {(x, z)}, s.left, s.right),)


def _h_f1(s, d):
    x, y, z, u = _lab(d, "x"), _lab(d, "y"), _lab(d, "z"), _lab(d, "u")
    _need_r(s, x, y)
    _need_le(s, y, z)
    _need_fresh(s, u, "u")
    return (ProofSequent(s.rel_le | {(x, u)}, s.rel_r | {(u, z)}, s.left, s.right),)


def _h_f2(s, d):
    x, y, z, u = _lab(d, "x"), _lab(d, "y"), _lab(d, "z"), _lab(d, "u")
    _need_r(s, x, y)
    _need_le(s, x, z)
    _need_fresh(s, u, "u")
    return (ProofSequent(s.rel_le | {(y, u)}, s.rel_r | {(z, u)}, s.left, s.right),)


def _h_mon_left(s, d):
    x, y, f = _lab(d, "x"), _lab(d, "y"), _form(d)
    _need_le(s, x, y)
    if (x, f) not in s.left:
        raise SchemaError(f"{x}:{fmt(f)} not on the left")
    return (ProofSequent(s.rel_le, s.rel_r, _plus(s.left, (y, f)), s.right),)


def _h_4_left(s, d):
    x, y, f = _lab(d, "x"), _lab(d, "y"), _form(d)
    _need_r(s, x, y)
    _principal(s, "left", x, f, Box)
    return (ProofSequent(s.rel_le, s.rel_r, _plus(s.left, (y, f)), s.right),)


def _h_4_right(s, d):
    x, y, f = _lab(d, "x"), _lab(d, "y"), _form(d)
    _need_r(s, x, y)
    _principal(s, "right", x, f, Dia)
    return (ProofSequent(s.rel_le, s.rel_r, s.left, _plus(s.right, (y, f))),)


def _h_cont_left(s, d):
    x, f = _lab(d, "x"), _form(d)
    if (x, f) not in s.left:
        raise SchemaError(f"{x}:{fmt(f)} not on the left")
    return (ProofSequent(s.rel_le, s.rel_r, _plus(s.left, (x, f)), s.right),)


def _h_cont_right(s, d):
    x, f = _lab(d, "x"), _form(d)
    if (x, f) not in s.right:
        raise SchemaError(f"{x}:{fmt(f)} not on the right")
    return (ProofSequent(s.rel_le, s.rel_r, s.left, _plus(s.right, (x, f))),)


def _h_weak(s, d):
    left, right = s.left, s.right
    for (x, f) in d.get("left", ()):
        left = _minus(left, (x, f), "dropped")
    for (x, f) in d.get("right", ()):
        right = _minus(right, (x, f), "dropped")
    le, r = set(s.rel_le), set(s.rel_r)
    for p in d.get("le", ()):
        p = tuple(p)
        if p not in le:
            raise SchemaError(f"dropped atom {p[0]}<={p[1]} not present")
        le.remove(p)
    for p in d.get("r", ()):
        p = tuple(p)
        if p not in r:
            raise SchemaError(f"dropped atom {p[0]}R{p[1]} not present")
        r.remove(p)
    return (ProofSequent(frozenset(le), frozenset(r), left, right),)


_RULES: dict[str, Callable] = {
    "id": _h_id,
    "bot-left": _h_bot_left,
    "and-left": _h_and_left,
    "and-right": _h_and_right,
    "or-left": _h_or_left,
    "or-right": _h_or_right,
    "imp-left": _h_imp_left,
    "imp-right": _h_imp_right,
    "box-left": _h_box_left,
    "box-right": _h_box_right,
    "dia-left": _h_dia_left,
    "dia-right": _h_dia_right,
    "le-rf": _h_le_rf,
    "le-tr": _h_le_tr,
    "r-rf": _h_r_rf,
    "r-tr": _h_r_tr,
    "F1": _h_f1,
    "F2": _h_f2,
    "mon-left": _h_mon_left,
    "4-left": _h_4_left,
    "4-right": _h_4_right,
    "cont-left": _h_cont_left,
    "cont-right": _h_cont_right,
    "weak": _h_weak,
}


def rule_premises(s: ProofSequent, rule: str, data: dict) -> tuple[ProofSequent, ...]:
    """Premises of one rule instance; raises InternalError on bad rule names."""
    h = _RULES.get(rule)
    if h is None:
        raise InternalError(f"unknown base rule {rule!r}")
    return h(s, data)


def check_base(d: BaseDerivation, cap: int = 10) -> list[str]:
    """Validate every node against its schema; [] means accepted."""
    problems: list[str] = []
    stack = [(d.root, d.conclusion, "root")]
    while stack and len(problems) < cap:
        node, seq, path = stack.pop()
        if node.rule not in _RULES:
            problems.append(f"{path}: unknown rule {node.rule!r}")
            continue
        try:
            prems = rule_premises(seq, node.rule, node.data)
        except SchemaError as e:
            problems.append(f"{path} [{node.rule}]: {e}")
            continue
        if len(node.children) != len(prems):
            problems.append(
                f"{path} [{node.rule}]: {len(prems)} premise(s) expected,"
                f" {len(node.children)} given"
            )
            continue
        for i in range(len(prems) - 1, -1, -1):
            stack.append((node.children[i], prems[i], f"{path}.{i}"))
    return problems


# -- serialization -----------------------------------------------------
#
# Flat node table instead of a nested tree: expansion chains run deep
# enough to break recursive encoders.

_FORM_KEYS = ("f", "a")


def _data_to_json(rule: str, data: dict) -> dict:
    out = {}
    for k, v in data.items():
        if k in _FORM_KEYS:
            out[k] = fmt(v)
        elif rule == "weak" and k in ("left", "right"):
            out[k] = [[x, fmt(f)] for (x, f) in v]
        elif rule == "weak" and k in ("le", "r"):
            out[k] = [list(p) for p in v]
        else:
            out[k] = v
    return out


def _data_from_json(rule: str, data: dict) -> dict:
    out = {}
    for k, v in data.items():
        if k in _FORM_KEYS:
            out[k] = parse(v)
        elif rule == "weak" and k in ("left", "right"):
            out[k] = [(x, parse(s)) for x, s in v]
        elif rule == "weak" and k in ("le", "r"):
            out[k] = [tuple(p) for p in v]
        else:
            out[k] = v
    return out


def _tree_to_rows(root: Node) -> tuple[list[dict], int]:
    rows: list[dict] = []
    index: dict[int, int] = {}
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, ready = stack.pop()
        if ready:
            row = {
                "rule": node.rule,
                "data": _data_to_json(node.rule, node.data),
                "children": [index[id(c)] for c in node.children],
            }
            index[id(node)] = len(rows)
            rows.append(row)
        else:
            stack.append((node, True))
            for c in node.children:
                stack.append((c, False))
    return rows, index[id(root)]


def _tree_from_rows(rows: list[dict], root: int) -> Node:
    built: list[Node] = []
    for row in rows:
        built.append(
            Node(
                rule=row["rule"],
                data=_data_from_json(row["rule"], row["data"]),
                children=tuple(built[i] for i in row["children"]),
            )
        )
    return built[root]


def derivation_to_json(d: BaseDerivation) -> dict:
    rows, root = _tree_to_rows(d.root)
    return {
        "calculus": "base",
        "conclusion": d.conclusion.to_json(),
        "nodes": rows,
        "root": root,
    }


def derivation_from_json(data: dict) -> BaseDerivation:
    if data.get("calculus") != "base":
        raise InternalError("not a base-calculus derivation")
    return BaseDerivation(
        conclusion=pseq_from_json(data["conclusion"]),
        root=_tree_from_rows(data["nodes"], data["root"]),
    )
