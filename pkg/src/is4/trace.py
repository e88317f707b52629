"""Search trace: an ordered record of every rewrite the search applies.

Events carry enough to replay the construction of any sequent in the
final set, which is what proof unfolding consumes.  Sequent ids change
only at branch events; everything else evolves a sequent in place.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .formula import Formula, fmt


@dataclass
class EvSemiAdd:
    """Cases 1-4: deterministic additions for one principal formula."""

    sid: int
    case: int  # 1 left-and, 2 right-or, 3 left-box, 4 right-dia
    x: int
    side: str
    f: Formula
    adds: tuple[tuple[str, int, Formula], ...]


@dataclass
class EvSemiBranch:
    """Cases 5-7: the sequent splits in two."""

    sid: int
    case: int  # 5 left-or, 6 right-and, 7 left-imp
    x: int
    f: Formula
    sid1: int
    sid2: int
    add1: tuple[str, int, Formula]
    add2: tuple[str, int, Formula]


@dataclass
class EvDiaMerge:
    """Left-dia option 1: y is identified with the equivalent ancestor x."""

    sid: int
    y: int
    f: Formula
    x: int


@dataclass
class EvDiaChild:
    """Left-dia option 2: fresh R-successor z of y carrying the body."""

    sid: int
    y: int
    f: Formula
    z: int


@dataclass
class EvLoopMerge:
    """Triangle-loop collapse: t is substituted by s."""

    sid: int
    kind: str  # "R" or "U"
    s: int
    t: int
    c1: tuple[int, ...]
    c2: tuple[int, ...]


@dataclass
class EvLift:
    """One new layer made for an unhappy right imp/box at x."""

    sid: int
    x: int
    f: Formula
    layer: int
    copies: tuple[tuple[int, int], ...]  # (original, copy) outside x's cluster, plus (x, xhat)
    primed: tuple[tuple[int, int], ...]  # cluster copy below xhat, empty when singleton
    doubled: tuple[tuple[int, int], ...]  # cluster copy above xhat
    suricata: int
    z: Optional[int]  # fresh witness for the box case
    # lifts sharing (sid, round_no) were computed against one base snapshot
    round_no: int = 0


Event = Union[EvSemiAdd, EvSemiBranch, EvDiaMerge, EvDiaChild, EvLoopMerge, EvLift]


@dataclass
class SearchTrace:
    formula: Formula
    events: list[Event] = field(default_factory=list)
    verdict: Optional[str] = None  # "theorem" or "non-theorem"
    final_sids: list[int] = field(default_factory=list)
    model_sid: Optional[int] = None  # countermodel source sequent

    def add(self, ev: Event) -> None:
        self.events.append(ev)

    def parent_map(self) -> dict[int, int]:
        return {
            c: e.sid
            for e in self.events
            if isinstance(e, EvSemiBranch)
            for c in (e.sid1, e.sid2)
        }

    def lineage(self, sid: int) -> list[int]:
        """Sequent ids from the root to sid, inclusive."""
        parents = self.parent_map()
        path = [sid]
        while path[-1] in parents:
            path.append(parents[path[-1]])
        return path[::-1]

    def stream(self, sid: int) -> list[Event]:
        """All events that built the sequent currently known as sid."""
        line = set(self.lineage(sid))
        return [e for e in self.events if e.sid in line]

    def to_json(self) -> dict:
        return {
            "formula": fmt(self.formula),
            "verdict": self.verdict,
            "final_sids": self.final_sids,
            "model_sid": self.model_sid,
            "events": [_event_json(e) for e in self.events],
        }


def _event_json(e: Event) -> dict:
    if isinstance(e, EvSemiAdd):
        return {
            "ev": "semi_add",
            "sid": e.sid,
            "case": e.case,
            "x": e.x,
            "side": e.side,
            "f": fmt(e.f),
            "adds": [[s, x, fmt(f)] for s, x, f in e.adds],
        }
    if isinstance(e, EvSemiBranch):
        return {
            "ev": "semi_branch",
            "sid": e.sid,
            "case": e.case,
            "x": e.x,
            "f": fmt(e.f),
            "sid1": e.sid1,
            "sid2": e.sid2,
            "add1": [e.add1[0], e.add1[1], fmt(e.add1[2])],
            "add2": [e.add2[0], e.add2[1], fmt(e.add2[2])],
        }
    if isinstance(e, EvDiaMerge):
        return {"ev": "dia_merge", "sid": e.sid, "y": e.y, "f": fmt(e.f), "x": e.x}
    if isinstance(e, EvDiaChild):
        return {"ev": "dia_child", "sid": e.sid, "y": e.y, "f": fmt(e.f), "z": e.z}
    if isinstance(e, EvLoopMerge):
        return {
            "ev": "loop_merge",
            "sid": e.sid,
            "kind": e.kind,
            "s": e.s,
            "t": e.t,
            "c1": list(e.c1),
            "c2": list(e.c2),
        }
    if isinstance(e, EvLift):
        return {
            "ev": "lift",
            "sid": e.sid,
            "x": e.x,
            "f": fmt(e.f),
            "layer": e.layer,
            "copies": [list(p) for p in e.copies],
            "primed": [list(p) for p in e.primed],
            "doubled": [list(p) for p in e.doubled],
            "suricata": e.suricata,
            "z": e.z,
            "round_no": e.round_no,
        }
    raise TypeError(f"unknown event {e!r}")
