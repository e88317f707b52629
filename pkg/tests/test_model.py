"""Countermodel extraction, forcing, and the semantic verifier."""

from random import Random

import pytest

from is4.formula import Atom, Bot, parse
from is4.model import (
    Model,
    build_countermodel,
    check_model,
    extract_model,
    forces,
    layer_simulations,
    model_from_json,
    star_closure,
    verify_countermodel,
)
from is4.search import NON_THEOREM, decide
from is4.sequent import LEFT, RIGHT, Sequent

F_CM = "box((box a -> bot) & ((a -> bot) -> bot)) -> bot"


def single_world_sequent() -> Sequent:
    g = Sequent()
    lay = g.fresh_layer()
    x = g.fresh_label(lay)
    g.add_le(x, x)
    g.add_r(x, x)
    g.add_left(x, parse("a"))
    return g


@pytest.fixture(scope="module")
def fcm_pack():
    f = parse(F_CM)
    res = decide(f, check_invariants=False)
    assert res.verdict == NON_THEOREM
    g = res.final[res.model_sid]
    sims = layer_simulations(g)
    star = star_closure(g, sims)
    return f, g, sims, star, extract_model(star)


def test_single_world_forcing():
    g = single_world_sequent()
    assert g.is_happy()
    m = extract_model(g)
    assert m.worlds == (1,)
    assert m.valuation[1] == frozenset({"a"})
    assert not forces(m, 1, Bot())
    assert forces(m, 1, parse("a"))
    assert forces(m, 1, parse("box a"))
    assert forces(m, 1, parse("dia a"))
    assert not forces(m, 1, parse("b"))
    assert not forces(m, 1, parse("a -> b"))
    assert forces(m, 1, parse("b -> a"))


def test_star_closure_of_happy_sequent_is_identity():
    g = single_world_sequent()
    assert layer_simulations(g) == {}
    star = star_closure(g)
    assert star.to_json() == g.to_json()


def test_extract_model_reads_black_atoms_only():
    g = single_world_sequent()
    g.add_right(1, parse("b"))
    g.add_left(1, parse("c -> c"))
    m = extract_model(g)
    assert m.valuation[1] == frozenset({"a"})


def test_peirce_countermodel_verifies():
    f = parse("((a -> b) -> a) -> a")
    res = decide(f, check_invariants=False)
    g = res.final[res.model_sid]
    m, star = build_countermodel(g)
    assert star.is_happy()
    assert verify_countermodel(m, g, f, root=1) == []
    assert not forces(m, 1, f)


def test_excluded_middle_countermodel_verifies():
    f = parse("a | (a -> bot)")
    res = decide(f, check_invariants=False)
    g = res.final[res.model_sid]
    m, _ = build_countermodel(g)
    assert verify_countermodel(m, g, f, root=1) == []


def test_fcm_countermodel_verifies(fcm_pack):
    f, g, sims, star, m = fcm_pack
    assert sims
    assert verify_countermodel(m, g, f, root=1) == []
    assert check_model(m) == []


def test_fcm_tampered_back_edge_fails(fcm_pack):
    f, g, sims, star, m = fcm_pack
    sim = sorted(sims.values(), key=lambda s: sorted(s))[0]
    xp, x = sorted(sim)[0]
    assert (x, xp) in m.rel_le
    cut = Model(m.worlds, m.rel_r, m.rel_le - {(x, xp)}, m.valuation)
    assert verify_countermodel(cut, g, f, root=1) != []


def test_fcm_tampered_valuation_fails(fcm_pack):
    f, g, sims, star, m = fcm_pack
    w, atom = next(
        (w, a)
        for w in g.labels()
        for a in sorted(g.right_at(w), key=str)
        if isinstance(a, Atom)
    )
    bumped = dict(m.valuation)
    bumped[w] = bumped[w] | {atom.name}
    poked = Model(m.worlds, m.rel_r, m.rel_le, bumped)
    report = verify_countermodel(poked, g, f, root=1)
    assert any("forced" in msg or "monotone" in msg for msg in report)


def test_verifier_rejects_wrong_root_claim():
    g = single_world_sequent()
    m = extract_model(g)
    report = verify_countermodel(m, g, parse("a"), root=1)
    assert report and "goal" in report[0]


def _closed(rel: set, worlds) -> None:
    changed = True
    while changed:
        changed = False
        for (x, y) in list(rel):
            for z in worlds:
                if (y, z) in rel and (x, z) not in rel:
                    rel.add((x, z))
                    changed = True


def random_model(rng: Random) -> Model:
    """Random birelational model, repaired to satisfy the frame conditions."""
    n = rng.randint(1, 4)
    worlds = tuple(range(n))
    le = {(w, w) for w in worlds}
    r = {(w, w) for w in worlds}
    for _ in range(rng.randint(0, 2 * n)):
        le.add((rng.randrange(n), rng.randrange(n)))
    for _ in range(rng.randint(0, 2 * n)):
        r.add((rng.randrange(n), rng.randrange(n)))
    changed = True
    while changed:
        _closed(le, worlds)
        _closed(r, worlds)
        changed = False
        for (x, y) in sorted(r):
            for z in worlds:
                if (y, z) in le and not any(
                    (x, u) in le and (u, z) in r for u in worlds
                ):
                    le.add((x, z))
                    changed = True
        for (x, z) in sorted(le):
            for y in worlds:
                if (x, y) in r and not any(
                    (z, u) in r and (y, u) in le for u in worlds
                ):
                    r.add((z, y))
                    changed = True
    valuation = {w: set() for w in worlds}
    for atom in ("a", "b"):
        for w in worlds:
            if rng.random() < 0.4:
                valuation[w].add(atom)
    for (w, v) in le:
        valuation[v] |= valuation[w]
    return Model(
        worlds,
        frozenset(r),
        frozenset(le),
        {w: frozenset(s) for w, s in valuation.items()},
    )


def test_forcing_monotone_on_random_models():
    from is4.oracle import random_formula

    rng = Random(7)
    for _ in range(500):
        m = random_model(rng)
        assert check_model(m) == []
        f = random_formula(rng, 3, ("a", "b"))
        for (w, v) in m.rel_le:
            if forces(m, w, f):
                assert forces(m, v, f)


def test_json_roundtrip_and_dot():
    g = single_world_sequent()
    m = extract_model(g)
    again = model_from_json(m.to_json())
    assert again.worlds == m.worlds
    assert again.rel_r == m.rel_r
    assert again.rel_le == m.rel_le
    assert again.valuation == m.valuation
    f = parse("((a -> b) -> a) -> a")
    res = decide(f, check_invariants=False)
    mm, _ = build_countermodel(res.final[res.model_sid])
    dot = mm.to_dot()
    assert dot.startswith("digraph")
    assert "style=dashed" in dot
