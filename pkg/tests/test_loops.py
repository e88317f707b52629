import itertools

from is4.formula import parse
from is4.loops import (
    LoopWitness,
    apply_loop,
    find_unhappy_loop,
    full_saturate,
    loop_saturate,
    validate_loop,
)
from is4.sequent import Sequent, initial_sequent
from is4.trace import EvLoopMerge, SearchTrace


def base_two_layers(labels_upper, suricata=2):
    """Layer {1} with black p below a layer of the given upper labels."""
    g = Sequent()
    assert g.fresh_label(layer=g.fresh_layer()) == 1
    lay = g.fresh_layer()
    for want in labels_upper:
        got = g.fresh_label(layer=lay, suricata_of=1 if want == suricata else None)
        assert got == want
    for w in [1] + list(labels_upper):
        g.add_le(w, w)
        g.add_r(w, w)
    g.add_left(1, parse("p"))
    return g


def r_triangle_sequent():
    # chain 2 R 3 R 4 R 5; 3 ~ 4 carry {p,q}; 5 repeats cluster {1}
    g = base_two_layers([2, 3, 4, 5])
    for a, b in [(2, 3), (3, 4), (4, 5)]:
        g.add_r(a, b)
    g.close_r_transitive()
    for w in (2, 5):
        g.add_left(w, parse("p"))
    for w in (3, 4):
        g.add_left(w, parse("p"))
        g.add_left(w, parse("q"))
    g.add_le(1, 2)
    g.add_le(1, 3)
    assert g.is_structurally_saturated()
    assert g.is_tree_layered() and g.is_tree_clustered()
    return g


def test_r_triangle_found_and_valid():
    g = r_triangle_sequent()
    w = find_unhappy_loop(g)
    assert w is not None
    assert (w.kind, w.c1, w.c2, w.cr, w.s, w.t) == ("R", (1,), (5,), (3,), 3, 4)
    assert validate_loop(g, w) == []


def test_r_triangle_needs_suricata_provenance():
    g = r_triangle_sequent()
    g.info[2].suricata_of = None
    assert find_unhappy_loop(g) is None


def test_r_triangle_blocked_by_past():
    g = r_triangle_sequent()
    g.add_le(1, 4)  # label between cr and c2 now has a past in the lower layer
    g.add_le(1, 5)
    w = find_unhappy_loop(g)
    # the R-triangle is gone; the new past edges open a U-triangle instead
    assert w is not None and w.kind == "U"
    assert validate_loop(g, w) == []
    bad = LoopWitness("R", w.l1, w.l2, (1,), (5,), (3,), 3, 4)
    assert any("past" in p for p in validate_loop(g, bad))


def test_r_triangle_blocked_when_c2_sees_t():
    g = r_triangle_sequent()
    g.add_r(5, 4)
    g.close_r_transitive()
    # 4,5 now share a cluster; the witness must not reappear as before
    w = find_unhappy_loop(g)
    if w is not None:
        assert validate_loop(g, w) == []
        assert (w.s, w.t) != (3, 4)


def test_validate_rejects_tampered_witness():
    g = r_triangle_sequent()
    w = find_unhappy_loop(g)
    bad = LoopWitness(w.kind, w.l1, w.l2, w.c1, w.c2, w.cr, s=w.t, t=w.s)
    assert validate_loop(g, bad) != []


def test_loop_merge_resolves_r_triangle():
    g = r_triangle_sequent()
    trace = SearchTrace(formula=parse("p"))
    loop_saturate({0: g}, trace)
    assert [type(e) for e in trace.events] == [EvLoopMerge]
    ev = trace.events[0]
    assert (ev.kind, ev.s, ev.t) == ("R", 3, 4)
    assert 4 not in g.info
    assert (3, 5) in g.rel_r
    assert find_unhappy_loop(g) is None
    assert g.is_saturated()


def u_triangle_sequent():
    # 2 repeats {1}; 3 ~ 4 hang above 1 by <=; chain 2 R 3 R 4
    g = base_two_layers([2, 3, 4])
    for a, b in [(2, 3), (3, 4)]:
        g.add_r(a, b)
    g.close_r_transitive()
    g.add_left(2, parse("p"))
    for w in (3, 4):
        g.add_left(w, parse("p"))
        g.add_left(w, parse("q"))
    g.add_le(1, 2)
    g.add_le(1, 3)
    g.add_le(1, 4)
    assert g.is_structurally_saturated()
    return g


def test_u_triangle_found_and_merged():
    g = u_triangle_sequent()
    w = find_unhappy_loop(g)
    assert w is not None
    assert (w.kind, w.c1, w.c2, w.s, w.t) == ("U", (1,), (2,), 3, 4)
    assert validate_loop(g, w) == []
    trace = SearchTrace(formula=parse("p"))
    apply_loop(g, w, trace)
    assert 4 not in g.info
    assert find_unhappy_loop(g) is None


def test_u_triangle_blocked_by_suricata_between():
    g = u_triangle_sequent()
    g.info[3].suricata_of = 1  # now a suricata sits on the s R u R t path
    # 3 R 3 R 4 makes u = 3 itself
    assert find_unhappy_loop(g) is None


def test_no_loop_on_plain_sequents():
    assert find_unhappy_loop(initial_sequent(parse("a -> a"))) is None
    g = base_two_layers([2])
    g.add_left(2, parse("p"))
    g.add_le(1, 2)
    assert find_unhappy_loop(g) is None


def test_full_saturate_composes():
    g = initial_sequent(parse("(a | b) & dia c"))
    seqs = {0: g}
    trace = SearchTrace(formula=parse("(a | b) & dia c"))
    counter = itertools.count(1)
    full_saturate(seqs, lambda: next(counter), trace)
    assert len(seqs) >= 1
    for s in seqs.values():
        assert s.is_saturated()
        assert find_unhappy_loop(s) is None
