import pytest
from hypothesis import given, settings, strategies as st

from conftest import RF, brute_causes, causal_edges, random_graph
from kgrag.errors import ParseError, ValidationError
from kgrag.kg import Provenance, SynonymMap, Triple, assemble_graph, intersect_graphs, merge_graphs
from kgrag.probes import (ProbeItem, degree_bucket, gen_directional_pair, gen_fitb, gen_multihop_pair,
                          gen_probe1, gen_probe2, gen_single_hop, read_probe_set,
                          validate_probe_set, write_probe_set)


def T(h, r, t):
    return Triple(h, r, t, Provenance("P", 0, 0))


def graph(*rows):
    return assemble_graph([T(*r) for r in rows], RF)


def entity_of(item, letter):
    """Map an option back to its graph entity (names are their own canonical form here)."""
    return item.option_text(letter)


def check_single_hop(g, item):
    u, r, v = item.source_triples[0]
    assert (u, r, entity_of(item, item.key)) in set(g.keys)
    tails = {t for h, _, t in g.keys if h == u}
    for letter, text in item.options:
        if letter != item.key:
            assert text not in tails


def check_pairs(g, item):
    edges = causal_edges(g)
    direct, _ = brute_causes(edges, item.target)
    if item.directional:
        truth = [b == item.target and (a, b) in edges for a, b in item.atomic_refs]
    else:
        truth = [ref in direct for ref in item.atomic_refs]
    for (letter, _), (i, j) in zip(item.options, item.pairs):
        assert (truth[i - 1] and truth[j - 1]) == (letter == item.key)


def test_degree_bucket():
    assert [degree_bucket(d) for d in (0, 1, 2, 3, 7, 8)] == [0, 1, 1, 2, 3, 3]


def test_single_hop_minimal_graph_gives_one_item():
    g = graph(("u", "causes", "v"), ("a", "causes", "u"), ("b", "causes", "u"), ("c", "causes", "u"))
    items = gen_single_hop(g, 10, seed=0)
    assert len(items) == 1
    it = items[0]
    assert it.stem == "u causes:" and it.key_text == "v"
    assert sorted(t for _, t in it.options) == ["a", "b", "c", "v"]


def test_single_hop_keys_on_random_graph(graph50):
    items = gen_single_hop(graph50, 200, seed=1)
    assert len(items) > 50
    for it in items:
        check_single_hop(graph50, it)


def test_multi_hop_diamond():
    # u -> x <- v, w -> u (two-hop), x -> f supplies the second distractor
    g = graph(("u", "causes", "x"), ("v", "causes", "x"), ("w", "causes", "u"), ("x", "causes", "f"))
    items = gen_multihop_pair(g, 5, seed=0, targets=["x"])
    assert len(items) == 1
    it = items[0]
    assert sorted(it.atomic_options) == ["f", "u", "v", "w"]
    i, j = it.pairs[it.allowed_letters.index(it.key)]
    assert {it.atomic_options[i - 1], it.atomic_options[j - 1]} == {"u", "v"}
    check_pairs(g, it)


def test_multi_hop_ground_truth_random(graph50):
    items = gen_multihop_pair(graph50, 100, seed=2)
    assert len(items) >= 40
    for it in items:
        check_pairs(graph50, it)


def test_fitb_masks_tail():
    g = graph(("a", "causes", "b"), ("c", "leads to", "d"), ("e", "is associated with", "f"))
    found = None
    for seed in range(50):
        for it in gen_fitb(g, 2, seed):
            if it.source_triples == [("a", "causes", "b")] and it.masked == "tail":
                found = it
        if found:
            break
    assert found is not None
    assert found.stem == "a causes ___." and found.key_text == "b"
    assert "a" not in {t for _, t in found.options}


def test_directional_reverse_option_is_not_keyed():
    g = graph(("a", "causes", "x"), ("b", "causes", "x"), ("c", "causes", "a"))
    items = gen_directional_pair(g, 3, seed=0)
    assert len(items) == 1
    it = items[0]
    assert len(it.options) == 5 and it.directional
    assert any(ref[0] == "x" for ref in it.atomic_refs)
    check_pairs(g, it)


def test_synonym_collisions_avoided():
    # both surface forms are separate nodes; options must still differ canonically
    g = graph(("T2DM", "causes", "Obesity"), ("Type 2 Diabetes", "causes", "Obesity"),
              ("Insulin resistance", "causes", "Obesity"), ("Obesity", "causes", "Hyperglycemia"),
              ("Stress", "causes", "Obesity"), ("Aging", "causes", "Obesity"),
              ("Hyperglycemia", "causes", "AD"), ("Obesity", "causes", "AD"))
    syn = SynonymMap({"Type 2 Diabetes": "T2DM"})
    for seed in range(20):
        ps = gen_probe1(g, n=10, seed=seed, syn=syn)
        for it in ps.items:
            texts = it.atomic_options or [t for _, t in it.options]
            canon = [syn(t) for t in texts]
            assert len(set(canon)) == len(canon)
        assert validate_probe_set(ps, g, syn).ok


def _two_domains():
    g1 = random_graph(40, 160, seed=5)
    keys = g1.keys[:60]
    g2 = assemble_graph([T(*k) for k in keys] + [T(f"z{i}", "causes", f"e{i:03d}") for i in range(30)], RF)
    return g1, g2


def test_probe2_sources_inside_intersection():
    g1, g2 = _two_domains()
    inter = intersect_graphs(g1, g2)
    ctx = merge_graphs([g1, g2])
    ps = gen_probe2(inter, n=60, seed=0, context=ctx)
    inter_keys = {i.triple_a.key for i in inter} | {i.triple_b.key for i in inter}
    assert ps.items and all(set(it.source_triples) <= inter_keys for it in ps.items)
    assert validate_probe_set(ps, inter, context=ctx).ok
    assert [it.item_id for it in ps.items][:2] == ["p2-0000", "p2-0001"]


def test_probe2_single_shared_triple():
    g1 = graph(("a", "causes", "b"), ("c", "causes", "a"), ("d", "causes", "a"), ("e", "causes", "a"))
    g2 = graph(("a", "causes", "b"), ("q", "causes", "r"))
    inter = intersect_graphs(g1, g2, threshold=1.0)
    ps = gen_probe2(inter, n=10, seed=0, context=merge_graphs([g1, g2]))
    assert sum(it.kind == "single_hop" for it in ps.items) <= 1


def test_probe2_empty_intersection_rejected():
    with pytest.raises(ValidationError):
        gen_probe2([], n=10)


def test_probe1_composition(graph50):
    ps = gen_probe1(graph50, n=100, seed=0)
    kinds = [it.kind for it in ps.items]
    assert len(kinds) == 100
    assert (kinds.count("single_hop"), kinds.count("multi_hop_pair"), kinds.count("fitb")) == (40, 40, 20)
    assert validate_probe_set(ps, graph50).ok


def test_validator_catches_corruption(graph50):
    ps = gen_probe1(graph50, n=20, seed=0)
    it = ps.items[0]
    wrong = next(l for l in it.allowed_letters if l != it.key)
    ps.items[0] = ProbeItem(**{**it.__dict__, "key": wrong})
    rep = validate_probe_set(ps, graph50)
    assert rep.codes() == ["key mismatch"]


def test_validator_catches_synonym_duplicate(graph50):
    ps = gen_probe1(graph50, n=5, seed=0)
    it = next(i for i in ps.items if i.kind == "single_hop")
    a, b = it.options[0][1], it.options[1][1]
    rep = validate_probe_set(ps, graph50, syn=SynonymMap({a: b}))
    assert "canonical-space collision" in rep.codes()


def test_probe_file_roundtrip_and_determinism(tmp_path, graph50):
    for name in ("a.jsonl", "b.jsonl"):
        write_probe_set(gen_probe1(graph50, n=30, seed=4), tmp_path / name)
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    back = read_probe_set(tmp_path / "a.jsonl")
    assert back.items == gen_probe1(graph50, n=30, seed=4).items
    assert back.graph_fingerprint == graph50.fingerprint()
    (tmp_path / "bad.jsonl").write_text('{"item_id": "x"}\n')
    with pytest.raises(ParseError):
        read_probe_set(tmp_path / "bad.jsonl")


@settings(max_examples=25, deadline=None)
@given(st.integers(6, 40), st.integers(10, 200), st.integers(0, 10_000))
def test_generated_items_are_true_to_the_graph(n, m, seed):
    g = random_graph(n, m, seed)
    ps = gen_probe1(g, n=30, seed=seed)
    for it in ps.items:
        assert it.key in it.allowed_letters
        if it.kind == "single_hop":
            check_single_hop(g, it)
        elif it.kind == "multi_hop_pair":
            check_pairs(g, it)
    assert validate_probe_set(ps, g).ok
    assert gen_probe1(g, n=30, seed=seed).items == ps.items
