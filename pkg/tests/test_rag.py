import json

import pytest
from hypothesis import given, settings, strategies as st

from conftest import RF, random_graph
from kgrag.errors import ConfigError, TransportError
from kgrag.kg import Provenance, Triple, assemble_graph
from kgrag.llm import FunctionClient, ProviderProfile, RandomClient
from kgrag.probes import gen_probe1
from kgrag.rag import (INVALID, SYSTEMS, RetrievalConfig, Retriever, RunRecord, evaluate_item,
                       load_graphs, make_client_factory, oracle_for, parse_answer, read_journal,
                       render_prompt, retrieve_context, run_grid)

PROFILE = ProviderProfile(name="mock-a", model="m-a")


@pytest.fixture(scope="module")
def world():
    g1 = random_graph(30, 120, seed=1)
    g2 = random_graph(30, 120, seed=2)
    g3 = random_graph(30, 150, seed=3)
    probes = [gen_probe1(g3, n=12, seed=0)]
    probes[0].origin = "probe1"
    return {"g1": g1, "g2": g2, "g3": g3}, probes


def item(world):
    return world[1][0].items[0]


def test_no_rag_retrieves_nothing(world):
    assert retrieve_context(item(world), RetrievalConfig("no_rag"), world[0]) == []


def test_single_triple_graph_returned_first(world):
    g = assemble_graph([Triple("Obesity", "causes", "Hyperglycemia", Provenance("P", 0, 0))], RF)
    ctx = retrieve_context(item(world), RetrievalConfig("g1"), {"g1": g})
    assert ctx == ["Obesity causes Hyperglycemia."]


def test_top_k_caps_at_graph_size(world):
    g = random_graph(10, 12, seed=9)
    assert len(retrieve_context(item(world), RetrievalConfig("g1", top_k=20), {"g1": g})) == 12
    assert len(retrieve_context(item(world), RetrievalConfig("g1", top_k=5), {"g1": g})) == 5
    assert retrieve_context(item(world), RetrievalConfig("g1", top_k=0), {"g1": g}) == []


def test_union_system_pools_graphs(world):
    graphs = world[0]
    ctx = Retriever(graphs).retrieve(item(world), RetrievalConfig("g1+g2", top_k=1000))
    want = {f"{h} {r} {t}." for g in (graphs["g1"], graphs["g2"]) for h, r, t in g.keys}
    assert set(ctx) == want


def test_unknown_system_rejected():
    with pytest.raises(ConfigError):
        RetrievalConfig("g4")


def test_missing_graph_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_graphs({"g1": str(tmp_path / "nope.json")}, ["g1"])
    with pytest.raises(ConfigError, match="no path"):
        load_graphs({}, ["g1+g2"])
    assert load_graphs({}, ["no_rag"]) == {}


def test_prompt_shape_and_no_rag_equivalence(world):
    it = item(world)
    bare = render_prompt(it, [])
    assert "Facts:" not in bare
    assert f"Return ONLY one uppercase letter from this set: {', '.join(it.allowed_letters)}." in bare
    assert bare == render_prompt(it, [])
    with_ctx = render_prompt(it, ["A causes B."])
    assert with_ctx.replace("Facts:\n- A causes B.\n\n", "") == bare


def test_parse_answer_examples():
    allowed = list("ABCD")
    assert parse_answer("B", allowed) == "B"
    assert parse_answer("answer: c", allowed) == "C"
    assert parse_answer("The answer is (D).", allowed) == "D"
    assert parse_answer("Zebra", allowed) == INVALID
    assert parse_answer("", allowed) == INVALID
    assert parse_answer("E", allowed) == INVALID


@settings(max_examples=200)
@given(st.text())
def test_parse_answer_is_total(s):
    assert parse_answer(s, list("ABCDE")) in {*"ABCDE", INVALID}


def test_evaluate_item_outcomes(world):
    it = item(world)
    rc = RetrievalConfig("no_rag")
    ok = evaluate_item(it, rc, PROFILE, 0.0, oracle_for(world[1]))
    assert ok.correct and ok.parsed_letter == it.key and ok.latency_ms == 0
    bad = evaluate_item(it, rc, PROFILE, 0.0, FunctionClient(lambda p: "Z"))
    assert bad.parsed_letter == INVALID and not bad.correct

    def boom(p):
        raise TransportError("down")
    err = evaluate_item(it, rc, PROFILE, 0.0, FunctionClient(boom))
    assert err.parsed_letter == INVALID and err.error == "down" and not err.correct


def _grid(world, journal=None, factory=None, **kw):
    graphs, probes = world
    return run_grid(probes, SYSTEMS, [PROFILE, ProviderProfile(name="mock-b", model="m-b")], (0.0, 0.2),
                    factory or make_client_factory("mock:random:1", probes), graphs=graphs,
                    journal=journal, **kw)


def test_grid_counts_and_soundness(world):
    res = _grid(world)
    assert len(res.records) == 2 * 1 * len(SYSTEMS) * 2 * 12
    assert res.ok
    for r in res.records:
        assert r.correct == (r.parsed_letter == r.key)
        assert r.parsed_letter in {*"ABCDE", INVALID}
        assert (r.system == "no_rag") == (r.retrieved_context == [])


def test_grid_oracle_is_perfect(world):
    res = _grid(world, factory=make_client_factory("mock:oracle", world[1]))
    assert all(r.correct for r in res.records)


def test_empty_probe_set_gives_no_records(world):
    graphs, probes = world
    empty = type(probes[0])([], "probe1", "x", 0)
    assert run_grid([empty], SYSTEMS, [PROFILE], (0.0,), make_client_factory("mock:oracle", []),
                    graphs=graphs).records == []


class CountingClient(RandomClient):
    def __init__(self):
        super().__init__(1)
        self.n = 0

    def send(self, prompt, model, temperature):
        self.n += 1
        return super().send(prompt, model, temperature)


def test_resume_skips_done_records(world, tmp_path):
    full = tmp_path / "full.jsonl"
    _grid(world, journal=full)
    lines = full.read_text().splitlines(keepends=True)
    partial = tmp_path / "partial.jsonl"
    partial.write_text("".join(lines[:100]) + '{"torn": ')
    counter = CountingClient()
    res = _grid(world, journal=partial, factory=lambda prof: counter)
    assert res.skipped == 100
    assert counter.n == len(lines) - 100
    assert partial.read_bytes() == full.read_bytes()


def test_parallel_grid_matches_sequential(world, tmp_path):
    _grid(world, journal=tmp_path / "a.jsonl")
    _grid(world, journal=tmp_path / "b.jsonl", max_in_flight=4)
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_failed_cells_reported(world):
    def fail_on_b(prof):
        if prof.name == "mock-b":
            return FunctionClient(lambda p: (_ for _ in ()).throw(TransportError("x")))
        return RandomClient(0)

    res = _grid(world, factory=fail_on_b)
    assert not res.ok
    assert {c[0] for c in res.failed_cells} == {"mock-b"}
    assert len(res.records) == 2 * len(SYSTEMS) * 2 * 12


def test_journal_roundtrip(world, tmp_path):
    res = _grid(world, journal=tmp_path / "j.jsonl")
    assert read_journal(tmp_path / "j.jsonl") == res.records
    first = json.loads((tmp_path / "j.jsonl").read_text().splitlines()[0])
    assert list(first) == list(RunRecord.__dataclass_fields__)


def test_provider_specs():
    with pytest.raises(ConfigError):
        make_client_factory("mock:nope")
    with pytest.raises(ConfigError):
        make_client_factory("mock:random:x")
