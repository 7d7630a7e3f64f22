import itertools

import numpy as np
import pytest

from kgrag.kg import Provenance, RelationFilter, Triple, assemble_graph

CAUSAL = ("causes", "leads to", "results in", "induces", "promotes")


RF = RelationFilter(frozenset(CAUSAL))


def random_triples(n_nodes, n_edges, seed, associative_share=0.1):
    """Random directed triples over entities e000..; no self loops, unique (h, t)."""
    rng = np.random.default_rng(seed)
    names = [f"e{i:03d}" for i in range(n_nodes)]
    seen = set()
    out = []
    budget = min(n_edges, n_nodes * (n_nodes - 1))
    while len(out) < budget:
        h, t = rng.integers(n_nodes, size=2)
        if h == t or (h, t) in seen:
            continue
        seen.add((h, t))
        rel = "is associated with" if rng.random() < associative_share else CAUSAL[rng.integers(len(CAUSAL))]
        out.append(Triple(names[h], rel, names[t], Provenance("P", len(out), 0)))
    return out


def random_graph(n_nodes, n_edges, seed, associative_share=0.1):
    return assemble_graph(random_triples(n_nodes, n_edges, seed, associative_share), RF)


def causal_edges(g):
    return {(h, t) for h, r, t in g.keys if r in g.causal_relations}


def brute_causes(edges, x):
    """Direct and two-hop causes of x by explicit path enumeration over an edge list."""
    nodes = {a for e in edges for a in e}
    direct = {u for (u, v) in edges if v == x and u != x}
    two = set()
    for u, b in itertools.product(nodes, nodes):
        if (u, b) in edges and (b, x) in edges and u != x:
            two.add(u)
    return direct, two


@pytest.fixture
def graph50():
    return random_graph(50, 400, seed=11)


# Correct answers out of 100 per temperature. Every item is keyed "A" and wrong
# answers are "B", so macro-F1 = k / (100 + k). Welch on g1 vs no_rag gives a raw
# p of about 0.0008; Holm over the five non-baseline systems lifts it to 0.004.
BASE_COUNTS = (50, 52, 55)
WIN_COUNTS = (84, 94, 95)


def engineered_records(model="m1", probe="probe1", winner="g1", temperatures=(0.0, 0.2, 0.5)):
    from kgrag.rag import SYSTEMS, RunRecord

    out = []
    for system in SYSTEMS:
        counts = WIN_COUNTS if system == winner else BASE_COUNTS
        for t, k in zip(temperatures, counts):
            for i in range(100):
                letter = "A" if i < k else "B"
                out.append(RunRecord(probe, f"p1-{i:04d}", model, system, t, 0, "A", [], letter, letter,
                                     letter == "A", 0))
    return out


def run_pipeline(out, seed=7, provider="mock:oracle"):
    """The bundled-corpus pipeline through the CLI entry point; returns the output directory."""
    from kgrag.cli import main
    from kgrag.synthetic import bundled_corpus

    out.mkdir(parents=True, exist_ok=True)
    o = lambda name: str(out / name)

    def run(*argv):
        code = main([str(a) for a in argv])
        assert code == 0, f"{argv[0]} exited {code}"

    for c in ("t2dm", "ad", "t2dm_ad"):
        run("rank", "--corpus", bundled_corpus(c), "--out", o(f"{c}.ranked.jsonl"))
        run("extract", "--ranked", o(f"{c}.ranked.jsonl"), "--provider", "mock:rules", "--out", o(f"{c}.triples.jsonl"))
    for g, c in (("g1", "t2dm"), ("g2", "ad"), ("g3", "t2dm_ad")):
        run("build-kg", "--triples", o(f"{c}.triples.jsonl"), "--out", o(f"{g}.json"))
    run("merge-kg", "--in", o("g1.json"), o("g2.json"), "--out", o("g12.json"))
    run("intersect", "--a", o("g1.json"), "--b", o("g2.json"), "--threshold", 0.65, "--out", o("inter.json"))
    run("gen-probes", "--kg", o("g3.json"), "--mode", "probe1", "--n", 100, "--seed", seed, "--out", o("probe1.jsonl"))
    run("gen-probes", "--intersection", o("inter.json"), "--kg", o("g12.json"), "--mode", "probe2", "--n", 110,
        "--seed", seed, "--out", o("probe2.jsonl"))
    run("validate-probes", "--probes", o("probe1.jsonl"), "--kg", o("g3.json"))
    run("validate-probes", "--probes", o("probe2.jsonl"), "--intersection", o("inter.json"), "--kg", o("g12.json"))
    run("run-eval", "--probes", o("probe1.jsonl"), o("probe2.jsonl"), "--temps", "0,0.2,0.5", "--top-k", 20,
        "--g1", o("g1.json"), "--g2", o("g2.json"), "--g3", o("g3.json"), "--provider", provider,
        "--out", o("runs.jsonl"))
    run("analyze", "--runs", o("runs.jsonl"), "--baseline", "no_rag", "--out-dir", o("reports"))
    return out


@pytest.fixture(scope="session")
def pipeline_run(tmp_path_factory):
    return run_pipeline(tmp_path_factory.mktemp("pipeline"))
