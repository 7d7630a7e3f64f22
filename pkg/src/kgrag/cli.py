"""Command-line entry point: ``kgrag <subcommand> ...``.

Exit codes: 0 success, 1 validation or usage failure, 2 partial grid failure
(provider errors in run-eval, gaps in analyze).
"""
from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from pathlib import Path

from . import __version__
from .config import PipelineConfig, load_config
from .corpus import (TermLists, RankingWeights, compute_features, ingest_documents, rank_documents,
                     read_documents, select_top_k, write_ranked)
from .errors import KgragError
from .extraction import ExtractionPipelineConfig, RuleBasedClient, extract_corpus
from .kg import (DEFAULT_VAGUE, KnowledgeGraph, RelationFilter, SynonymMap, assemble_graph, clean_triples,
                 intersect_graphs, load_intersection, load_triples, merge_graphs, save_intersection,
                 write_triples)
from .llm import HTTPChatClient, ProviderProfile, RetryingClient, ScriptedClient, load_profiles
from .probes import gen_probe1, gen_probe2, read_probe_set, validate_probe_set, write_probe_set
from .rag import SYSTEMS, load_graphs, make_client_factory, read_journal, run_grid
from .report import emit_report

log = logging.getLogger("kgrag")

EXIT_OK, EXIT_INVALID, EXIT_PARTIAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; this CLI reserves 2 for partial grids."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _systems(text: str) -> list[str]:
    out = [s.strip() for s in text.split(",") if s.strip()]
    bad = [s for s in out if s not in SYSTEMS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown system(s) {', '.join(bad)}; choose from {', '.join(SYSTEMS)}")
    return out


def _pick(value, fallback):
    return fallback if value is None else value


def _synonyms(path) -> SynonymMap:
    return SynonymMap.load(path) if path else SynonymMap.default()


def _relations(path) -> RelationFilter:
    return RelationFilter.load(path) if path else RelationFilter.default()


# -- subcommands --------------------------------------------------------------

def cmd_rank(args, cfg: PipelineConfig) -> int:
    corpus = _pick(args.corpus, cfg.paths.corpus)
    if corpus is None:
        raise KgragError("rank needs --corpus")
    terms_path = _pick(args.terms, cfg.paths.terms)
    terms = TermLists.load(terms_path) if terms_path else TermLists.default()
    weights = RankingWeights.parse(args.weights) if args.weights else cfg.weights
    docs = ingest_documents(corpus, _pick(args.min_words, cfg.min_words))
    if not docs:
        raise KgragError(f"no document in {corpus} passes the length filter")
    feats = compute_features(docs, terms, _pick(args.min_df, cfg.min_df))
    ranked = select_top_k(rank_documents(docs, feats, weights), _pick(args.top, cfg.select_top_k))
    write_ranked(ranked, args.out)
    log.info("ranked %d documents, wrote %d to %s", len(docs), len(ranked), args.out)
    return EXIT_OK


def _extraction_client(args, cfg: PipelineConfig):
    provider = _pick(args.provider, "mock:rules")
    if provider == "mock:rules":
        return RuleBasedClient()
    if provider.startswith("mock:script:"):
        return ScriptedClient.load(provider.split(":", 2)[2])
    profiles_path = _pick(args.profiles, cfg.paths.profiles)
    if profiles_path is None:
        raise KgragError("a live extraction provider needs --profiles")
    profiles = {p.name: p for p in load_profiles(profiles_path)}
    name = args.profile or next(iter(profiles), None)
    if name not in profiles:
        raise KgragError(f"profile {name!r} not found in {profiles_path}")
    p = profiles[name]
    return RetryingClient(HTTPChatClient(p, trace=args.trace), max_retries=p.max_retries)


def cmd_extract(args, cfg: PipelineConfig) -> int:
    docs = read_documents(args.ranked)
    ecfg = ExtractionPipelineConfig(provider=_pick(args.provider, "mock:rules"),
                                    temperature=args.temperature)
    if args.model:
        ecfg.model = args.model
    failures = []
    triples = extract_corpus(docs, ecfg, _extraction_client(args, cfg),
                             max_in_flight=_pick(args.max_in_flight, cfg.max_in_flight), failures=failures)
    write_triples(triples, args.out)
    log.info("extracted %d triples from %d documents (%d skipped clauses/sentences)",
             len(triples), len(docs), len(failures))
    return EXIT_OK


def cmd_build_kg(args, cfg: PipelineConfig) -> int:
    syn = _synonyms(_pick(args.synonyms, cfg.paths.synonyms))
    rf = _relations(_pick(args.relations, cfg.paths.relations))
    vague_path = _pick(args.vague, cfg.paths.vague)
    vague = DEFAULT_VAGUE
    if vague_path:
        vague = {ln.strip() for ln in Path(vague_path).read_text(encoding="utf-8").splitlines() if ln.strip()}
    raw = [t for path in args.triples for t in load_triples(path)]
    g = assemble_graph(clean_triples(raw, syn, vague), rf)
    g.save(args.out)
    log.info("graph: %d entities, %d triples, %d causal edges", len(g.entities), len(g.keys),
             int(g.adjacency.sum()))
    return EXIT_OK


def cmd_merge_kg(args, cfg: PipelineConfig) -> int:
    g = merge_graphs([KnowledgeGraph.load(p) for p in args.inputs])
    g.save(args.out)
    return EXIT_OK


def cmd_intersect(args, cfg: PipelineConfig) -> int:
    ga, gb = KnowledgeGraph.load(args.a), KnowledgeGraph.load(args.b)
    threshold = _pick(args.threshold, cfg.threshold)
    items = intersect_graphs(ga, gb, threshold=threshold)
    save_intersection(items, args.out, threshold, ga.causal_relations | gb.causal_relations)
    log.info("intersection: %d items at threshold %g", len(items), threshold)
    return EXIT_OK


def cmd_gen_probes(args, cfg: PipelineConfig) -> int:
    syn = _synonyms(_pick(args.synonyms, cfg.paths.synonyms))
    seed = _pick(args.seed, cfg.seed)
    if args.mode == "probe1":
        if not args.kg:
            raise KgragError("probe1 needs --kg")
        ps = gen_probe1(KnowledgeGraph.load(args.kg), _pick(args.n, cfg.n_probe1), seed, syn)
    else:
        if not args.intersection:
            raise KgragError("probe2 needs --intersection")
        inter, _ = load_intersection(args.intersection)
        context = KnowledgeGraph.load(args.kg) if args.kg else None
        ps = gen_probe2(inter, _pick(args.n, cfg.n_probe2), seed, syn, context=context)
    write_probe_set(ps, args.out)
    log.info("%s: %d items written to %s", ps.origin, len(ps.items), args.out)
    return EXIT_OK


def cmd_validate_probes(args, cfg: PipelineConfig) -> int:
    ps = read_probe_set(args.probes)
    syn = _synonyms(_pick(args.synonyms, cfg.paths.synonyms))
    if args.intersection:
        inter, _ = load_intersection(args.intersection)
        context = KnowledgeGraph.load(args.kg) if args.kg else None
        report = validate_probe_set(ps, inter, syn, context=context)
    elif args.kg:
        report = validate_probe_set(ps, KnowledgeGraph.load(args.kg), syn)
    else:
        raise KgragError("validate-probes needs --kg or --intersection")
    for f in report.findings:
        print(f"{f.item_id}\t{f.code}\t{f.message}")
    print(f"{report.n_items} items, {len(report.findings)} finding(s)")
    return EXIT_OK if report.ok else EXIT_INVALID


def _profiles(args, cfg: PipelineConfig, provider: str | None) -> list[ProviderProfile]:
    path = _pick(args.profiles, cfg.paths.profiles)
    if path:
        return load_profiles(path)
    if provider and provider.startswith("mock:"):
        return [ProviderProfile(name="mock", model="mock", provider="mock", api_key_env=None)]
    raise KgragError("run-eval needs --profiles unless a mock provider is selected")


def cmd_run_eval(args, cfg: PipelineConfig) -> int:
    systems = _pick(args.systems, list(cfg.systems))
    temps = _pick(args.temps, list(cfg.temperatures))
    if any(t < 0 for t in temps):
        raise KgragError(f"temperatures must be >= 0, got {temps}")
    paths = {k: str(v) for k, v in cfg.paths.graphs.items()}
    for sym in ("g1", "g2", "g3"):
        if getattr(args, sym):
            paths[sym] = getattr(args, sym)
    # everything is loaded before the journal is opened, so a bad input writes nothing
    graphs = load_graphs(paths, systems)
    probe_paths = args.probes or [str(p) for p in cfg.paths.probes]
    if not probe_paths:
        raise KgragError("run-eval needs --probes")
    probes = [read_probe_set(p) for p in probe_paths]
    provider = _pick(args.provider, cfg.provider)
    if provider == "mock:random" and args.seed is not None:
        provider = f"mock:random:{args.seed}"
    profiles = _profiles(args, cfg, provider)
    factory = make_client_factory(provider, probes, trace=args.trace)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    result = run_grid(probes, systems, profiles, temps, factory, graphs=graphs,
                      top_k=_pick(args.top_k, cfg.top_k), journal=args.out,
                      replicates=_pick(args.replicates, cfg.replicates),
                      max_in_flight=_pick(args.max_in_flight, cfg.max_in_flight))
    log.info("%d records (%d resumed) written to %s", len(result.records), result.skipped, args.out)
    for cell in result.failed_cells:
        print("failed cell: " + " / ".join(str(c) for c in cell), file=sys.stderr)
    return EXIT_OK if result.ok else EXIT_PARTIAL


def cmd_analyze(args, cfg: PipelineConfig) -> int:
    records = read_journal(args.runs)
    out_dir = _pick(args.out_dir, cfg.paths.report_dir) or "."
    res = emit_report(records, _pick(args.baseline, cfg.baseline), out_dir,
                      temperatures=_pick(args.temps, list(cfg.temperatures)))
    log.info("report written to %s and %s", res.markdown, res.csv)
    return res.exit_code


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML pipeline config; flags override its values")
    common.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, help="random seed (recorded in outputs)")

    p = _Parser(prog="kgrag", description="Causal KG construction, probe synthesis and KG-RAG evaluation.")
    p.add_argument("--version", action="version",
                   version=f"kgrag {__version__} (python {platform.python_version()})")
    sub = p.add_subparsers(dest="command", metavar="<command>", parser_class=_Parser)

    s = sub.add_parser("rank", parents=[common], help="filter, score and rank abstracts")
    s.add_argument("--corpus", help="JSONL with id, title, abstract")
    s.add_argument("--terms", help="JSON term lists (causality, phenotype, biomarker)")
    s.add_argument("--min-words", type=int)
    s.add_argument("--min-df", type=int)
    s.add_argument("--weights", help="w_caus,w_pheno,w_biom,w_kw")
    s.add_argument("--top", type=int, help="keep the top K documents (default 1000)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_rank)

    s = sub.add_parser("extract", parents=[common], help="run the extraction loop over ranked abstracts")
    s.add_argument("--ranked", required=True, help="ranked (or raw) abstract JSONL")
    s.add_argument("--provider", help="mock:rules (default), mock:script:<file> or http")
    s.add_argument("--profiles", help="provider profiles JSON (live providers)")
    s.add_argument("--profile", help="profile name to use from --profiles")
    s.add_argument("--model", help="override the model name")
    s.add_argument("--temperature", type=float, default=ExtractionPipelineConfig.temperature)
    s.add_argument("--max-in-flight", type=int)
    s.add_argument("--trace", action="store_true", help="log request/response bodies (credentials redacted)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("build-kg", parents=[common], help="clean, canonicalize and assemble a graph")
    s.add_argument("--triples", nargs="+", required=True)
    s.add_argument("--relations", help="causal relation list, one per line")
    s.add_argument("--synonyms", help="synonym map JSON")
    s.add_argument("--vague", help="vague entity names, one per line")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_build_kg)

    s = sub.add_parser("merge-kg", parents=[common], help="union of graphs")
    s.add_argument("--in", dest="inputs", nargs="+", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_merge_kg)

    s = sub.add_parser("intersect", parents=[common], help="embedding-screened intersection of two graphs")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--threshold", type=float)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_intersect)

    s = sub.add_parser("gen-probes", parents=[common, seeded], help="generate a probe set")
    s.add_argument("--mode", choices=("probe1", "probe2"), required=True)
    s.add_argument("--kg", help="source graph (probe1) or context graph (probe2)")
    s.add_argument("--intersection", help="intersection file (probe2)")
    s.add_argument("--synonyms")
    s.add_argument("--n", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_probes)

    s = sub.add_parser("validate-probes", parents=[common], help="check a probe set against its source")
    s.add_argument("--probes", required=True)
    s.add_argument("--kg")
    s.add_argument("--intersection")
    s.add_argument("--synonyms")
    s.set_defaults(func=cmd_validate_probes)

    s = sub.add_parser("run-eval", parents=[common, seeded], help="run the evaluation grid")
    s.add_argument("--probes", nargs="+")
    s.add_argument("--systems", type=_systems)
    s.add_argument("--profiles")
    s.add_argument("--temps", type=_floats)
    s.add_argument("--top-k", type=int)
    s.add_argument("--g1")
    s.add_argument("--g2")
    s.add_argument("--g3")
    s.add_argument("--provider", help="mock:oracle | mock:random[:<seed>] | mock:script:<file> | http")
    s.add_argument("--replicates", type=int)
    s.add_argument("--max-in-flight", type=int)
    s.add_argument("--trace", action="store_true", help="log request/response bodies (credentials redacted)")
    s.add_argument("--out", required=True, help="JSONL journal (resumed if it exists)")
    s.set_defaults(func=cmd_run_eval)

    s = sub.add_parser("analyze", parents=[common], help="score a journal and write report.md/report.csv")
    s.add_argument("--runs", required=True)
    s.add_argument("--baseline")
    s.add_argument("--temps", type=_floats)
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return EXIT_INVALID
    level = logging.WARNING - 10 * min(args.verbose + 1, 2)
    if getattr(args, "trace", False):
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config) if args.config else PipelineConfig()
        return args.func(args, cfg)
    except (KgragError, OSError, json.JSONDecodeError) as e:
        print(f"kgrag {args.command}: error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
