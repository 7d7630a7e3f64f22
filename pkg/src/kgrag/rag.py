"""Graph-context retrieval, zero-shot prompting, answer parsing and the run grid."""
from __future__ import annotations

import json
import logging
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, ParseError, TransportError
from .kg import KnowledgeGraph, merge_graphs
from .llm import (ChatClient, OracleClient, ProviderProfile, RandomClient, RetryingClient,
                  ScriptedClient, HTTPChatClient)
from .probes import ProbeItem, ProbeSet
from .text import TfidfSpace, english_stopwords, row_cosines

log = logging.getLogger(__name__)

SYSTEMS = ("no_rag", "g1", "g2", "g1+g2", "g3", "g1+g2+g3")
TEMPERATURES = (0.0, 0.2, 0.5)
TOP_K = 20
INVALID = "INVALID"

INSTRUCTION = (
    "You are answering a multiple-choice question.\n"
    "Return ONLY one uppercase letter from this set: {allowed_str}.\n"
    "Do not include explanations or extra text."
)
QUESTION_MARKER = "Question:"


@dataclass
class RetrievalConfig:
    system: str
    top_k: int = TOP_K
    graph_paths: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ConfigError(f"unknown system {self.system!r}; expected one of {', '.join(SYSTEMS)}")
        if self.top_k < 0:
            raise ConfigError(f"top_k must be >= 0, got {self.top_k}")

    @property
    def components(self) -> list[str]:
        return [] if self.system == "no_rag" else self.system.split("+")


def load_graphs(paths: Mapping[str, str], systems: Sequence[str]) -> dict[str, KnowledgeGraph]:
    """Load every graph symbol the systems need; a missing file is a configuration error."""
    needed = sorted({c for s in systems for c in RetrievalConfig(s).components})
    graphs = {}
    for sym in needed:
        path = paths.get(sym)
        if not path:
            raise ConfigError(f"system needs graph {sym!r} but no path was given")
        if not Path(path).is_file():
            raise ConfigError(f"graph file for {sym!r} not found: {path}")
        graphs[sym] = KnowledgeGraph.load(path)
    return graphs


def verbalize(key) -> str:
    h, r, t = key
    return f"{h} {r} {t}."


class Retriever:
    """Ranks verbalized triples of a (possibly pooled) graph against an item.

    The TF-IDF space is fitted once per system on its pooled verbalizations.
    """

    def __init__(self, graphs: Mapping[str, KnowledgeGraph]):
        self.graphs = dict(graphs)
        self._spaces: dict[str, tuple[list[str], TfidfSpace | None, object]] = {}

    def _index(self, system: str):
        if system not in self._spaces:
            comps = RetrievalConfig(system).components
            missing = [c for c in comps if c not in self.graphs]
            if missing:
                raise ConfigError(f"graph(s) {', '.join(missing)} not loaded for system {system!r}")
            g = self.graphs[comps[0]] if len(comps) == 1 else merge_graphs([self.graphs[c] for c in comps])
            texts = sorted({verbalize(k) for k in g.keys})
            space = matrix = None
            if texts:
                space = TfidfSpace(ngram_range=(1, 2), stopwords=english_stopwords())
                try:
                    matrix = space.fit_transform(texts)
                except ConfigError:
                    space = None
            self._spaces[system] = (texts, space, matrix)
        return self._spaces[system]

    def retrieve(self, item: ProbeItem, rc: RetrievalConfig) -> list[str]:
        if rc.system == "no_rag" or rc.top_k == 0:
            return []
        texts, space, matrix = self._index(rc.system)
        if not texts:
            return []
        if space is None:
            sims = np.zeros(len(texts))
        else:
            sims = row_cosines(matrix, space.transform([query_text(item)]))
        order = sorted(range(len(texts)), key=lambda i: (-round(float(sims[i]), 12), texts[i]))
        return [texts[i] for i in order[:rc.top_k]]


def query_text(item: ProbeItem) -> str:
    parts = [item.stem]
    parts += item.atomic_options or []
    if not item.atomic_options:
        parts += [t for _, t in item.options]
    return " ".join(parts)


def retrieve_context(item: ProbeItem, rc: RetrievalConfig, graphs) -> list[str]:
    """Top-k verbalized triples for ``item`` under ``rc``; ``graphs`` is a dict or a Retriever."""
    if rc.system == "no_rag":
        return []
    retriever = graphs if isinstance(graphs, Retriever) else Retriever(graphs)
    return retriever.retrieve(item, rc)


def render_question(item: ProbeItem) -> str:
    lines = [f"{QUESTION_MARKER} {item.stem}"]
    if item.atomic_options:
        lines += [f"{i}. {text}" for i, text in enumerate(item.atomic_options, start=1)]
    lines += [f"{letter}: {text}" for letter, text in item.options]
    return "\n".join(lines)


def render_prompt(item: ProbeItem, context: Sequence[str]) -> str:
    parts = [INSTRUCTION.format(allowed_str=", ".join(item.allowed_letters))]
    if context:
        parts.append("Facts:\n" + "\n".join(f"- {c}" for c in context))
    parts.append(render_question(item))
    return "\n\n".join(parts) + "\n"


_STANDALONE = re.compile(r"(?<![A-Za-z0-9])([A-Za-z])(?![A-Za-z0-9])")


def parse_answer(response: str, allowed) -> str:
    """First standalone letter of ``response`` that is in ``allowed`` (case-insensitive)."""
    allowed = {a.upper() for a in allowed}
    for m in _STANDALONE.finditer(response or ""):
        letter = m.group(1).upper()
        if letter in allowed:
            return letter
    return INVALID


@dataclass
class RunRecord:
    probe: str
    item_id: str
    model: str
    system: str
    temperature: float
    replicate: int
    key: str
    retrieved_context: list[str]
    raw_response: str
    parsed_letter: str
    correct: bool
    latency_ms: int
    error: str | None = None

    def cell(self) -> tuple:
        return (self.model, self.probe, self.system, self.temperature)

    def record_key(self) -> tuple:
        return (self.model, self.probe, self.system, self.temperature, self.replicate, self.item_id)

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False, sort_keys=False)

    @classmethod
    def from_dict(cls, d: Mapping) -> "RunRecord":
        d = dict(d)
        d["temperature"] = float(d["temperature"])
        return cls(**d)


def read_journal(path) -> list[RunRecord]:
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                records.append(RunRecord.from_dict(json.loads(line)))
            except json.JSONDecodeError:
                # a torn final line from an interrupted run is dropped
                log.warning("journal %s line %d unreadable, ignored", path, lineno)
            except (TypeError, KeyError) as e:
                raise ParseError(f"malformed run record: {e}", line=lineno) from None
    return records


def evaluate_item(item: ProbeItem, rc: RetrievalConfig, profile: ProviderProfile, temperature: float,
                  client: ChatClient, graphs=None, probe: str = "", replicate: int = 0,
                  context: list[str] | None = None) -> RunRecord:
    """retrieve -> render -> send -> parse, one provider call."""
    if context is None:
        context = retrieve_context(item, rc, graphs or {})
    prompt = render_prompt(item, context)
    error = None
    start = time.perf_counter()
    try:
        raw = client.send(prompt, profile.model, temperature)
    except TransportError as e:
        raw, error = "", str(e)
    elapsed = 0 if getattr(client, "deterministic", False) else int(round((time.perf_counter() - start) * 1000))
    letter = parse_answer(raw, item.allowed_letters) if error is None else INVALID
    return RunRecord(probe=probe, item_id=item.item_id, model=profile.name, system=rc.system,
                     temperature=float(temperature), replicate=replicate, key=item.key,
                     retrieved_context=list(context), raw_response=raw, parsed_letter=letter,
                     correct=letter == item.key, latency_ms=elapsed, error=error)


@dataclass
class GridResult:
    records: list[RunRecord]
    failed_cells: list[tuple]
    skipped: int = 0

    @property
    def ok(self) -> bool:
        return not self.failed_cells


def run_grid(probes: Sequence[ProbeSet], systems: Sequence[str], profiles: Sequence[ProviderProfile],
             temperatures: Sequence[float], client_factory: Callable[[ProviderProfile], ChatClient],
             graphs: Mapping[str, KnowledgeGraph] | None = None, top_k: int = TOP_K,
             journal=None, replicates: int = 1, max_in_flight: int = 1) -> GridResult:
    """Evaluate the full (model, probe, system, temperature, replicate, item) product.

    Records already present in ``journal`` are skipped (resume). New records are
    appended as they complete; at the end the journal is rewritten in sorted
    order. Transport failures become invalid records and never abort the grid.
    """
    retriever = Retriever(graphs or {})
    done: dict[tuple, RunRecord] = {}
    if journal is not None and Path(journal).exists():
        for rec in read_journal(journal):
            done[rec.record_key()] = rec
    skipped = len(done)
    order_sys = {s: i for i, s in enumerate(systems)}
    ctx_cache: dict[tuple, list[str]] = {}

    def context_for(ps: ProbeSet, item: ProbeItem, system: str) -> list[str]:
        k = (ps.origin, item.item_id, system)
        if k not in ctx_cache:
            ctx_cache[k] = retriever.retrieve(item, RetrievalConfig(system, top_k))
        return ctx_cache[k]

    jobs = []
    for profile in profiles:
        for ps in probes:
            for system in systems:
                RetrievalConfig(system, top_k)  # rejects unknown system names up front
                for t in temperatures:
                    for rep in range(replicates):
                        for item in ps.items:
                            key = (profile.name, ps.origin, system, float(t), rep, item.item_id)
                            if key not in done:
                                jobs.append((profile, ps, system, float(t), rep, item))

    clients = {p.name: client_factory(p) for p in profiles}
    out = open(journal, "a", encoding="utf-8") if journal is not None else None

    def run(job):
        profile, ps, system, t, rep, item = job
        ctx = context_for(ps, item, system)
        return evaluate_item(item, RetrievalConfig(system, top_k), profile, t, clients[profile.name],
                             probe=ps.origin, replicate=rep, context=ctx)

    try:
        if max_in_flight <= 1:
            for job in jobs:
                rec = run(job)
                done[rec.record_key()] = rec
                if out:
                    out.write(rec.to_json() + "\n")
        else:
            for ps in probes:
                for item in ps.items:
                    for system in systems:
                        context_for(ps, item, system)
            with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
                for rec in pool.map(run, jobs):
                    done[rec.record_key()] = rec
                    if out:
                        out.write(rec.to_json() + "\n")
    finally:
        if out:
            out.close()

    item_order = {(ps.origin, it.item_id): i for ps in probes for i, it in enumerate(ps.items)}
    probe_order = {ps.origin: i for i, ps in enumerate(probes)}
    prof_order = {p.name: i for i, p in enumerate(profiles)}

    def sort_key(r: RunRecord):
        return (prof_order.get(r.model, len(prof_order)), r.model, probe_order.get(r.probe, len(probe_order)),
                r.probe, order_sys.get(r.system, len(order_sys)), r.system, r.temperature, r.replicate,
                item_order.get((r.probe, r.item_id), 1 << 30), r.item_id)

    records = sorted(done.values(), key=sort_key)
    if journal is not None:
        with open(journal, "w", encoding="utf-8") as f:
            for rec in records:
                f.write(rec.to_json() + "\n")
    failed = sorted({r.cell() for r in records if r.error is not None})
    if failed:
        log.warning("%d grid cell(s) had provider failures", len(failed))
    return GridResult(records, failed, skipped)


def oracle_for(probes: Sequence[ProbeSet]) -> OracleClient:
    keys = {render_question(item): item.key for ps in probes for item in ps.items}

    def answer(prompt: str):
        idx = prompt.rfind(QUESTION_MARKER)
        return keys.get(prompt[idx:].rstrip("\n")) if idx >= 0 else None

    return OracleClient(answer)


def make_client_factory(provider: str | None, probes: Sequence[ProbeSet] = (), trace: bool = False):
    """Map a ``--provider`` spec to a factory ``profile -> client``.

    ``mock:oracle``, ``mock:random:<seed>`` and ``mock:script:<file>`` are
    offline; ``None`` uses the HTTP client described by each profile.
    """
    if provider is None or provider in ("http", "profile"):
        return lambda p: RetryingClient(HTTPChatClient(p, trace=trace), max_retries=p.max_retries)
    if provider == "mock:oracle":
        client = oracle_for(probes)
        return lambda p: client
    if provider.startswith("mock:random"):
        parts = provider.split(":")
        try:
            seed = int(parts[2]) if len(parts) > 2 else 0
        except ValueError:
            raise ConfigError(f"bad random seed in {provider!r}") from None
        client = RandomClient(seed)
        return lambda p: client
    if provider.startswith("mock:script:"):
        client = ScriptedClient.load(provider.split(":", 2)[2])
        return lambda p: client
    raise ConfigError(f"unknown provider {provider!r}")
