"""Sentence-level extraction loop: coreference, clause decomposition, relation extraction.

Each stage is one chat-completion call driven by a prompt template. Templates
use a literal ``{text}`` placeholder (substituted with ``str.replace`` so the
JSON braces in the instructions need no escaping).
"""
from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .corpus import Document
from .errors import TransportError, ValidationError
from .kg import Provenance, Triple
from .llm import ChatClient, RetryingClient

log = logging.getLogger(__name__)

COREF_TEMPLATE = (
    "Resolve all coreferences in the text below. Replace every pronoun and short form "
    "with the full name of the entity it refers to. Return only the rewritten text.\n\n"
    "Text: {text}"
)
DECOMPOSITION_TEMPLATE = (
    "Decompose the text below into simple clauses that each state one relation between "
    "two entities. Return a JSON array of strings.\n\n"
    "Text: {text}"
)
RELATION_TEMPLATE = (
    "Extract (subject, relation, object) triples from the clause below. Return a JSON array "
    'of objects with keys "Entity 1", "Relationship", "Entity 2", or [] if there is none.\n\n'
    "Text: {text}"
)


@dataclass
class ExtractionPipelineConfig:
    coref_template: str = COREF_TEMPLATE
    decomposition_template: str = DECOMPOSITION_TEMPLATE
    relation_template: str = RELATION_TEMPLATE
    provider: str = "mock:rules"
    model: str = "qwen2.5-coder-32b-instruct"
    temperature: float = 0.7
    max_retries: int = 3

    def __post_init__(self):
        if self.temperature < 0:
            raise ValidationError(f"temperature must be >= 0, got {self.temperature}")
        for name in ("coref_template", "decomposition_template", "relation_template"):
            if "{text}" not in getattr(self, name):
                raise ValidationError(f"{name} has no {{text}} placeholder")


@dataclass
class ExtractionFailure:
    paper_id: str
    sentence_id: int
    clause_id: int | None
    reason: str


_SENT_RE = re.compile(r"(?<=[.!?])\s+(?=[A-Z0-9\"'(\[])")


def split_sentences(text: str) -> list[str]:
    text = " ".join(text.split())
    if not text:
        return []
    return [s for s in _SENT_RE.split(text) if s.strip()]


def parse_json_array(text: str):
    """First JSON array embedded in ``text``, or None."""
    start = text.find("[")
    end = text.rfind("]")
    if start < 0 or end < start:
        return None
    try:
        value = json.loads(text[start:end + 1])
    except json.JSONDecodeError:
        return None
    return value if isinstance(value, list) else None


def _fill(template: str, text: str) -> str:
    return template.replace("{text}", text)


def run_extraction_pipeline(doc: Document, cfg: ExtractionPipelineConfig, client: ChatClient,
                            failures: list[ExtractionFailure] | None = None) -> list[Triple]:
    """Triples for every sentence of ``doc`` in sentence, clause, triple order.

    A provider failure (after the client's retries) skips the affected sentence
    or clause and is appended to ``failures``; malformed relation output skips
    the clause.
    """
    if not isinstance(client, RetryingClient):
        client = RetryingClient(client, max_retries=cfg.max_retries)
    failures = failures if failures is not None else []

    def ask(template, text):
        return client.send(_fill(template, text), cfg.model, cfg.temperature)

    triples: list[Triple] = []
    for s_id, sentence in enumerate(split_sentences(doc.abstract)):
        try:
            resolved = ask(cfg.coref_template, sentence).strip() or sentence
            decomposed = ask(cfg.decomposition_template, resolved)
        except TransportError as e:
            log.warning("%s sentence %d: %s", doc.id, s_id, e)
            failures.append(ExtractionFailure(doc.id, s_id, None, str(e)))
            continue
        clauses = parse_json_array(decomposed)
        if clauses is None or not all(isinstance(c, str) for c in clauses):
            clauses = [resolved]
        for c_id, clause in enumerate(c for c in clauses if c.strip()):
            try:
                raw = ask(cfg.relation_template, clause)
            except TransportError as e:
                log.warning("%s sentence %d clause %d: %s", doc.id, s_id, c_id, e)
                failures.append(ExtractionFailure(doc.id, s_id, c_id, str(e)))
                continue
            records = parse_json_array(raw)
            if records is None:
                log.info("%s sentence %d clause %d: unparseable relation output skipped", doc.id, s_id, c_id)
                failures.append(ExtractionFailure(doc.id, s_id, c_id, "unparseable relation output"))
                continue
            prov = Provenance(doc.id, s_id, c_id)
            for rec in records:
                try:
                    triples.append(Triple(str(rec["Entity 1"]).strip(), str(rec["Relationship"]).strip(),
                                          str(rec["Entity 2"]).strip(), prov))
                except (KeyError, TypeError, ValidationError):
                    log.info("%s sentence %d clause %d: malformed triple %r skipped", doc.id, s_id, c_id, rec)
    return triples


def extract_corpus(docs: Sequence[Document], cfg: ExtractionPipelineConfig, client: ChatClient,
                   max_in_flight: int = 1, failures: list[ExtractionFailure] | None = None) -> list[Triple]:
    """Run the pipeline over ``docs``; output follows document order whatever the parallelism."""
    failures = failures if failures is not None else []
    per_doc_failures: list[list[ExtractionFailure]] = [[] for _ in docs]

    def one(i):
        return run_extraction_pipeline(docs[i], cfg, client, per_doc_failures[i])

    if max_in_flight <= 1:
        results = [one(i) for i in range(len(docs))]
    else:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            results = list(pool.map(one, range(len(docs))))
    for f in per_doc_failures:
        failures.extend(f)
    return [t for ts in results for t in ts]


EXTRA_RELATIONS = ("is associated with", "was associated with", "influences", "is linked to")


class RuleBasedClient:
    """Offline stand-in for the three extraction prompts.

    Coreference is the identity, decomposition splits on semicolons, and
    relation extraction splits a clause around the first known relation phrase.
    Only suitable for templated text such as the bundled synthetic corpus.
    """

    deterministic = True

    def __init__(self, relations: Sequence[str] | None = None):
        from .kg import RelationFilter

        rels = set(relations or RelationFilter.default().causal_relations) | set(EXTRA_RELATIONS)
        alts = "|".join(re.escape(r) for r in sorted(rels, key=lambda r: (-len(r), r)))
        self._rel_re = re.compile(rf"(?<!\w)({alts})(?!\w)", re.IGNORECASE)

    @staticmethod
    def _payload(prompt: str) -> str:
        return prompt.rsplit("Text: ", 1)[-1].strip()

    def send(self, prompt: str, model: str, temperature: float) -> str:
        text = self._payload(prompt)
        if prompt.startswith("Resolve"):
            return text
        if prompt.startswith("Decompose"):
            parts = [p.strip().rstrip(".").strip() for p in text.split(";")]
            return json.dumps([p for p in parts if p])
        m = self._rel_re.search(text)
        if not m:
            return "[]"
        head = text[:m.start()].strip(" ,")
        tail = text[m.end():].strip(" ,.")
        if not head or not tail:
            return "[]"
        return json.dumps([{"Entity 1": head, "Relationship": m.group(1).lower(), "Entity 2": tail}])
