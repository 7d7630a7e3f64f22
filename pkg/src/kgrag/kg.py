"""Triple cleanup, canonicalization, graph assembly, unions and intersection."""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EntityNotFound, ParseError, ValidationError
from .text import TfidfSpace, english_stopwords, tokenize

log = logging.getLogger(__name__)

DEFAULT_VAGUE = frozenset({"it", "this", "this study"})
INTERSECTION_THRESHOLD = 0.65


def normalize_space(s: str) -> str:
    return " ".join(s.split())


def normalize_relation(relation: str) -> str:
    return normalize_space(relation.lower())


@dataclass(frozen=True, order=True)
class Provenance:
    paper_id: str
    sentence_id: int
    clause_id: int

    def __post_init__(self):
        if self.sentence_id < 0 or self.clause_id < 0:
            raise ValidationError(f"negative provenance index in {self}")

    def to_dict(self) -> dict:
        return {"paper_id": self.paper_id, "sentence_id": self.sentence_id, "clause_id": self.clause_id}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Provenance":
        return cls(str(d["paper_id"]), int(d["sentence_id"]), int(d["clause_id"]))


@dataclass(frozen=True)
class Triple:
    """A (head, relation, tail) fact with the provenance of the clause it came from.

    The same class carries raw extractions and canonicalized triples; the graph
    identifies triples by :attr:`key` and accumulates provenances per key.
    """

    head: str
    relation: str
    tail: str
    provenance: Provenance | None = None

    def __post_init__(self):
        for name in ("head", "relation", "tail"):
            if not str(getattr(self, name)).strip():
                raise ValidationError(f"triple {name} is empty")

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.head, self.relation, self.tail)

    def verbalize(self) -> str:
        return f"{self.head} {self.relation} {self.tail}"

    def to_dict(self) -> dict:
        d = {"Entity 1": self.head, "Relationship": self.relation, "Entity 2": self.tail}
        if self.provenance is not None:
            d["provenance"] = self.provenance.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Triple":
        prov = d.get("provenance")
        if isinstance(prov, list):
            prov = prov[0] if prov else None
        return cls(str(d["Entity 1"]), str(d["Relationship"]), str(d["Entity 2"]),
                   Provenance.from_dict(prov) if prov else None)


RawTriple = Triple
CanonicalTriple = Triple


def load_triples(path) -> list[Triple]:
    triples = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                triples.append(Triple.from_dict(json.loads(line)))
            except json.JSONDecodeError as e:
                raise ParseError(f"invalid JSON ({e.msg})", line=lineno) from None
            except (KeyError, TypeError, ValidationError) as e:
                raise ParseError(f"malformed triple: {e}", line=lineno) from None
    return triples


def write_triples(triples: Iterable[Triple], path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for t in triples:
            f.write(json.dumps(t.to_dict(), ensure_ascii=False) + "\n")


class SynonymMap:
    """Surface name to canonical name, case-insensitive.

    Chains (a -> b, b -> c) are resolved at construction so every canonical
    name is a fixed point of the map.
    """

    def __init__(self, mapping: Mapping[str, str] | None = None):
        raw = {self._fold(k): normalize_space(v) for k, v in (mapping or {}).items()}
        fold = self._fold
        resolved: dict[str, str] = {}
        for k in raw:
            seen = {k}
            target = raw[k]
            while fold(target) in raw and fold(target) not in seen:
                seen.add(fold(target))
                target = raw[fold(target)]
            if fold(target) in raw and fold(raw[fold(target)]) != fold(target):
                raise ValidationError(f"synonym cycle through {k!r}")
            resolved[k] = target
        for canon in set(resolved.values()):
            resolved.setdefault(self._fold(canon), canon)
        self._map = resolved

    @staticmethod
    def _fold(name: str) -> str:
        return normalize_space(name).casefold()

    def __call__(self, name: str) -> str:
        name = normalize_space(name)
        return self._map.get(self._fold(name), name)

    def __len__(self) -> int:
        return len(self._map)

    def canonical_names(self) -> set[str]:
        return set(self._map.values())

    def to_dict(self) -> dict[str, str]:
        return dict(sorted(self._map.items()))

    @classmethod
    def load(cls, path) -> "SynonymMap":
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
        if not isinstance(data, dict):
            raise ParseError(f"{path}: synonym map must be a JSON object")
        return cls(data)

    @classmethod
    def default(cls) -> "SynonymMap":
        raw = resources.files("kgrag.data").joinpath("synonyms.json").read_text("utf-8")
        return cls(json.loads(raw))


@dataclass(frozen=True)
class RelationFilter:
    causal_relations: frozenset[str]

    def __post_init__(self):
        rels = frozenset(normalize_relation(r) for r in self.causal_relations if r.strip())
        if not rels:
            raise ValidationError("relation filter is empty")
        object.__setattr__(self, "causal_relations", rels)

    def __contains__(self, relation: str) -> bool:
        return normalize_relation(relation) in self.causal_relations

    @classmethod
    def from_text(cls, text: str) -> "RelationFilter":
        lines = (ln.split("#", 1)[0].strip() for ln in text.splitlines())
        return cls(frozenset(ln for ln in lines if ln))

    @classmethod
    def load(cls, path) -> "RelationFilter":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def default(cls) -> "RelationFilter":
        return cls.from_text(resources.files("kgrag.data").joinpath("relations.txt").read_text("utf-8"))


def filter_causal(triples: Iterable[Triple], rf: RelationFilter) -> list[Triple]:
    return [t for t in triples if t.relation in rf]


def mask_vague(triples: Iterable[Triple], vague: Iterable[str] = DEFAULT_VAGUE) -> list[Triple]:
    vague = {normalize_space(v).lower() for v in vague}
    return [t for t in triples
            if normalize_space(t.head).lower() not in vague and normalize_space(t.tail).lower() not in vague]


def canonicalize(triple: Triple, syn: SynonymMap) -> Triple:
    return Triple(syn(triple.head), normalize_relation(triple.relation), syn(triple.tail), triple.provenance)


def clean_triples(triples: Iterable[Triple], syn: SynonymMap, vague: Iterable[str] = DEFAULT_VAGUE) -> list[Triple]:
    """Vague mask then canonicalization (the causal filter is applied by the graph)."""
    return [canonicalize(t, syn) for t in mask_vague(triples, vague)]


class KnowledgeGraph:
    """Canonical triple set plus a boolean adjacency over causal relations.

    ``adjacency[i, j]`` is True iff some stored triple (entities[i], r, entities[j])
    has ``r`` in the causal relation set. Entities are kept in sorted order.
    Instances are treated as immutable once built.
    """

    def __init__(self, provenance: Mapping[tuple[str, str, str], Sequence[Provenance]],
                 causal_relations: Iterable[str]):
        self._prov = {k: tuple(sorted(set(v))) for k, v in sorted(provenance.items())}
        self.causal_relations = frozenset(normalize_relation(r) for r in causal_relations)
        names = set()
        for h, _, t in self._prov:
            names.add(h)
            names.add(t)
        self.entities: tuple[str, ...] = tuple(sorted(names))
        self.index = {e: i for i, e in enumerate(self.entities)}
        n = len(self.entities)
        self.adjacency = np.zeros((n, n), dtype=bool)
        for h, r, t in self._prov:
            if r in self.causal_relations:
                self.adjacency[self.index[h], self.index[t]] = True
        self.adjacency.setflags(write=False)

    def __len__(self) -> int:
        return len(self._prov)

    def __eq__(self, other) -> bool:
        return (isinstance(other, KnowledgeGraph) and self._prov == other._prov
                and self.causal_relations == other.causal_relations)

    def __repr__(self) -> str:
        return f"KnowledgeGraph({len(self.entities)} entities, {len(self._prov)} triples)"

    @property
    def keys(self) -> list[tuple[str, str, str]]:
        return list(self._prov)

    @property
    def triples(self) -> list[Triple]:
        """One Triple per key, carrying its first provenance."""
        return [Triple(h, r, t, p[0] if p else None) for (h, r, t), p in self._prov.items()]

    def causal_triples(self) -> list[Triple]:
        return [t for t in self.triples if t.relation in self.causal_relations]

    def provenances(self, key: tuple[str, str, str]) -> tuple[Provenance, ...]:
        return self._prov.get(tuple(key), ())

    def has_triple(self, head: str, relation: str, tail: str) -> bool:
        return (head, relation, tail) in self._prov

    def _idx(self, x: str) -> int:
        try:
            return self.index[x]
        except KeyError:
            raise EntityNotFound(f"unknown entity {x!r}") from None

    def has_edge(self, u: str, v: str) -> bool:
        return bool(self.adjacency[self._idx(u), self._idx(v)])

    def in_neighbors(self, x: str) -> list[str]:
        col = self.adjacency[:, self._idx(x)]
        return [self.entities[i] for i in np.flatnonzero(col)]

    def out_neighbors(self, x: str) -> list[str]:
        row = self.adjacency[self._idx(x), :]
        return [self.entities[i] for i in np.flatnonzero(row)]

    def in_degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=0)

    def to_dict(self) -> dict:
        triples = []
        for (h, r, t), provs in self._prov.items():
            triples.append({"Entity 1": h, "Relationship": r, "Entity 2": t,
                            "provenance": [p.to_dict() for p in provs]})
        return {"entities": list(self.entities), "triples": triples,
                "causal_relations": sorted(self.causal_relations)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "KnowledgeGraph":
        prov: dict[tuple[str, str, str], list[Provenance]] = {}
        for rec in d.get("triples", []):
            key = (rec["Entity 1"], rec["Relationship"], rec["Entity 2"])
            p = rec.get("provenance") or []
            if isinstance(p, dict):
                p = [p]
            prov.setdefault(key, []).extend(Provenance.from_dict(x) for x in p)
        return cls(prov, d.get("causal_relations", ()))

    def save(self, path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, ensure_ascii=False, indent=1)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "KnowledgeGraph":
        try:
            with open(path, encoding="utf-8") as f:
                return cls.from_dict(json.load(f))
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: invalid graph JSON ({e.msg})", line=e.lineno) from None

    def fingerprint(self) -> str:
        payload = json.dumps({"triples": [list(k) for k in self._prov],
                              "causal_relations": sorted(self.causal_relations)},
                             ensure_ascii=False, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def assemble_graph(triples: Iterable[Triple], rf: RelationFilter) -> KnowledgeGraph:
    prov: dict[tuple[str, str, str], list[Provenance]] = {}
    for t in triples:
        bucket = prov.setdefault(t.key, [])
        if t.provenance is not None:
            bucket.append(t.provenance)
    return KnowledgeGraph(prov, rf.causal_relations)


def merge_graphs(graphs: Sequence[KnowledgeGraph]) -> KnowledgeGraph:
    prov: dict[tuple[str, str, str], list[Provenance]] = {}
    relations: set[str] = set()
    for g in graphs:
        relations |= g.causal_relations
        for key in g.keys:
            prov.setdefault(key, []).extend(g.provenances(key))
    return KnowledgeGraph(prov, relations)


def direct_and_two_hop_causes(g: KnowledgeGraph, x: str) -> tuple[set[str], set[str]]:
    """Direct causes (A[u, x]) and two-hop causes ((A @ A)[u, x]) of ``x``, excluding ``x``."""
    j = g._idx(x)
    a = g.adjacency
    parents = a[:, j].copy()
    two_hop = a[:, parents].any(axis=1) if parents.any() else np.zeros(len(g.entities), dtype=bool)
    parents[j] = False
    two_hop[j] = False
    return ({g.entities[i] for i in np.flatnonzero(parents)},
            {g.entities[i] for i in np.flatnonzero(two_hop)})


class TripleEncoder:
    """Embed verbalized triples as TF-IDF vectors fitted on a triple corpus."""

    def __init__(self, corpus: Sequence[Triple]):
        texts = [t.verbalize() for t in corpus]
        self.space = TfidfSpace(ngram_range=(1, 1))
        if texts:
            self.space.fit(texts)

    def encode_many(self, triples: Sequence[Triple]):
        for t in triples:
            if not tokenize(t.verbalize()):
                raise ValidationError(f"triple {t.key} has an empty verbalization")
        return self.space.transform([t.verbalize() for t in triples])

    def __call__(self, triple: Triple) -> np.ndarray:
        return np.asarray(self.encode_many([triple]).todense()).ravel()


def embed_triple(t: Triple, encoder: TripleEncoder) -> np.ndarray:
    return encoder(t)


@dataclass(frozen=True)
class IntersectionItem:
    triple_a: Triple
    triple_b: Triple
    similarity: float

    def to_dict(self) -> dict:
        return {"a": self.triple_a.to_dict(), "b": self.triple_b.to_dict(), "similarity": self.similarity}

    @classmethod
    def from_dict(cls, d: Mapping) -> "IntersectionItem":
        return cls(Triple.from_dict(d["a"]), Triple.from_dict(d["b"]), float(d["similarity"]))


def _dedup_key(t: Triple) -> tuple:
    stop = english_stopwords()
    return tuple(tuple(w for w in tokenize(part) if w not in stop) for part in t.key)


def intersect_graphs(ga: KnowledgeGraph, gb: KnowledgeGraph, encoder: TripleEncoder | None = None,
                     threshold: float = INTERSECTION_THRESHOLD) -> list[IntersectionItem]:
    """Cross pairs of causal triples whose embeddings have cosine >= ``threshold``.

    Pairs are sorted by descending similarity (ties by triple text) and then
    de-duplicated so each stopword-stripped graph-A triple appears once.
    """
    if threshold <= 0:
        raise ValidationError(f"threshold must be > 0, got {threshold}")
    ta, tb = ga.causal_triples(), gb.causal_triples()
    if not ta or not tb:
        return []
    encoder = encoder or TripleEncoder(ta + tb)
    xa, xb = encoder.encode_many(ta), encoder.encode_many(tb)
    sims = (xa @ xb.T).tocoo()
    cands = []
    for i, j, s in zip(sims.row, sims.col, sims.data):
        s = round(min(float(s), 1.0), 12)
        if s >= threshold:
            cands.append((-s, ta[i].verbalize(), tb[j].verbalize(), i, j))
    cands.sort()
    log.info("intersection screen: %d candidate pairs at threshold %.2f", len(cands), threshold)
    out, seen = [], set()
    for neg_s, _, _, i, j in cands:
        k = _dedup_key(ta[i])
        if k in seen:
            continue
        seen.add(k)
        out.append(IntersectionItem(ta[i], tb[j], -neg_s))
    log.info("intersection kept %d items after de-duplication", len(out))
    return out


def intersection_graph(items: Sequence[IntersectionItem], causal_relations: Iterable[str] | None = None) -> KnowledgeGraph:
    """Graph over both sides' triples of an intersection set."""
    triples = [it.triple_a for it in items] + [it.triple_b for it in items]
    if causal_relations is None:
        causal_relations = {t.relation for t in triples}
    return assemble_graph(triples, RelationFilter(frozenset(causal_relations)))


def save_intersection(items: Sequence[IntersectionItem], path, threshold: float,
                      causal_relations: Iterable[str] = ()) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    doc = {"threshold": threshold, "causal_relations": sorted(causal_relations),
           "items": [it.to_dict() for it in items]}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, ensure_ascii=False, indent=1)
        f.write("\n")


def load_intersection(path) -> tuple[list[IntersectionItem], frozenset[str]]:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    items = [IntersectionItem.from_dict(d) for d in doc.get("items", [])]
    rels = frozenset(doc.get("causal_relations") or {it.triple_a.relation for it in items}
                     | {it.triple_b.relation for it in items})
    return items, rels
