"""Abstract ingestion, relevance features and top-K selection."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, ParseError, ValidationError
from .text import TfidfSpace, count_phrase, english_stopwords, row_cosines, tokenize

log = logging.getLogger(__name__)

MIN_WORDS = 180
MIN_DF = 2
TOP_K = 1000


def word_count(text: str) -> int:
    return len(text.split())


@dataclass(frozen=True)
class Document:
    id: str
    title: str
    abstract: str
    word_count: int = -1

    def __post_init__(self):
        if self.word_count < 0:
            object.__setattr__(self, "word_count", word_count(self.abstract))

    @property
    def text(self) -> str:
        return f"{self.title} {self.abstract}"

    def to_dict(self) -> dict:
        return {"id": self.id, "title": self.title, "abstract": self.abstract}


@dataclass(frozen=True)
class TermLists:
    causality: tuple[str, ...]
    phenotype: tuple[str, ...]
    biomarker: tuple[str, ...]

    def __post_init__(self):
        for name in ("causality", "phenotype", "biomarker"):
            cleaned = []
            for phrase in getattr(self, name):
                p = " ".join(phrase.lower().split())
                if p and p not in cleaned:
                    cleaned.append(p)
            if not cleaned:
                raise ValidationError(f"term list {name!r} is empty")
            object.__setattr__(self, name, tuple(cleaned))

    @classmethod
    def from_dict(cls, d: dict) -> "TermLists":
        try:
            return cls(tuple(d["causality"]), tuple(d["phenotype"]), tuple(d["biomarker"]))
        except KeyError as e:
            raise ValidationError(f"term lists missing key {e.args[0]!r}") from None

    @classmethod
    def load(cls, path) -> "TermLists":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    @classmethod
    def default(cls) -> "TermLists":
        raw = resources.files("kgrag.data").joinpath("terms.json").read_text("utf-8")
        return cls.from_dict(json.loads(raw))


@dataclass(frozen=True)
class FeatureVector:
    s_caus: float
    s_pheno: float
    s_biom: float
    k_caus: int
    k_pheno: int
    k_biom: int

    @property
    def k_tot(self) -> int:
        return self.k_caus + self.k_pheno + self.k_biom


@dataclass(frozen=True)
class RankingWeights:
    w_caus: float = 0.4
    w_pheno: float = 0.2
    w_biom: float = 0.2
    w_kw: float = 0.2

    def __post_init__(self):
        ws = self.as_tuple()
        if any(w < 0 for w in ws):
            raise ConfigError(f"ranking weights must be non-negative, got {ws}")
        if not any(w > 0 for w in ws):
            raise ConfigError("at least one ranking weight must be positive")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.w_caus, self.w_pheno, self.w_biom, self.w_kw)

    @classmethod
    def parse(cls, spec: str) -> "RankingWeights":
        """Parse ``"w_caus,w_pheno,w_biom,w_kw"``."""
        parts = [p for p in spec.split(",") if p.strip()]
        if len(parts) != 4:
            raise ConfigError(f"expected 4 comma-separated weights, got {spec!r}")
        try:
            return cls(*(float(p) for p in parts))
        except ValueError:
            raise ConfigError(f"weights must be numbers, got {spec!r}") from None


@dataclass(frozen=True)
class RankedDocument:
    doc: Document
    features: FeatureVector
    normalized: tuple[float, float, float, float]
    score: float

    def to_dict(self) -> dict:
        f = self.features
        n = self.normalized
        return {
            "id": self.doc.id,
            "title": self.doc.title,
            "abstract": self.doc.abstract,
            "word_count": self.doc.word_count,
            "score": self.score,
            "s_caus": f.s_caus, "s_pheno": f.s_pheno, "s_biom": f.s_biom,
            "k_caus": f.k_caus, "k_pheno": f.k_pheno, "k_biom": f.k_biom, "k_tot": f.k_tot,
            "norm_caus": n[0], "norm_pheno": n[1], "norm_biom": n[2], "norm_kw": n[3],
        }


def read_documents(path) -> list[Document]:
    """Read every record of a JSONL abstract file (no length filter)."""
    docs: list[Document] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"invalid JSON ({e.msg})", line=lineno) from None
            if not isinstance(rec, dict):
                raise ParseError("record is not an object", line=lineno)
            missing = [k for k in ("id", "title", "abstract") if k not in rec]
            if missing:
                raise ParseError(f"missing field(s) {', '.join(missing)}", line=lineno)
            doc_id = str(rec["id"])
            if doc_id in seen:
                raise ValidationError(f"duplicate document id {doc_id!r} on line {lineno}")
            seen.add(doc_id)
            docs.append(Document(doc_id, str(rec["title"] or ""), str(rec["abstract"] or "")))
    return docs


def ingest_documents(path, min_words: int = MIN_WORDS) -> list[Document]:
    """Load abstracts and keep those with at least ``min_words`` words."""
    docs = read_documents(path)
    kept = [d for d in docs if d.word_count >= min_words]
    log.info("ingested %d documents, kept %d with >= %d words", len(docs), len(kept), min_words)
    return kept


def compute_features(docs: Sequence[Document], terms: TermLists, min_df: int = MIN_DF) -> list[FeatureVector]:
    if not docs:
        raise ValidationError("compute_features needs at least one document")
    space = TfidfSpace(ngram_range=(1, 2), stopwords=english_stopwords(), min_df=min_df)
    x = space.fit_transform([d.text for d in docs])
    lists = (terms.causality, terms.phenotype, terms.biomarker)
    sims = [row_cosines(x, space.transform_phrases(phrases)) for phrases in lists]
    phrase_toks = [[tokenize(p) for p in phrases] for phrases in lists]

    out = []
    for i, d in enumerate(docs):
        toks = tokenize(d.text)
        k = [sum(count_phrase(toks, pt) for pt in plist) for plist in phrase_toks]
        out.append(FeatureVector(float(sims[0][i]), float(sims[1][i]), float(sims[2][i]), *k))
    return out


def minmax_normalize(values: Sequence[float]) -> list[float]:
    if len(values) == 0:
        raise ValidationError("cannot normalize an empty list")
    arr = np.asarray(values, dtype=float)
    lo, hi = arr.min(), arr.max()
    if hi == lo:
        return [0.0] * len(arr)
    return [float(v) for v in (arr - lo) / (hi - lo)]


def score_normalized(normalized, weights: RankingWeights) -> float:
    return float(sum(w * v for w, v in zip(weights.as_tuple(), normalized)))


def rank_documents(docs: Sequence[Document], features: Sequence[FeatureVector],
                   weights: RankingWeights | None = None) -> list[RankedDocument]:
    """Min-max normalize each feature column and sort by the weighted sum.

    Ties are broken by ascending document id.
    """
    if len(docs) != len(features):
        raise ValidationError(f"{len(docs)} documents but {len(features)} feature vectors")
    if not docs:
        return []
    weights = weights or RankingWeights()
    cols = [
        minmax_normalize([f.s_caus for f in features]),
        minmax_normalize([f.s_pheno for f in features]),
        minmax_normalize([f.s_biom for f in features]),
        minmax_normalize([f.k_tot for f in features]),
    ]
    ranked = []
    for i, (d, f) in enumerate(zip(docs, features)):
        norm = tuple(c[i] for c in cols)
        ranked.append(RankedDocument(d, f, norm, score_normalized(norm, weights)))
    ranked.sort(key=lambda r: (-r.score, r.doc.id))
    return ranked


def select_top_k(ranked: Sequence[RankedDocument], k: int = TOP_K) -> list[RankedDocument]:
    if k < 0:
        raise ValidationError(f"k must be >= 0, got {k}")
    return list(ranked[:k])


def write_ranked(ranked: Sequence[RankedDocument], path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for r in ranked:
            f.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")
