"""Tokenization and a small TF-IDF vector space.

The TF-IDF weighting is raw term count times the smoothed inverse document
frequency ``ln((1 + N) / (1 + df)) + 1`` with L2-normalized rows, so every
weight is non-negative and cosines between rows fall in [0, 1].
"""
from __future__ import annotations

import math
import re
from collections import Counter
from functools import lru_cache
from importlib import resources
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError

# hyphenated tokens such as "p-tau-217" survive as one token
_TOKEN_RE = re.compile(r"[^\W_]+(?:-[^\W_]+)*")


def tokenize(text: str) -> list[str]:
    """Lowercase ``text`` and split it on non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


@lru_cache(maxsize=None)
def english_stopwords() -> frozenset[str]:
    """The fixed English stopword list shipped with the package."""
    raw = resources.files("kgrag.data").joinpath("stopwords_en.txt").read_text("utf-8")
    return frozenset(w.strip() for w in raw.splitlines() if w.strip())


def ngrams(tokens: Sequence[str], ngram_range: tuple[int, int] = (1, 1)) -> list[str]:
    lo, hi = ngram_range
    out: list[str] = []
    for n in range(lo, hi + 1):
        if n == 1:
            out.extend(tokens)
            continue
        out.extend(" ".join(tokens[i:i + n]) for i in range(len(tokens) - n + 1))
    return out


def count_phrase(tokens: Sequence[str], phrase_tokens: Sequence[str]) -> int:
    """Count non-overlapping occurrences of ``phrase_tokens`` inside ``tokens``."""
    m = len(phrase_tokens)
    if m == 0:
        return 0
    count = 0
    i = 0
    last = len(tokens) - m
    while i <= last:
        if list(tokens[i:i + m]) == list(phrase_tokens):
            count += 1
            i += m
        else:
            i += 1
    return count


def cosine(u, v) -> float:
    """Cosine similarity of two dense or 1-row sparse vectors (0.0 if either is zero)."""
    u = np.asarray(u.todense()).ravel() if sp.issparse(u) else np.asarray(u, dtype=float).ravel()
    v = np.asarray(v.todense()).ravel() if sp.issparse(v) else np.asarray(v, dtype=float).ravel()
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


class TfidfSpace:
    """Fit a TF-IDF vocabulary on a corpus and project texts into it.

    Parameters mirror the usual vectorizer knobs: ``ngram_range`` for word
    n-grams (formed after stopword removal), ``stopwords`` (a set, or None to
    keep every token) and ``min_df`` (minimum document frequency of a term).
    """

    def __init__(self, ngram_range=(1, 1), stopwords=None, min_df: int = 1):
        if min_df < 1:
            raise ConfigError(f"min_df must be >= 1, got {min_df}")
        self.ngram_range = tuple(ngram_range)
        self.stopwords = frozenset(stopwords) if stopwords else frozenset()
        self.min_df = min_df
        self.vocabulary_: dict[str, int] = {}
        self.idf_: np.ndarray = np.zeros(0)
        self.n_docs_ = 0

    def analyze(self, text: str) -> list[str]:
        toks = [t for t in tokenize(text) if t not in self.stopwords]
        return ngrams(toks, self.ngram_range)

    def fit(self, texts: Sequence[str]) -> "TfidfSpace":
        df: Counter[str] = Counter()
        for text in texts:
            df.update(set(self.analyze(text)))
        terms = sorted(t for t, c in df.items() if c >= self.min_df)
        if not terms:
            raise ConfigError("empty vocabulary after filtering; lower min_df or check the corpus")
        n = len(texts)
        self.n_docs_ = n
        self.vocabulary_ = {t: i for i, t in enumerate(terms)}
        self.idf_ = np.array([math.log((1 + n) / (1 + df[t])) + 1.0 for t in terms])
        return self

    def counts(self, grams_per_doc: Iterable[Iterable[str]]) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        n_rows = 0
        for r, grams in enumerate(grams_per_doc):
            n_rows = r + 1
            c = Counter(g for g in grams if g in self.vocabulary_)
            for g in sorted(c, key=self.vocabulary_.__getitem__):
                rows.append(r)
                cols.append(self.vocabulary_[g])
                vals.append(float(c[g]))
        return sp.csr_matrix((vals, (rows, cols)), shape=(n_rows, len(self.vocabulary_)))

    def weight(self, counts: sp.csr_matrix) -> sp.csr_matrix:
        """Apply idf weights and L2-normalize each row (all-zero rows stay zero)."""
        x = sp.csr_matrix(counts.multiply(self.idf_[np.newaxis, :]))
        norms = np.sqrt(np.asarray(x.multiply(x).sum(axis=1)).ravel())
        norms[norms == 0.0] = 1.0
        return sp.csr_matrix(sp.diags(1.0 / norms) @ x)

    def transform(self, texts: Sequence[str]) -> sp.csr_matrix:
        return self.weight(self.counts(self.analyze(t) for t in texts))

    def transform_phrases(self, phrases: Sequence[str]) -> sp.csr_matrix:
        """One query row pooling the n-grams of each phrase (no n-grams across phrases)."""
        pooled: list[str] = []
        for p in phrases:
            pooled.extend(self.analyze(p))
        return self.weight(self.counts([pooled]))

    def fit_transform(self, texts: Sequence[str]) -> sp.csr_matrix:
        return self.fit(texts).transform(texts)


def row_cosines(x: sp.csr_matrix, q: sp.csr_matrix) -> np.ndarray:
    """Cosine of every (L2-normalized) row of ``x`` with the single row ``q``."""
    sims = np.asarray((x @ q.T).todense()).ravel()
    return np.clip(sims, 0.0, 1.0)
