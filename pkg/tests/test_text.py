import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.feature_extraction.text import TfidfVectorizer

from kgrag.errors import ConfigError
from kgrag.text import (TfidfSpace, cosine, count_phrase, english_stopwords, ngrams, row_cosines,
                        tokenize)

DOCS = [
    "Insulin resistance causes hyperglycemia in older adults with obesity.",
    "Hyperglycemia leads to neuroinflammation; p-tau-217 rises in plasma.",
    "A Mendelian randomization study of insulin resistance and dementia risk.",
    "Plasma p-tau-217 and amyloid beta track cognitive decline in dementia.",
    "Obesity and insulin resistance increase the risk of cognitive decline.",
]


def test_tokenize_keeps_hyphenated_biomarkers():
    assert tokenize("Plasma p-tau-217, APOE4 and HbA1c!") == ["plasma", "p-tau-217", "apoe4", "and", "hba1c"]


def test_tokenize_drops_underscores_and_edge_hyphens():
    assert tokenize("a_b -x- y") == ["a", "b", "x", "y"]


def test_ngrams():
    assert ngrams(["a", "b", "c"], (1, 2)) == ["a", "b", "c", "a b", "b c"]


def test_count_phrase_is_non_overlapping():
    assert count_phrase(["a", "a", "a"], ["a", "a"]) == 1
    assert count_phrase(["a", "a", "a", "a"], ["a", "a"]) == 2
    assert count_phrase(["x"], []) == 0


def test_stopwords_shipped():
    sw = english_stopwords()
    assert "the" in sw and "insulin" not in sw
    assert len(sw) > 300


@pytest.mark.parametrize("ngram_range,min_df", [((1, 1), 1), ((1, 2), 1), ((1, 2), 2)])
def test_tfidf_matches_sklearn(ngram_range, min_df):
    # sklearn drops stop words before forming n-grams too, so the spaces coincide
    sw = english_stopwords()
    ours = TfidfSpace(ngram_range=ngram_range, stopwords=sw, min_df=min_df)
    x = ours.fit_transform(DOCS).toarray()
    ref = TfidfVectorizer(tokenizer=tokenize, token_pattern=None, lowercase=False,
                          stop_words=sorted(sw), ngram_range=ngram_range, min_df=min_df,
                          smooth_idf=True, sublinear_tf=False, norm="l2")
    y = ref.fit_transform(DOCS).toarray()
    assert sorted(ours.vocabulary_) == sorted(ref.vocabulary_)
    cols = [ref.vocabulary_[t] for t in sorted(ours.vocabulary_, key=ours.vocabulary_.get)]
    np.testing.assert_allclose(x, y[:, cols], atol=1e-12)


def test_transform_unseen_terms_give_zero_row():
    sp = TfidfSpace().fit(["alpha beta", "beta gamma"])
    assert sp.transform(["delta epsilon"]).nnz == 0


def test_empty_vocabulary_is_config_error():
    with pytest.raises(ConfigError):
        TfidfSpace(min_df=3).fit(["alpha", "beta"])
    with pytest.raises(ConfigError):
        TfidfSpace(min_df=0)


def test_transform_phrases_pools_without_cross_phrase_bigrams():
    sp = TfidfSpace(ngram_range=(1, 2)).fit(["red fox jumps", "fox jumps high"])
    q = sp.transform_phrases(["red fox", "jumps high"])
    vocab = {i: t for t, i in sp.vocabulary_.items()}
    terms = {vocab[i] for i in q.indices}
    assert "red fox" in terms and "jumps high" in terms
    assert "fox jumps" not in terms


def test_cosine_hand_values():
    assert cosine([1, 0], [0, 1]) == 0.0
    assert cosine([1, 1], [2, 2]) == pytest.approx(1.0)
    assert cosine([0, 0], [1, 2]) == 0.0


words = st.sampled_from(["insulin", "glucose", "tau", "amyloid", "brain", "risk", "the", "of"])
docs = st.lists(st.lists(words, min_size=1, max_size=12).map(" ".join), min_size=2, max_size=8)


@settings(max_examples=60, deadline=None)
@given(docs, st.lists(words, min_size=1, max_size=5).map(" ".join))
def test_row_cosines_in_unit_interval(corpus, query):
    sp = TfidfSpace(ngram_range=(1, 2))
    try:
        x = sp.fit_transform(corpus)
    except ConfigError:
        return
    sims = row_cosines(x, sp.transform([query]))
    assert np.all(sims >= 0) and np.all(sims <= 1)
