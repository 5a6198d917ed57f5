import itertools

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from abae_reviews.abae import (attention_weights, infer_batch, infer_sentence,
                               orthogonality_penalty)
from abae_reviews.numerics import cosine_similarity, softmax
from abae_reviews.profiles import aggregate_bor, aggregate_bos, kendall_tau, symmetric_kl
from abae_reviews.summarize import fleiss_kappa
from abae_reviews.corpus import segment_sentences, tokenize_and_filter

from conftest import random_model

finite = st.floats(-50, 50, allow_nan=False)
simplex = st.lists(st.floats(0.0, 1.0), min_size=2, max_size=8).filter(lambda v: sum(v) > 1e-3) \
    .map(lambda v: np.array(v) / sum(v))


@given(arrays(np.float64, st.integers(1, 20), elements=finite))
def test_softmax_on_simplex_and_shift_invariant(v):
    p = softmax(v)
    assert abs(p.sum() - 1) < 1e-12 and (p >= 0).all()
    assert np.allclose(p, softmax(v + 3.0))


@given(arrays(np.float64, 4, elements=finite), arrays(np.float64, 4, elements=finite))
def test_cosine_bounded_symmetric(u, v):
    if np.linalg.norm(u) < 1e-6 or np.linalg.norm(v) < 1e-6:
        return
    c = cosine_similarity(u, v)
    assert -1 <= c <= 1 and c == cosine_similarity(v, u)


@given(st.integers(0, 50), st.lists(st.integers(0, 11), min_size=1, max_size=12))
def test_attention_and_aspects_on_simplex(seed, sentence):
    m = random_model(seed % 7)
    a = attention_weights(sentence, m)
    p, _ = infer_sentence(sentence, m)
    for v in (a, p):
        assert abs(v.sum() - 1) < 1e-9 and (v >= 0).all()


@settings(max_examples=30)
@given(st.lists(st.lists(st.integers(0, 11), min_size=1, max_size=6), min_size=1, max_size=10))
def test_batch_inference_equals_single(sentences):
    m = random_model(1)
    P, Z = infer_batch(sentences, m)
    for s, p, z in zip(sentences, P, Z):
        p1, z1 = infer_sentence(s, m)
        assert np.allclose(p, p1) and np.allclose(z, z1)


@given(st.lists(simplex, min_size=1, max_size=6))
def test_bos_on_simplex(rows):
    K = len(rows[0])
    rows = [r for r in rows if len(r) == K]
    p = aggregate_bos(rows).distribution
    assert abs(p.sum() - 1) < 1e-9 and (p >= 0).all()
    q = aggregate_bor([np.array(rows)]).distribution
    assert np.allclose(p, q)


@given(simplex, simplex)
def test_symmetric_kl_nonneg_symmetric(p, q):
    if p.size != q.size:
        return
    d = symmetric_kl(p, q)
    assert d >= -1e-12 and abs(d - symmetric_kl(q, p)) < 1e-12


@given(st.permutations(list(range(9))), st.permutations(list(range(9))))
def test_kendall_bounds_symmetry_reverse(a, b):
    t = kendall_tau(a, b)
    assert -1 <= t <= 1 and t == kendall_tau(b, a)
    assert kendall_tau(a, list(reversed(a))) == -1.0


@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=10))
def test_fleiss_at_most_one(pairs):
    rows = [(a, 4 - a) for a, _ in pairs]
    k = fleiss_kappa(rows)
    assert k <= 1 + 1e-12


@given(arrays(np.float64, (3, 4), elements=st.floats(0.1, 5)))
def test_penalty_nonnegative_scale_invariant(T):
    p = orthogonality_penalty(T)
    assert p >= 0 and np.isclose(p, orthogonality_penalty(3.7 * T))


@given(st.text(max_size=200))
def test_segmentation_preserves_non_space_characters(text):
    parts = segment_sentences(text)
    assert "".join("".join(p.split()) for p in parts) == "".join(text.split())


@given(st.text(max_size=100))
def test_tokens_are_lowercase_and_not_stopwords(text):
    from abae_reviews.corpus import STOPWORDS
    for t in tokenize_and_filter(text):
        assert t == t.lower() and t not in STOPWORDS and t
