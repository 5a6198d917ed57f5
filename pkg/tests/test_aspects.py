import math

import numpy as np
import pytest

from abae_reviews.aspects import (AspectLabeling, DocumentIndex, aspect_prevalence,
                                  cluster_purity, coherence_report, coherence_score,
                                  merged_aspect_embedding, top_words, topic_word_purity)
from abae_reviews.baselines import KMeansModel, LdaModel


def test_coherence_examples():
    assert coherence_score([3], [[3]]) == 0.0
    docs = [[0, 1], [0, 1], [0, 1], [0]]
    assert coherence_score([0, 1], docs) == pytest.approx(0.0)
    docs = [[0, 1], [0], [0], [0], [0]]
    assert coherence_score([0, 1], docs) == pytest.approx(math.log(2 / 5))


def test_coherence_direct_double_sum():
    rng = np.random.default_rng(0)
    docs = [rng.integers(0, 15, size=rng.integers(2, 8)).tolist() for _ in range(20)]
    top = [w for w in range(15) if any(w in d for d in docs)][:8]
    D = lambda *ws: sum(all(w in d for w in ws) for d in docs)
    ref = sum(math.log((D(top[m], top[l]) + 1) / D(top[l])) for m in range(1, len(top)) for l in range(m))
    assert coherence_score(top, docs) == ref


def test_coherence_rejects_unseen_word():
    with pytest.raises(ValueError, match="'zz'"):
        coherence_score([0, 1], [[0]], words=["a", "zz"])


def test_coherence_report_truncates():
    docs = [[0, 1, 2], [0, 2], [1]]
    rep = coherence_report({0: [0, 1, 2]}, docs, sizes=(2, 3))
    assert rep.scores[0][2] == pytest.approx(coherence_score([0, 1], docs))
    assert rep.totals()[3] == pytest.approx(coherence_score([0, 1, 2], docs))
    assert "total" in rep.to_text()


def test_document_index_counts():
    idx = DocumentIndex([[0, 0, 1], [1, 2]], V=4)
    assert idx.doc_freq([0, 1, 2, 3]).tolist() == [1, 2, 1, 0]
    assert idx.co_doc_freq([0, 1]).tolist() == [[1, 1], [1, 2]]


def test_top_words_examples():
    E = np.array([[1.0, 0], [0.9, 0.1], [0, 1.0]])
    km = KMeansModel(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert top_words("kmeans", km, 0, 1, E) == [0]
    lda = LdaModel(1, 0.1, 0.1, np.array([[0, 5, 1]]))
    assert top_words("lda", lda, 0, 1) == [1]


def test_merged_embedding_examples():
    reps = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    lab = AspectLabeling({0: "location", 1: "other", 2: "other"})
    assert np.allclose(merged_aspect_embedding(lab, "location", reps), [1, 0])
    lab = AspectLabeling({0: "location", 1: "location", 2: "other"})
    assert np.allclose(merged_aspect_embedding(lab, "location", reps), [0.5, 0.5])
    lab = AspectLabeling({0: "cleanliness", 1: "other", 2: "cleanliness"})
    assert np.allclose(merged_aspect_embedding(lab, "cleanliness", reps), [1, 0])
    with pytest.raises(ValueError):
        merged_aspect_embedding(lab, "location", reps)


def test_labeling_validation_and_roundtrip(tmp_path):
    with pytest.raises(ValueError):
        AspectLabeling({0: "food"})
    lab = AspectLabeling({0: "location", 1: "other"}, "kmeans")
    with pytest.raises(ValueError, match=r"\[2\]"):
        lab.check_total(3)
    lab.save(tmp_path / "m.tsv")
    assert AspectLabeling.load(tmp_path / "m.tsv", "kmeans") == lab


def test_prevalence_examples():
    one = AspectLabeling({0: "location"})
    assert aspect_prevalence(np.ones((4, 2)), np.array([[1.0, 0.0]]), one) == {"location": 1.0}
    two = AspectLabeling({0: "location", 1: "cleanliness"})
    prev = aspect_prevalence(np.array([[1.0, 1.0]]), np.eye(2), two)
    assert prev["location"] == pytest.approx(0.5) and prev["cleanliness"] == pytest.approx(0.5)
    rng = np.random.default_rng(0)
    S = np.vstack([np.tile([1.0, 0.0], (90, 1)), np.tile([0.0, 1.0], (10, 1))]) + 0.05 * rng.normal(size=(100, 2))
    prev = aspect_prevalence(S, np.eye(2), two)
    assert prev["location"] > prev["cleanliness"]


def test_purities():
    assert cluster_purity([0, 0, 1, 1], [5, 5, 6, 5]) == 0.75
    assert topic_word_purity([[1, 2], [3, 4]], {1: 0, 2: 0, 3: 1, 4: 0}) == 0.75
