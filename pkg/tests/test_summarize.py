import warnings

import numpy as np
import pytest

from abae_reviews.abae import AbaeModel
from abae_reviews.aspects import AspectLabeling
from abae_reviews.corpus import EncodedSentence
from abae_reviews.methods import AbaeBundle, KMeansBundle
from abae_reviews.baselines import KMeansModel
from abae_reviews.summarize import (ShortListingWarning, build_evaluation_sheet,
                                    extract_top_sentences, fleiss_kappa, precision_at_k,
                                    read_rows, score_judgments, summarize_listings, write_rows,
                                    SHEET_COLUMNS)


def _sent(ids, pos, lid="L1", text=None):
    return EncodedSentence(tuple(ids), f"r{pos}", lid, "g", pos, text or f"s{pos}")


def _abae_bundle():
    # word 0/1 point to aspect 0 (cleanliness), words 2/3 to aspect 1 (location)
    E = np.array([[1.0, 0.0], [0.9, 0.1], [0.0, 1.0], [0.1, 0.9]])
    m = AbaeModel(E=E, M=np.eye(2), W=np.eye(2), b=np.zeros(2), T=np.eye(2))
    return AbaeBundle(m, AspectLabeling({0: "cleanliness", 1: "location"}))


def test_three_sentence_listing_returns_all_sorted():
    sents = [_sent([2], 0), _sent([0], 1), _sent([1, 2], 2)]
    out = extract_top_sentences(sents, "cleanliness", _abae_bundle(), k=3)
    assert [e.rank for e in out] == [1, 2, 3]
    assert [e.position for e in out] == [1, 2, 0]
    assert all(a.score >= b.score for a, b in zip(out, out[1:]))


def test_sentence_equal_to_aspect_ranks_first():
    sents = [_sent([3], 0), _sent([0], 1), _sent([1, 3], 2), _sent([2, 3], 3)]
    out = extract_top_sentences(sents, "cleanliness", _abae_bundle(), k=3)
    assert out[0].position == 1 and out[0].score == pytest.approx(1.0)


def test_planted_cleanliness_sentence_ranks_first_for_kmeans():
    E = np.array([[1.0, 0.0], [0.95, 0.05], [0.0, 1.0], [0.05, 0.95]])
    b = KMeansBundle(KMeansModel(np.array([[1.0, 0.0], [0.0, 1.0]])), E,
                     AspectLabeling({0: "cleanliness", 1: "location"}, "kmeans"))
    sents = [_sent([2, 3], i) for i in range(6)]
    sents.insert(4, _sent([0, 1], 99))
    out = extract_top_sentences(sents, "cleanliness", b, k=3)
    assert out[0].position == 99


def test_short_listing_warns():
    with pytest.warns(ShortListingWarning):
        out = extract_top_sentences([_sent([0], 0)], "cleanliness", _abae_bundle(), k=3)
    assert len(out) == 1


def test_summarize_skips_unlabeled_aspect():
    sents = [_sent([0], i) for i in range(3)]

    class C:
        by_listing = {"L1": [0, 1, 2]}
        def __getitem__(self, i):
            return sents[i]

    with pytest.warns(UserWarning, match="communication"):
        out = summarize_listings(C(), [_abae_bundle()], k=2)
    assert {e.aspect for e in out} == {"cleanliness", "location"} and len(out) == 4


def test_precision_examples():
    assert precision_at_k({"a": [1, 0, 1]}, 1) == 1.0
    assert precision_at_k({"a": [1, 0, 1]}, 3) == pytest.approx(2 / 3)
    assert precision_at_k({"a": [0, 0, 0]}, 3) == 0.0
    assert precision_at_k({"a": [1, 1, 1], "b": [0, 0, 0]}, 3) == 0.5
    with pytest.raises(ValueError, match="missing rank"):
        precision_at_k({"a": [1]}, 3)


def test_fleiss_examples():
    assert fleiss_kappa([[3, 0], [0, 3], [3, 0]]) == 1.0
    assert abs(fleiss_kappa([[3, 0], [2, 1]]) - (-0.2)) < 1e-12
    # two raters, four items: observed agreement 0.5 equals chance agreement 0.5
    assert fleiss_kappa([[2, 0], [0, 2], [1, 1], [1, 1]]) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        fleiss_kappa([[3, 0], [1, 1]])


def _extracted(n_listings=10):
    out = []
    b = _abae_bundle()
    for l in range(n_listings):
        ss = [_sent([i % 4], i, lid=f"L{l}", text=f"t{l}-{i}") for i in range(5)]
        out.extend(summarize_listings_stub(ss, b))
    return out


def summarize_listings_stub(ss, bundle):
    return [e for a in ("cleanliness", "location") for e in extract_top_sentences(ss, a, bundle, 3)]


def test_sheets_overlap_blind_and_deterministic(tmp_path):
    ex = _extracted()
    sh = build_evaluation_sheet(ex, n_annotators=3, overlap_fraction=0.2, seed=4)
    assert len(sh.overlap) == round(0.2 * len(ex))
    seen = [r["example_id"] for rows in sh.sheets.values() for r in rows]
    assert set(seen) == {r["example_id"] for r in sh.key}
    assert len(seen) == len(ex) + 2 * len(sh.overlap)
    assert all("method" not in r for rows in sh.sheets.values() for r in rows)
    again = build_evaluation_sheet(ex, n_annotators=3, overlap_fraction=0.2, seed=4)
    assert again.sheets == sh.sheets and again.key == sh.key
    write_rows(sh.sheets["a1"], SHEET_COLUMNS, tmp_path / "a1.tsv")
    assert [r["example_id"] for r in read_rows(tmp_path / "a1.tsv")] == [r["example_id"] for r in sh.sheets["a1"]]


def test_score_judgments_end_to_end():
    ex = _extracted(4)
    sh = build_evaluation_sheet(ex, n_annotators=2, overlap_fraction=0.5, seed=0)
    meta = {r["example_id"]: r for r in sh.key}
    judged = []
    for a, rows in sh.sheets.items():
        for r in rows:
            m = meta[r["example_id"]]
            judged.append({**r, "verdict": "1" if int(m["rank"]) == 1 else "0"})
    res = score_judgments(judged, sh.key)
    assert res.precision[("abae", "cleanliness")] == (1.0, pytest.approx(1 / 3))
    assert res.kappa == 1.0
    assert "abae\t1.00/0.33" in res.to_text()
    with pytest.raises(ValueError, match="0 or 1"):
        score_judgments([{**judged[0], "verdict": "yes"}], sh.key)
