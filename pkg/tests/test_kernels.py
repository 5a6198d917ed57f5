"""The numba kernels and their numpy fallbacks must agree."""
import numpy as np
import pytest

from abae_reviews import _accel, kernels
from abae_reviews.abae import negative_sums, pack

from conftest import random_batch, random_model

pytestmark = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")


def test_sgns_epoch_agrees():
    rng = np.random.default_rng(0)
    V, d = 30, 8
    sents = [rng.integers(0, V, size=rng.integers(1, 9)) for _ in range(40)]
    tokens = np.concatenate(sents).astype(np.int64)
    offsets = np.zeros(len(sents) + 1, dtype=np.int64)
    np.cumsum([s.size for s in sents], out=offsets[1:])
    windows = rng.integers(1, 4, size=tokens.size).astype(np.int64)
    n_pairs = sum(min(len(s), i + w + 1) - max(0, i - w) - 1
                  for s, lo in zip(sents, offsets) for i, w in enumerate(windows[lo:lo + len(s)]))
    negs = rng.integers(0, V, size=(n_pairs, 4)).astype(np.int64)
    lrs = np.linspace(0.025, 0.001, tokens.size)
    W0 = (rng.random((V, d)) - 0.5) / d
    out = []
    for fn in (kernels.sgns_epoch_nb, kernels.sgns_epoch_np):
        W_in, W_out = W0.copy(), np.zeros((V, d))
        loss, pairs = fn(tokens, offsets, windows, negs, lrs, W_in, W_out)
        out.append((loss, pairs, W_in, W_out))
    assert out[0][1] == out[1][1] == n_pairs
    assert out[0][0] == pytest.approx(out[1][0], rel=1e-10)
    assert np.allclose(out[0][2], out[1][2], atol=1e-12)
    assert np.allclose(out[0][3], out[1][3], atol=1e-12)


def test_gibbs_sweep_agrees():
    rng = np.random.default_rng(1)
    K, V = 4, 20
    tokens = rng.integers(0, V, size=300).astype(np.int64)
    doc_of = np.sort(rng.integers(0, 25, size=300)).astype(np.int64)
    z0 = rng.integers(0, K, size=300).astype(np.int64)
    u = rng.random(300)
    res = []
    for fn in (kernels.gibbs_sweep_nb, kernels.gibbs_sweep_np):
        z = z0.copy()
        ndk = np.zeros((25, K), dtype=np.int64)
        nkw = np.zeros((K, V), dtype=np.int64)
        np.add.at(ndk, (doc_of, z), 1)
        np.add.at(nkw, (z, tokens), 1)
        nk = nkw.sum(axis=1)
        fn(tokens, doc_of, z, ndk, nkw, nk, 0.25, 0.25, u, True)
        res.append((z, ndk, nkw, nk))
    for a, b in zip(*res):
        assert np.array_equal(a, b)


def test_kmeans_assign_agrees_with_ties():
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(200, 5))
    cents = rng.normal(size=(7, 5))
    cents[3] = cents[1]
    la, da = kernels.kmeans_assign_nb(pts, cents)
    lb, db = kernels.kmeans_assign_np(pts, cents)
    assert np.array_equal(la, lb) and np.allclose(da, db)
    assert 3 not in la


@pytest.mark.parametrize("seed", [0, 1])
def test_abae_hinge_grads_agree(seed):
    m = random_model(seed, V=20, d=6, K=5)
    rng = np.random.default_rng(seed)
    batch, negs = random_batch(rng, m.V, B=6, m=4)
    ids, offsets = pack(batch)
    ns = negative_sums(negs, m.E)
    a = kernels.abae_hinge_grads_nb(m.E, ids, offsets, ns, m.M, m.W, m.b, m.T, 1.0)
    b = kernels.abae_hinge_grads_np(m.E, ids, offsets, ns, m.M, m.W, m.b, m.T, 1.0)
    assert a[0] == pytest.approx(b[0], rel=1e-12)
    for x, y in zip(a[1:], b[1:]):
        assert np.allclose(x, y, atol=1e-12)


def test_count_inversions_agree():
    rng = np.random.default_rng(3)
    for n in (1, 2, 5, 50, 500):
        s = rng.permutation(n).astype(np.int64)
        assert kernels.count_inversions_nb(s) == kernels.count_inversions_np(s)
    assert kernels.count_inversions_np(np.arange(5)[::-1].copy()) == 10
