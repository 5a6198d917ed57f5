"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 3] [--scale 1.0]

Numba timings exclude the first (compiling) call.
"""
import argparse
import time

import numpy as np

from abae_reviews import kernels
from abae_reviews.abae import negative_sums, pack


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(scale, rng):
    V, d = 2000, 100
    n_sent = int(2000 * scale)
    sents = [rng.integers(0, V, size=rng.integers(3, 15)) for _ in range(n_sent)]
    tokens = np.concatenate(sents).astype(np.int64)
    offsets = np.zeros(n_sent + 1, dtype=np.int64)
    np.cumsum([s.size for s in sents], out=offsets[1:])
    windows = rng.integers(1, 6, size=tokens.size).astype(np.int64)
    n_pairs = 0
    for lo, hi in zip(offsets[:-1], offsets[1:]):
        for i in range(lo, hi):
            n_pairs += min(hi, i + windows[i] + 1) - max(lo, i - windows[i]) - 1
    negs = rng.integers(0, V, size=(n_pairs, 5)).astype(np.int64)
    lrs = np.full(tokens.size, 0.025)
    W0 = (rng.random((V, d)) - 0.5) / d

    def sgns(fn):
        return lambda: fn(tokens, offsets, windows, negs, lrs, W0.copy(), np.zeros((V, d)))

    K = 30
    doc_of = np.repeat(np.arange(n_sent), np.diff(offsets)).astype(np.int64)
    z0 = rng.integers(0, K, size=tokens.size).astype(np.int64)
    u = rng.random(tokens.size)

    def gibbs(fn):
        def run():
            z = z0.copy()
            ndk = np.zeros((n_sent, K), dtype=np.int64)
            nkw = np.zeros((K, V), dtype=np.int64)
            np.add.at(ndk, (doc_of, z), 1)
            np.add.at(nkw, (z, tokens), 1)
            fn(tokens, doc_of, z, ndk, nkw, nkw.sum(axis=1), 1 / K, 1 / K, u, True)
        return run

    pts = rng.normal(size=(V, d))
    cents = rng.normal(size=(K, d))

    def assign(fn):
        return lambda: fn(pts, cents)

    E = rng.normal(size=(V, d))
    E /= np.linalg.norm(E, axis=1, keepdims=True)
    batch = [s.tolist() for s in sents[:50]]
    ids, boff = pack(batch)
    ns = negative_sums([[sents[j].tolist() for j in rng.integers(0, n_sent, 20)] for _ in batch], E)
    M, W, b, T = np.eye(d), 0.05 * rng.normal(size=(K, d)), np.zeros(K), rng.normal(size=(K, d))

    def hinge(fn):
        return lambda: fn(E, ids, boff, ns, M, W, b, T, 1.0)

    perm = rng.permutation(int(20000 * scale)).astype(np.int64)

    def inv(fn):
        return lambda: fn(perm)

    return {
        "sgns_epoch": (sgns, kernels.sgns_epoch_nb, kernels.sgns_epoch_np),
        "gibbs_sweep": (gibbs, kernels.gibbs_sweep_nb, kernels.gibbs_sweep_np),
        "kmeans_assign": (assign, kernels.kmeans_assign_nb, kernels.kmeans_assign_np),
        "abae_hinge_grads": (hinge, kernels.abae_hinge_grads_nb, kernels.abae_hinge_grads_np),
        "count_inversions": (inv, kernels.count_inversions_nb, kernels.count_inversions_np),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scale", type=float, default=1.0)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18} {'numba s':>10} {'numpy s':>10} {'speedup':>8}")
    for name, (make, nb, npf) in cases(args.scale, rng).items():
        make(nb)()  # compile / load cache
        t_nb = _best(make(nb), args.repeat)
        t_np = _best(make(npf), args.repeat)
        print(f"{name:<18} {t_nb:>10.4f} {t_np:>10.4f} {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
