"""Hot inner loops, each with a numba and a pure-numpy implementation.

The public names at the bottom dispatch on ``_accel.USE_NUMBA``, except
``abae_hinge_grads`` which always uses the faster numpy version. Both
variants are importable (``*_nb`` / ``*_np``) so tests and the benchmark
can compare them directly. Every kernel is deterministic: random draws are
made by the caller and passed in.
"""
import math

import numpy as np

from ._accel import njit, select


# ------------------------------------------------------------------ helpers

@njit
def _sigmoid(f):
    if f >= 0.0:
        return 1.0 / (1.0 + math.exp(-f))
    e = math.exp(f)
    return e / (1.0 + e)


@njit
def _softplus(x):
    return max(x, 0.0) + math.log1p(math.exp(-abs(x)))


def _sigmoid_np(f):
    return np.where(f >= 0, 1.0 / (1.0 + np.exp(-np.abs(f))),
                    np.exp(-np.abs(f)) / (1.0 + np.exp(-np.abs(f))))


def _softplus_np(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


# ---------------------------------------------------------------------- SGNS

@njit
def sgns_epoch_nb(tokens, offsets, windows, negs, lrs, W_in, W_out):
    d = W_in.shape[1]
    m = negs.shape[1]
    grad = np.zeros(d)
    scores = np.empty(m + 1)
    coef = np.empty(m + 1)
    targets = np.empty(m + 1, dtype=np.int64)
    loss = 0.0
    p = 0
    for s in range(offsets.size - 1):
        lo = offsets[s]
        hi = offsets[s + 1]
        for i in range(lo, hi):
            w = windows[i]
            c = tokens[i]
            lr = lrs[i]
            for j in range(max(lo, i - w), min(hi, i + w + 1)):
                if j == i:
                    continue
                ctx = tokens[j]
                targets[0] = ctx
                cnt = 1
                for q in range(m):
                    if negs[p, q] != ctx:
                        targets[cnt] = negs[p, q]
                        cnt += 1
                for q in range(cnt):
                    f = 0.0
                    for k in range(d):
                        f += W_out[targets[q], k] * W_in[c, k]
                    scores[q] = f
                for q in range(cnt):
                    if q == 0:
                        loss += _softplus(-scores[q])
                        coef[q] = _sigmoid(scores[q]) - 1.0
                    else:
                        loss += _softplus(scores[q])
                        coef[q] = _sigmoid(scores[q])
                for k in range(d):
                    grad[k] = 0.0
                for q in range(cnt):
                    t = targets[q]
                    for k in range(d):
                        grad[k] += coef[q] * W_out[t, k]
                for q in range(cnt):
                    t = targets[q]
                    g = lr * coef[q]
                    for k in range(d):
                        W_out[t, k] -= g * W_in[c, k]
                for k in range(d):
                    W_in[c, k] -= lr * grad[k]
                p += 1
    return loss, p


def sgns_epoch_np(tokens, offsets, windows, negs, lrs, W_in, W_out):
    loss = 0.0
    p = 0
    for s in range(offsets.size - 1):
        lo, hi = offsets[s], offsets[s + 1]
        for i in range(lo, hi):
            w, c, lr = windows[i], tokens[i], lrs[i]
            for j in range(max(lo, i - w), min(hi, i + w + 1)):
                if j == i:
                    continue
                ctx = tokens[j]
                row = negs[p]
                tg = np.concatenate(([ctx], row[row != ctx]))
                U = W_out[tg]
                v = W_in[c].copy()
                f = U @ v
                loss += float(_softplus_np(-f[0]) + _softplus_np(f[1:]).sum())
                g = _sigmoid_np(f)
                g[0] -= 1.0
                W_in[c] -= lr * (g @ U)
                np.add.at(W_out, tg, -lr * np.outer(g, v))
                p += 1
    return loss, p


# ----------------------------------------------------------------- LDA Gibbs

@njit
def gibbs_sweep_nb(tokens, doc_of, z, ndk, nkw, nk, alpha, beta, uniforms, update_topics):
    K = ndk.shape[1]
    vb = nkw.shape[1] * beta
    cum = np.empty(K)
    for t in range(tokens.size):
        w = tokens[t]
        dd = doc_of[t]
        k = z[t]
        ndk[dd, k] -= 1
        if update_topics:
            nkw[k, w] -= 1
            nk[k] -= 1
        total = 0.0
        for j in range(K):
            total += (ndk[dd, j] + alpha) * (nkw[j, w] + beta) / (nk[j] + vb)
            cum[j] = total
        u = uniforms[t] * total
        k = K - 1
        for j in range(K):
            if u < cum[j]:
                k = j
                break
        z[t] = k
        ndk[dd, k] += 1
        if update_topics:
            nkw[k, w] += 1
            nk[k] += 1


def gibbs_sweep_np(tokens, doc_of, z, ndk, nkw, nk, alpha, beta, uniforms, update_topics):
    K = ndk.shape[1]
    vb = nkw.shape[1] * beta
    for t in range(tokens.size):
        w, dd, k = tokens[t], doc_of[t], z[t]
        ndk[dd, k] -= 1
        if update_topics:
            nkw[k, w] -= 1
            nk[k] -= 1
        cum = np.cumsum((ndk[dd] + alpha) * (nkw[:, w] + beta) / (nk + vb))
        k = min(int(np.searchsorted(cum, uniforms[t] * cum[-1], side="right")), K - 1)
        z[t] = k
        ndk[dd, k] += 1
        if update_topics:
            nkw[k, w] += 1
            nk[k] += 1


# ------------------------------------------------------------------- k-means

@njit
def kmeans_assign_nb(points, centroids):
    n, d = points.shape
    K = centroids.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dist2 = np.empty(n)
    for i in range(n):
        best = np.inf
        arg = 0
        for k in range(K):
            s = 0.0
            for j in range(d):
                diff = points[i, j] - centroids[k, j]
                s += diff * diff
            if s < best:
                best = s
                arg = k
        labels[i] = arg
        dist2[i] = best
    return labels, dist2


def kmeans_assign_np(points, centroids, chunk=4096):
    n = points.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dist2 = np.empty(n)
    for lo in range(0, n, chunk):
        diff = points[lo:lo + chunk, None, :] - centroids[None, :, :]
        d2 = np.einsum("nkd,nkd->nk", diff, diff)
        labels[lo:lo + chunk] = np.argmin(d2, axis=1)
        dist2[lo:lo + chunk] = d2[np.arange(d2.shape[0]), labels[lo:lo + chunk]]
    return labels, dist2


# ---------------------------------------------------------------------- ABAE

@njit
def abae_hinge_grads_nb(E, ids, offsets, neg_sums, M, W, b, T, margin):
    K, d = T.shape
    B = offsets.size - 1
    m = neg_sums.shape[1]
    dM = np.zeros((d, d))
    dW = np.zeros((K, d))
    db = np.zeros(K)
    dT = np.zeros((K, d))
    total = 0.0
    for s in range(B):
        lo = offsets[s]
        hi = offsets[s + 1]
        X = E[ids[lo:hi]]
        y = X.sum(axis=0)
        l = X @ (M @ y)
        a = np.exp(l - l.max())
        a /= a.sum()
        z = a @ X
        u = W @ z + b
        p = np.exp(u - u.max())
        p /= p.sum()
        r = p @ T
        nr = np.sqrt(r @ r)
        nz = np.sqrt(z @ z)
        if nr == 0.0 or nz == 0.0:
            raise ValueError("zero-norm input")
        c1 = (r @ z) / (nr * nz)
        g_r = np.zeros(d)
        n_active = 0
        for j in range(m):
            zn = neg_sums[s, j]
            nn = np.sqrt(zn @ zn)
            if nn == 0.0:
                raise ValueError("zero-norm input")
            c2 = (r @ zn) / (nr * nn)
            h = margin - c1 + c2
            if h > 0.0:
                total += h
                n_active += 1
                g_r += zn / (nr * nn) - c2 * r / (nr * nr)
        if n_active == 0:
            continue
        g_r -= n_active * (z / (nr * nz) - c1 * r / (nr * nr))
        g_z = -n_active * (r / (nr * nz) - c1 * z / (nz * nz))
        dT += np.outer(p, g_r)
        g_p = T @ g_r
        g_u = p * (g_p - p @ g_p)
        dW += np.outer(g_u, z)
        db += g_u
        g_z += g_u @ W
        g_a = X @ g_z
        g_l = a * (g_a - a @ g_a)
        dM += np.outer(g_l @ X, y)
    return total, dM, dW, db, dT


def abae_hinge_grads_np(E, ids, offsets, neg_sums, M, W, b, T, margin):
    lengths = np.diff(offsets)
    B = lengths.size
    L = int(lengths.max())
    mask = np.arange(L)[None, :] < lengths[:, None]
    pad = np.zeros((B, L), dtype=np.int64)
    pad[mask] = ids
    X = E[pad] * mask[..., None]
    y = X.sum(axis=1)
    l = np.einsum("bld,bd->bl", X, y @ M.T)
    l = np.where(mask, l, -np.inf)
    a = np.exp(l - l.max(axis=1, keepdims=True))
    a /= a.sum(axis=1, keepdims=True)
    z = np.einsum("bl,bld->bd", a, X)
    u = z @ W.T + b
    p = np.exp(u - u.max(axis=1, keepdims=True))
    p /= p.sum(axis=1, keepdims=True)
    r = p @ T
    nr = np.linalg.norm(r, axis=1)
    nz = np.linalg.norm(z, axis=1)
    nn = np.linalg.norm(neg_sums, axis=2)
    if (nr == 0).any() or (nz == 0).any() or (nn == 0).any():
        raise ValueError("zero-norm input")
    c1 = np.einsum("bd,bd->b", r, z) / (nr * nz)
    c2 = np.einsum("bd,bmd->bm", r, neg_sums) / (nr[:, None] * nn)
    h = margin - c1[:, None] + c2
    act = h > 0
    total = float(h[act].sum())
    na = act.sum(axis=1).astype(np.float64)
    rr = r / (nr * nr)[:, None]
    g_r = (np.einsum("bm,bmd->bd", act / (nr[:, None] * nn), neg_sums)
           - (act * c2).sum(axis=1)[:, None] * rr)
    g_r -= na[:, None] * (z / (nr * nz)[:, None] - c1[:, None] * rr)
    g_z = -na[:, None] * (r / (nr * nz)[:, None] - c1[:, None] * z / (nz * nz)[:, None])
    dT = p.T @ g_r
    g_p = g_r @ T.T
    g_u = p * (g_p - (p * g_p).sum(axis=1, keepdims=True))
    dW = g_u.T @ z
    db = g_u.sum(axis=0)
    g_z += g_u @ W
    g_a = np.einsum("bld,bd->bl", X, g_z)
    g_l = a * (g_a - (a * g_a).sum(axis=1, keepdims=True))
    dM = np.einsum("bl,bld->bd", g_l, X).T @ y
    return total, dM, dW, db, dT


# -------------------------------------------------------------- inversions

@njit
def count_inversions_nb(seq):
    n = seq.size
    a = seq.copy()
    buf = np.empty_like(a)
    inv = 0
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i = lo
            j = mid
            k = lo
            while i < mid and j < hi:
                if a[i] <= a[j]:
                    buf[k] = a[i]
                    i += 1
                else:
                    buf[k] = a[j]
                    inv += mid - i
                    j += 1
                k += 1
            while i < mid:
                buf[k] = a[i]
                i += 1
                k += 1
            while j < hi:
                buf[k] = a[j]
                j += 1
                k += 1
        a, buf = buf, a
        width *= 2
    return inv


def count_inversions_np(seq, chunk=2048):
    seq = np.asarray(seq)
    inv = 0
    for lo in range(0, seq.size, chunk):
        block = seq[lo:lo + chunk]
        idx = np.arange(lo, lo + block.size)
        later = np.arange(seq.size)[None, :] > idx[:, None]
        inv += int(np.count_nonzero(later & (seq[None, :] < block[:, None])))
    return inv


sgns_epoch = select(sgns_epoch_nb, sgns_epoch_np)
gibbs_sweep = select(gibbs_sweep_nb, gibbs_sweep_np)
kmeans_assign = select(kmeans_assign_nb, kmeans_assign_np)
# the batched numpy version is faster than the per-sentence numba loop at
# every batch size and dimension we measured (benchmarks/bench_kernels.py)
abae_hinge_grads = abae_hinge_grads_np
count_inversions = select(count_inversions_nb, count_inversions_np)
