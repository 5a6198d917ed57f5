"""k-means and collapsed-Gibbs LDA baselines."""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import kernels

log = logging.getLogger(__name__)


# -------------------------------------------------------------------- k-means

@dataclass
class KMeansModel:
    centroids: np.ndarray
    inertia_history: List[float] = field(default_factory=list)

    @property
    def k(self):
        return self.centroids.shape[0]

    @property
    def inertia(self):
        return self.inertia_history[-1] if self.inertia_history else float("nan")

    def save(self, path):
        K, d = self.centroids.shape
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{K} {d}\n")
            for row in self.centroids:
                fh.write(" ".join(repr(float(x)) for x in row) + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            K, d = (int(t) for t in fh.readline().split())
            rows = [[float(x) for x in fh.readline().split()] for _ in range(K)]
        c = np.array(rows, dtype=np.float64).reshape(K, d)
        return cls(c)


def _kmeans_pp(points, K, rng):
    n = points.shape[0]
    centers = np.empty((K, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for k in range(1, K):
        total = d2.sum()
        if total == 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers[k] = points[idx]
        d2 = np.minimum(d2, ((points - centers[k]) ** 2).sum(axis=1))
    return centers


def _lloyd(points, centers, max_iters, tol):
    history = []
    for _ in range(max_iters):
        labels, dist2 = kernels.kmeans_assign(points, centers)
        history.append(float(dist2.sum()))
        new = np.empty_like(centers)
        counts = np.bincount(labels, minlength=centers.shape[0])
        for k in range(centers.shape[0]):
            if counts[k] == 0:
                far = int(np.argmax(dist2))
                new[k] = points[far]
                dist2[far] = 0.0
            else:
                new[k] = points[labels == k].mean(axis=0)
        shift = float(np.sqrt(((new - centers) ** 2).sum(axis=1)).max())
        centers = new
        if shift < tol:
            break
    labels, dist2 = kernels.kmeans_assign(points, centers)
    history.append(float(dist2.sum()))
    return centers, history


def kmeans_fit(points, K: int, seed=0, max_iters=300, tol=1e-6, n_init=1) -> KMeansModel:
    """k-means++ seeding followed by Lloyd iterations.

    With ``n_init > 1`` the restart with the lowest final inertia wins.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < K:
        raise ValueError(f"need at least K={K} points, got {points.shape[0]}")
    if K < 1:
        raise ValueError("K must be >= 1")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        centers, history = _lloyd(points, _kmeans_pp(points, K, rng), max_iters, tol)
        if best is None or history[-1] < best.inertia_history[-1]:
            best = KMeansModel(centers, history)
    return best


def kmeans_assign(model: KMeansModel, point):
    """Nearest centroid (lowest id on ties) and Euclidean distance."""
    p = np.asarray(point, dtype=np.float64)
    if p.shape != (model.centroids.shape[1],):
        raise ValueError(f"point has shape {p.shape}, centroids have dimension {model.centroids.shape[1]}")
    labels, dist2 = kernels.kmeans_assign(p[None, :], model.centroids)
    return int(labels[0]), float(np.sqrt(dist2[0]))


def kmeans_predict(model: KMeansModel, points):
    labels, dist2 = kernels.kmeans_assign(np.ascontiguousarray(points, dtype=np.float64),
                                          model.centroids)
    return labels, np.sqrt(dist2)


# ------------------------------------------------------------------------ LDA

def gibbs_conditional(n_dk, n_kw, n_k, alpha, beta, V):
    """Normalized collapsed-Gibbs topic conditional for one token.

    Counts must already exclude the token being resampled.
    """
    w = (np.asarray(n_dk, float) + alpha) * (np.asarray(n_kw, float) + beta) / (np.asarray(n_k, float) + V * beta)
    return w / w.sum()


@dataclass
class LdaModel:
    K: int
    alpha: float
    beta: float
    nkw: np.ndarray                  # K x V topic-word counts
    ndk: Optional[np.ndarray] = None  # D x K doc-topic counts (training docs)
    z: Optional[np.ndarray] = None    # flat topic assignments
    seed: int = 0

    @property
    def V(self):
        return self.nkw.shape[1]

    @property
    def nk(self):
        return self.nkw.sum(axis=1)

    def phi(self):
        p = self.nkw + self.beta
        return p / p.sum(axis=1, keepdims=True)

    def save(self, path):
        """Text format: header line, then one row of topic-word counts per topic."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"lda K={self.K} V={self.V} alpha={self.alpha!r} beta={self.beta!r} seed={self.seed}\n")
            for row in self.nkw:
                fh.write(" ".join(str(int(c)) for c in row) + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            head = dict(kv.split("=") for kv in fh.readline().split()[1:])
            K, V = int(head["K"]), int(head["V"])
            nkw = np.array([[int(x) for x in fh.readline().split()] for _ in range(K)],
                           dtype=np.int64).reshape(K, V)
        return cls(K, float(head["alpha"]), float(head["beta"]), nkw, seed=int(head["seed"]))


def _flatten_docs(documents):
    docs = [np.asarray(d, dtype=np.int64) for d in documents]
    tokens = np.concatenate(docs) if docs else np.empty(0, np.int64)
    doc_of = np.repeat(np.arange(len(docs)), [d.size for d in docs]).astype(np.int64)
    return tokens, doc_of


def lda_fit(documents: Sequence[Sequence[int]], K: int, V: int, alpha=None, beta=None,
            iterations=200, seed=0, callback=None) -> LdaModel:
    """Collapsed Gibbs sampling. Empty documents are dropped.

    ``callback(sweep, model, tokens, doc_of)`` runs after each sweep.
    """
    docs = [d for d in documents if len(d) > 0]
    if not docs:
        raise ValueError("all documents are empty")
    alpha = 1.0 / K if alpha is None else float(alpha)
    beta = 1.0 / K if beta is None else float(beta)
    tokens, doc_of = _flatten_docs(docs)
    if tokens.max() >= V or tokens.min() < 0:
        raise ValueError("token id outside the vocabulary")
    rng = np.random.default_rng(seed)
    z = rng.integers(0, K, size=tokens.size).astype(np.int64)
    ndk = np.zeros((len(docs), K), dtype=np.int64)
    nkw = np.zeros((K, V), dtype=np.int64)
    np.add.at(ndk, (doc_of, z), 1)
    np.add.at(nkw, (z, tokens), 1)
    nk = nkw.sum(axis=1)
    model = LdaModel(K, alpha, beta, nkw, ndk, z, seed)
    for sweep in range(iterations):
        kernels.gibbs_sweep(tokens, doc_of, z, ndk, nkw, nk, alpha, beta,
                            rng.random(tokens.size), True)
        if callback is not None:
            callback(sweep, model, tokens, doc_of)
    return model


def lda_infer(sentence: Sequence[int], model: LdaModel, iterations=50, seed=0):
    """Held-out Gibbs with frozen topic-word counts.

    Returns smoothed doc-topic proportions averaged over the second half of
    the sweeps. Token ids outside the model vocabulary are ignored.
    """
    toks = np.asarray([t for t in sentence if 0 <= t < model.V], dtype=np.int64)
    if toks.size == 0:
        raise ValueError("no observed tokens")
    rng = np.random.default_rng(seed)
    K = model.K
    z = rng.integers(0, K, size=toks.size).astype(np.int64)
    ndk = np.zeros((1, K), dtype=np.int64)
    np.add.at(ndk[0], z, 1)
    nkw = np.ascontiguousarray(model.nkw, dtype=np.int64)
    nk = nkw.sum(axis=1)
    doc_of = np.zeros(toks.size, dtype=np.int64)
    acc = np.zeros(K)
    kept = 0
    burn = iterations // 2
    for it in range(iterations):
        kernels.gibbs_sweep(toks, doc_of, z, ndk, nkw, nk, model.alpha, model.beta,
                            rng.random(toks.size), False)
        if it >= burn:
            acc += (ndk[0] + model.alpha) / (toks.size + K * model.alpha)
            kept += 1
    theta = acc / max(kept, 1)
    return theta / theta.sum()


def lda_top_words(model: LdaModel, topic: int, n: int):
    """Word ids of the ``n`` highest-probability words (ties: lower id first)."""
    phi = model.phi()[topic]
    return np.lexsort((np.arange(phi.size), -phi))[:n].tolist()
