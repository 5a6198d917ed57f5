"""Attention-based aspect extraction (ABAE).

A sentence is encoded as an attention-weighted sum of frozen word
embeddings ``z``; a softmax classifier turns ``z`` into aspect weights
``p``; ``r = T^T p`` reconstructs the sentence from aspect embeddings.
Training minimizes a cosine max-margin loss against sampled negative
sentences plus an orthogonality penalty on the normalized rows of ``T``.
Gradients are derived by hand (see ``kernels.abae_hinge_grads_*``).
"""
import logging
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import kernels
from .numerics import AdamState, adam_step, cosine_similarity, softmax, unit_rows

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"ABAECKPT"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<8sIIII64s")


@dataclass
class AbaeConfig:
    n_aspects: int = 30
    batch_size: int = 50
    negatives: int = 20
    ortho_weight: float = 0.1
    lr: float = 0.001
    epochs: int = 15
    seed: int = 0
    margin: float = 1.0
    attention_noise: float = 0.01
    init_scale: float = 0.05
    normalize_embeddings: bool = True

    def __post_init__(self):
        if self.n_aspects < 2:
            raise ValueError("n_aspects must be >= 2")
        if self.negatives < 1:
            raise ValueError("negatives must be >= 1")
        if self.ortho_weight < 0:
            raise ValueError("ortho_weight must be >= 0")


@dataclass
class AbaeModel:
    E: np.ndarray   # V x d, frozen
    M: np.ndarray   # d x d
    W: np.ndarray   # K x d
    b: np.ndarray   # K
    T: np.ndarray   # K x d
    vocab_digest: str = ""

    def __post_init__(self):
        V, d = self.E.shape
        K = self.T.shape[0]
        if self.M.shape != (d, d) or self.W.shape != (K, d) or self.b.shape != (K,) \
                or self.T.shape != (K, d):
            raise ValueError("inconsistent ABAE parameter shapes")

    @property
    def K(self):
        return self.T.shape[0]

    @property
    def d(self):
        return self.E.shape[1]

    @property
    def V(self):
        return self.E.shape[0]

    def params(self) -> Dict[str, np.ndarray]:
        return {"M": self.M, "W": self.W, "b": self.b, "T": self.T}


def init_model(E, centroids, config: AbaeConfig, vocab_digest="") -> AbaeModel:
    """Aspect rows from k-means centroids, M near identity, small uniform W and b."""
    centroids = np.asarray(centroids, dtype=np.float64)
    if centroids.shape[0] != config.n_aspects:
        raise ValueError(f"{centroids.shape[0]} centroids for K={config.n_aspects} aspects")
    E = np.asarray(E, dtype=np.float64)
    if config.normalize_embeddings:
        E = unit_rows(E)
    E = np.ascontiguousarray(E)
    d = E.shape[1]
    if centroids.shape[1] != d:
        raise ValueError("centroid dimension differs from embedding dimension")
    rng = np.random.default_rng(config.seed)
    s = config.init_scale
    return AbaeModel(
        E=E,
        M=np.eye(d) + config.attention_noise * rng.standard_normal((d, d)),
        W=rng.uniform(-s, s, size=(config.n_aspects, d)),
        b=rng.uniform(-s, s, size=config.n_aspects),
        T=centroids.copy(),
        vocab_digest=vocab_digest,
    )


# ------------------------------------------------------------------- forward

def _ids(sentence):
    ids = np.asarray(sentence, dtype=np.int64)
    if ids.size == 0:
        raise ValueError("empty sentence")
    return ids


def attention_weights(sentence, model: AbaeModel):
    X = model.E[_ids(sentence)]
    y = X.sum(axis=0)
    return softmax(X @ (model.M @ y))


def sentence_embedding(sentence, model: AbaeModel):
    X = model.E[_ids(sentence)]
    return attention_weights(sentence, model) @ X


def bow_embedding(sentence, E):
    """Uniformly weighted (summed) bag-of-words embedding."""
    return np.asarray(E)[_ids(sentence)].sum(axis=0)


def aspect_probabilities(z, model: AbaeModel):
    return softmax(model.W @ np.asarray(z, dtype=np.float64) + model.b)


def reconstruct(p, model: AbaeModel):
    return np.asarray(p, dtype=np.float64) @ model.T


def infer_sentence(sentence, model: AbaeModel):
    """(aspect distribution, attention-weighted sentence embedding)."""
    z = sentence_embedding(sentence, model)
    return aspect_probabilities(z, model), z


def infer_batch(sentences: Sequence[Sequence[int]], model: AbaeModel, chunk=512):
    """Vectorized ``infer_sentence`` over many sentences -> (P, Z)."""
    n = len(sentences)
    P = np.empty((n, model.K))
    Z = np.empty((n, model.d))
    for lo in range(0, n, chunk):
        block = [_ids(s) for s in sentences[lo:lo + chunk]]
        lengths = np.array([b.size for b in block])
        L = int(lengths.max())
        mask = np.arange(L)[None, :] < lengths[:, None]
        pad = np.zeros((len(block), L), dtype=np.int64)
        pad[mask] = np.concatenate(block)
        X = model.E[pad] * mask[..., None]
        y = X.sum(axis=1)
        logits = np.where(mask, np.einsum("bld,bd->bl", X, y @ model.M.T), -np.inf)
        a = softmax(logits, axis=1)
        z = np.einsum("bl,bld->bd", a, X)
        Z[lo:lo + len(block)] = z
        P[lo:lo + len(block)] = softmax(z @ model.W.T + model.b, axis=1)
    return P, Z


# --------------------------------------------------------------- objective

def hinge_loss(sentence, negatives, model: AbaeModel, margin=1.0):
    """Sum over negatives of ``max(0, margin - cos(r, z) + cos(r, z_n))``.

    Negatives are encoded as summed bag-of-words embeddings.
    """
    p, z = infer_sentence(sentence, model)
    r = reconstruct(p, model)
    c1 = cosine_similarity(r, z)
    return float(sum(max(0.0, margin - c1 + cosine_similarity(r, bow_embedding(n, model.E)))
                     for n in negatives))


def orthogonality_penalty(T):
    """Frobenius norm of ``Tn Tn^T - I`` with ``Tn`` the row-normalized ``T``."""
    T = np.asarray(T, dtype=np.float64)
    norms = np.linalg.norm(T, axis=1)
    if (norms == 0).any():
        raise ValueError("zero row in aspect matrix")
    Tn = T / norms[:, None]
    return float(np.linalg.norm(Tn @ Tn.T - np.eye(T.shape[0])))


def orthogonality_penalty_grad(T):
    T = np.asarray(T, dtype=np.float64)
    norms = np.linalg.norm(T, axis=1)
    if (norms == 0).any():
        raise ValueError("zero row in aspect matrix")
    Tn = T / norms[:, None]
    R = Tn @ Tn.T - np.eye(T.shape[0])
    P = float(np.linalg.norm(R))
    if P == 0.0:
        return P, np.zeros_like(T)
    g = 2.0 * (R @ Tn) / P
    g = (g - Tn * (Tn * g).sum(axis=1, keepdims=True)) / norms[:, None]
    return P, g


def pack(sentences):
    """Flat token ids and offsets for a list of sentences."""
    arrs = [_ids(s) for s in sentences]
    offsets = np.zeros(len(arrs) + 1, dtype=np.int64)
    np.cumsum([a.size for a in arrs], out=offsets[1:])
    return np.concatenate(arrs), offsets


def negative_sums(negatives, E):
    """(B, m, d) summed embeddings for a B x m nested list of sentences."""
    return np.ascontiguousarray(
        np.array([[bow_embedding(s, E) for s in row] for row in negatives], dtype=np.float64))


def backward(batch, neg_sums, model: AbaeModel, ortho_weight=0.1, margin=1.0):
    """Objective and gradients for one batch.

    Objective = mean over the batch of the summed hinge terms
    + ``ortho_weight * orthogonality_penalty(T)``. ``neg_sums`` is the
    (B, m, d) array from ``negative_sums``. ``E`` gets no gradient.
    """
    ids, offsets = pack(batch)
    neg_sums = np.ascontiguousarray(neg_sums, dtype=np.float64)
    B = offsets.size - 1
    if neg_sums.ndim != 3 or neg_sums.shape[0] != B or neg_sums.shape[2] != model.d:
        raise ValueError(f"negatives must have shape ({B}, m, {model.d}), got {neg_sums.shape}")
    hinge, dM, dW, db, dT = kernels.abae_hinge_grads(
        model.E, ids, offsets, neg_sums, model.M, model.W, model.b, model.T, float(margin))
    grads = {"M": dM / B, "W": dW / B, "b": db / B, "T": dT / B}
    loss = hinge / B
    if ortho_weight:
        pen, gT = orthogonality_penalty_grad(model.T)
        loss += ortho_weight * pen
        grads["T"] = grads["T"] + ortho_weight * gT
    return float(loss), grads


def objective(batch, neg_sums, model: AbaeModel, ortho_weight=0.1, margin=1.0):
    """Reference objective built from the per-sentence forward functions."""
    total = 0.0
    for s, negs in zip(batch, neg_sums):
        p, z = infer_sentence(s, model)
        r = reconstruct(p, model)
        c1 = cosine_similarity(r, z)
        total += sum(max(0.0, margin - c1 + cosine_similarity(r, zn)) for zn in negs)
    loss = total / len(batch)
    if ortho_weight:
        loss += ortho_weight * orthogonality_penalty(model.T)
    return loss


# ------------------------------------------------------------------ training

def train_abae(sentences: Sequence[Sequence[int]], E, config: AbaeConfig, init_centroids,
               vocab_digest="", history: Optional[List[float]] = None) -> AbaeModel:
    """Adam on shuffled mini-batches; negatives drawn uniformly with replacement
    from the training pool for every batch. Per-epoch mean objectives go to
    ``history``."""
    model = init_model(E, init_centroids, config, vocab_digest)
    pool = [np.asarray(s, dtype=np.int64) for s in sentences if len(s) > 0]
    if not pool:
        raise ValueError("empty corpus")
    if max(int(s.max()) for s in pool) >= model.V:
        raise ValueError("token id outside the embedding table")
    sums = np.array([model.E[s].sum(axis=0) for s in pool])
    keep = np.linalg.norm(sums, axis=1) > 0
    if not keep.all():
        pool = [s for s, k in zip(pool, keep) if k]
        sums = sums[keep]
    rng = np.random.default_rng(config.seed + 1)
    state = AdamState(lr=config.lr)
    params = model.params()
    N = len(pool)
    for epoch in range(config.epochs):
        order = rng.permutation(N)
        losses = []
        for lo in range(0, N, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            neg_idx = rng.integers(0, N, size=(idx.size, config.negatives))
            loss, grads = backward([pool[i] for i in idx], sums[neg_idx], model,
                                   config.ortho_weight, config.margin)
            adam_step(params, grads, state)
            losses.append(loss)
        mean = float(np.mean(losses))
        log.info("abae epoch %d: mean objective %.5f", epoch + 1, mean)
        if history is not None:
            history.append(mean)
    return model


# ---------------------------------------------------------------- checkpoint

def save_checkpoint(model: AbaeModel, path):
    """Little-endian header ``magic, version, K, d, V, vocab sha256 (hex)``
    followed by M, W, b, T as float32 arrays in row-major order."""
    digest = (model.vocab_digest or "").encode("ascii").ljust(64, b"\0")[:64]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, model.K, model.d, model.V, digest))
        for arr in (model.M, model.W, model.b, model.T):
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path, E, vocab_digest, normalize_embeddings=True) -> AbaeModel:
    """Load parameters and bind them to embeddings ``E``.

    ``vocab_digest`` must match the digest stored in the checkpoint.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, K, d, V, digest = _HEADER.unpack_from(raw)
    if magic != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not an ABAE checkpoint")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    digest = digest.rstrip(b"\0").decode("ascii")
    if digest != vocab_digest:
        raise ValueError("vocabulary hash mismatch between checkpoint and embedding table")
    E = np.asarray(E, dtype=np.float64)
    if E.shape != (V, d):
        raise ValueError(f"embedding table is {E.shape}, checkpoint expects {(V, d)}")
    if normalize_embeddings:
        E = unit_rows(E)
    pos = _HEADER.size
    out = []
    for shape in ((d, d), (K, d), (K,), (K, d)):
        n = int(np.prod(shape))
        out.append(np.frombuffer(raw, dtype="<f4", count=n, offset=pos).astype(np.float64).reshape(shape))
        pos += 4 * n
    if pos != len(raw):
        raise ValueError(f"{path}: trailing bytes in checkpoint")
    M, W, b, T = out
    return AbaeModel(np.ascontiguousarray(E), M, W, b, T, digest)
