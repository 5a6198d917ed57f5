"""Skip-gram word embeddings trained with negative sampling."""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from . import kernels
from .numerics import unit_rows

log = logging.getLogger(__name__)


@dataclass
class SgnsConfig:
    dimension: int = 200
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    lr: float = 0.025
    min_lr: float = 0.0001
    power: float = 0.75
    min_count: int = 1
    dynamic_window: bool = True
    seed: int = 0
    chunk_sentences: int = 20000

    def __post_init__(self):
        if self.dimension < 1 or self.window < 1 or self.negatives < 1:
            raise ValueError("dimension, window and negatives must be >= 1")


@dataclass
class EmbeddingTable:
    words: List[str]
    vectors: np.ndarray
    context_vectors: Optional[np.ndarray] = None

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if self.vectors.shape[0] != len(self.words):
            raise ValueError(f"{len(self.words)} words but {self.vectors.shape[0]} vectors")
        if not np.isfinite(self.vectors).all():
            raise ValueError("non-finite embedding entries")
        self._unit = None
        self._index = None

    @property
    def dim(self):
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.words)

    @property
    def unit(self):
        """Row-normalized view used for cosine lookups."""
        if self._unit is None:
            self._unit = unit_rows(self.vectors)
        return self._unit

    def index(self, word):
        if self._index is None:
            self._index = {w: i for i, w in enumerate(self.words)}
        return self._index[word]

    def __getitem__(self, word):
        return self.vectors[self.index(word)]

    def digest(self):
        from .corpus import Vocabulary
        return Vocabulary(list(self.words), [0] * len(self.words)).digest()

    def save(self, path):
        """word2vec text format: ``V d`` header then ``word x1 ... xd``."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(self.words)} {self.dim}\n")
            for w, row in zip(self.words, self.vectors):
                fh.write(w + " " + " ".join(repr(float(x)) for x in row) + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            n, d = (int(t) for t in fh.readline().split())
            words = []
            vecs = np.empty((n, d))
            for i in range(n):
                parts = fh.readline().rstrip("\n").split(" ")
                if len(parts) != d + 1:
                    raise ValueError(f"{path}: line {i + 2} has {len(parts) - 1} values, expected {d}")
                words.append(parts[0])
                vecs[i] = [float(x) for x in parts[1:]]
        return cls(words, vecs)


def generate_training_pairs(sentence: Sequence[int], window: int, rng=None):
    """(center, context) pairs for one sentence.

    With ``rng`` given, each center draws its effective window uniformly
    from ``1..window``; without it the full window is used.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    n = len(sentence)
    pairs = []
    for i in range(n):
        w = int(rng.integers(1, window + 1)) if rng is not None else window
        for j in range(max(0, i - w), min(n, i + w + 1)):
            if j != i:
                pairs.append((sentence[i], sentence[j]))
    return pairs


def negative_sampling_distribution(frequencies, power=0.75):
    f = np.asarray(frequencies, dtype=np.float64)
    if f.size == 0:
        raise ValueError("empty vocabulary")
    if (f < 1).any():
        raise ValueError("frequencies must be >= 1")
    w = f ** power
    return w / w.sum()


def sgns_loss_and_grads(center, context, negatives, W_in, W_out):
    """Loss ``-log s(u_c.v) - sum log s(-u_n.v)`` and its gradients.

    Returns ``(loss, grad_center_row, targets, grad_target_rows)`` where
    ``targets = [context, *negatives]``.
    """
    targets = np.concatenate(([context], np.asarray(negatives, dtype=np.int64)))
    U = W_out[targets]
    v = W_in[center]
    f = U @ v
    loss = float(kernels._softplus_np(-f[0]) + kernels._softplus_np(f[1:]).sum())
    g = kernels._sigmoid_np(f)
    g[0] -= 1.0
    return loss, g @ U, targets, np.outer(g, v)


def sgns_train_step(center, context, negatives, W_in, W_out, lr):
    """One SGD step on a (center, context, negatives) triple; returns the pre-update loss."""
    loss, g_in, targets, g_out = sgns_loss_and_grads(center, context, negatives, W_in, W_out)
    W_in[center] -= lr * g_in
    np.add.at(W_out, targets, -lr * g_out)
    return loss


def _flatten(sentences):
    lens = np.fromiter((len(s) for s in sentences), dtype=np.int64, count=len(sentences))
    offsets = np.zeros(len(sentences) + 1, dtype=np.int64)
    np.cumsum(lens, out=offsets[1:])
    tokens = np.fromiter((t for s in sentences for t in s), dtype=np.int64, count=int(offsets[-1]))
    return tokens, offsets


def _pair_count(offsets, windows):
    n = offsets.size - 1
    lens = np.diff(offsets)
    starts = np.repeat(offsets[:-1], lens)
    ends = np.repeat(offsets[1:], lens)
    pos = np.arange(offsets[-1])
    left = np.minimum(windows, pos - starts)
    right = np.minimum(windows, ends - 1 - pos)
    return int((left + right).sum()) if n else 0


def train_embeddings(sentences: Sequence[Sequence[int]], words: Sequence[str],
                     frequencies: Sequence[int], config: SgnsConfig = SgnsConfig(),
                     history: Optional[list] = None) -> EmbeddingTable:
    """Train SGNS vectors over id-encoded sentences.

    ``words``/``frequencies`` describe the vocabulary the ids refer to.
    Sentence order is shuffled each epoch. Per-epoch mean pair losses are
    appended to ``history`` when given.
    """
    V = len(words)
    if V != len(frequencies):
        raise ValueError("vocabulary/frequency length mismatch")
    if config.min_count > 1:
        rare = set(np.flatnonzero(np.asarray(frequencies) < config.min_count).tolist())
        sentences = [[t for t in s if t not in rare] for s in sentences]
    sentences = [s for s in sentences if len(s) > 0]
    if not sentences:
        raise ValueError("empty corpus")
    if max(max(s) for s in sentences) >= V:
        raise ValueError("token id outside the vocabulary")

    rng = np.random.default_rng(config.seed)
    d = config.dimension
    W_in = (rng.random((V, d)) - 0.5) / d
    W_out = np.zeros((V, d))
    freq = np.maximum(np.asarray(frequencies, dtype=np.float64), 1.0)
    cdf = np.cumsum(negative_sampling_distribution(freq, config.power))
    cdf[-1] = 1.0

    n_tokens = sum(len(s) for s in sentences)
    total_work = config.epochs * n_tokens
    done = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(sentences))
        loss_sum, pairs = 0.0, 0
        for lo in range(0, len(order), config.chunk_sentences):
            chunk = [sentences[i] for i in order[lo:lo + config.chunk_sentences]]
            tokens, offsets = _flatten(chunk)
            if config.dynamic_window:
                windows = rng.integers(1, config.window + 1, size=tokens.size)
            else:
                windows = np.full(tokens.size, config.window, dtype=np.int64)
            n_pairs = _pair_count(offsets, windows)
            negs = np.searchsorted(cdf, rng.random((n_pairs, config.negatives)), side="right")
            negs = np.minimum(negs, V - 1).astype(np.int64)
            progress = (done + np.arange(tokens.size)) / total_work
            lrs = np.maximum(config.lr * (1.0 - progress), config.min_lr)
            l, p = kernels.sgns_epoch(tokens, offsets, windows.astype(np.int64), negs,
                                      lrs, W_in, W_out)
            loss_sum += l
            pairs += p
            done += tokens.size
        mean = loss_sum / max(pairs, 1)
        log.info("sgns epoch %d: %d pairs, mean loss %.5f", epoch + 1, pairs, mean)
        if history is not None:
            history.append(mean)
    return EmbeddingTable(list(words), W_in, W_out)


def nearest_words(table: EmbeddingTable, query, k: int):
    """Top-``k`` (word, cosine) pairs for ``query``, ties broken by word id."""
    q = np.asarray(query, dtype=np.float64)
    nq = np.linalg.norm(q)
    if nq == 0.0:
        raise ValueError("zero-norm query")
    if k > len(table):
        raise ValueError(f"k={k} exceeds vocabulary size {len(table)}")
    cos = np.clip(table.unit @ (q / nq), -1.0, 1.0)
    order = np.lexsort((np.arange(cos.size), -cos))[:k]
    return [(table.words[i], float(cos[i])) for i in order]
