"""Per-method sentence encoders behind one interface.

Each bundle turns id-encoded sentences into an aspect distribution and a
per-label retrieval score, so summarization and profiling do not care
which model produced them.
"""
import zlib

import numpy as np

from .abae import AbaeModel, infer_batch
from .aspects import AspectLabeling, merged_aspect_embedding
from .baselines import KMeansModel, LdaModel, lda_infer
from .numerics import softmax, unit_rows


def _sentence_seed(base, ids):
    return (base * 1_000_003 + zlib.crc32(np.asarray(ids, dtype=np.int64).tobytes())) % (2 ** 32)


class AbaeBundle:
    """Scores are cosine between ``z_s`` and the (merged) aspect embedding."""
    method = "abae"

    def __init__(self, model: AbaeModel, labeling: AspectLabeling = None):
        self.model = model
        self.labeling = labeling

    @property
    def K(self):
        return self.model.K

    def distributions(self, sentences):
        return infer_batch(sentences, self.model)[0]

    def scores(self, sentences, label):
        _, Z = infer_batch(sentences, self.model)
        rep = merged_aspect_embedding(self.labeling, label, self.model.T)
        return unit_rows(Z) @ (rep / np.linalg.norm(rep))


class KMeansBundle:
    """Sentences are the mean of unit word vectors; scores are negative
    Euclidean distance to the (merged) centroid; distributions are a
    softmax over cosine similarity to every centroid."""
    method = "kmeans"

    def __init__(self, model: KMeansModel, E, labeling: AspectLabeling = None):
        self.model = model
        self.E = unit_rows(E)
        self.labeling = labeling

    @property
    def K(self):
        return self.model.k

    def bow(self, sentences):
        return np.array([self.E[np.asarray(s, dtype=np.int64)].mean(axis=0) for s in sentences])

    def distributions(self, sentences):
        return softmax(unit_rows(self.bow(sentences)) @ unit_rows(self.model.centroids).T, axis=1)

    def scores(self, sentences, label):
        rep = merged_aspect_embedding(self.labeling, label, self.model.centroids)
        return -np.linalg.norm(self.bow(sentences) - rep, axis=1)


class LdaBundle:
    """Scores are the inferred posterior mass on the label's topics."""
    method = "lda"

    def __init__(self, model: LdaModel, labeling: AspectLabeling = None, iterations=50, seed=0):
        self.model = model
        self.labeling = labeling
        self.iterations = iterations
        self.seed = seed

    @property
    def K(self):
        return self.model.K

    def distributions(self, sentences):
        return np.array([lda_infer(s, self.model, self.iterations, _sentence_seed(self.seed, s))
                         for s in sentences])

    def scores(self, sentences, label):
        ks = self.labeling.clusters(label)
        if not ks:
            raise ValueError(f"no cluster is labeled {label!r}")
        return self.distributions(sentences)[:, ks].sum(axis=1)
