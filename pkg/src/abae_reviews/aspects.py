"""Aspect labeling, top words, coherence and soft-count prevalence."""
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np
from scipy import sparse

from .numerics import softmax, unit_rows

LABELS = ("location", "cleanliness", "communication", "other")
METHODS = ("abae", "kmeans", "lda")


@dataclass
class AspectLabeling:
    mapping: Dict[int, str]
    method: str = "abae"

    def __post_init__(self):
        bad = {l for l in self.mapping.values() if l not in LABELS}
        if bad:
            raise ValueError(f"unknown aspect label(s): {sorted(bad)}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    def clusters(self, label) -> List[int]:
        return sorted(k for k, l in self.mapping.items() if l == label)

    def check_total(self, n_clusters):
        missing = sorted(set(range(n_clusters)) - set(self.mapping))
        if missing:
            raise ValueError(f"clusters without a label: {missing}")

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for k in sorted(self.mapping):
                fh.write(f"{k}\t{self.mapping[k]}\n")

    @classmethod
    def load(cls, path, method="abae"):
        mapping = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                k, label = line.split("\t")
                mapping[int(k)] = label.strip()
        return cls(mapping, method)


def top_words_by_cosine(point, unit_vectors, n):
    """Ids of the ``n`` words closest to ``point`` in cosine (ties: lower id)."""
    if n > unit_vectors.shape[0]:
        raise ValueError(f"n={n} exceeds vocabulary size {unit_vectors.shape[0]}")
    q = np.asarray(point, dtype=np.float64)
    nq = np.linalg.norm(q)
    if nq == 0:
        raise ValueError("zero-norm aspect point")
    cos = unit_vectors @ (q / nq)
    return np.lexsort((np.arange(cos.size), -cos))[:n].tolist()


def top_words(method, model, aspect, n, embeddings=None):
    """Top-``n`` word ids for one aspect of an ABAE, k-means or LDA model.

    ABAE and k-means rank words by cosine to the aspect row / centroid
    (``embeddings`` is the V x d word matrix); LDA ranks by topic-word
    probability.
    """
    if method == "lda":
        from .baselines import lda_top_words
        if n > model.V:
            raise ValueError(f"n={n} exceeds vocabulary size {model.V}")
        return lda_top_words(model, aspect, n)
    point = model.T[aspect] if method == "abae" else model.centroids[aspect]
    return top_words_by_cosine(point, unit_rows(embeddings), n)


class DocumentIndex:
    """Binary document-term incidence for document and co-document counts."""

    def __init__(self, documents: Sequence[Sequence[int]], V=None):
        rows, cols = [], []
        for i, doc in enumerate(documents):
            u = np.unique(np.asarray(doc, dtype=np.int64))
            rows.append(np.full(u.size, i))
            cols.append(u)
        rows = np.concatenate(rows) if rows else np.empty(0, np.int64)
        cols = np.concatenate(cols) if cols else np.empty(0, np.int64)
        V = V if V is not None else (int(cols.max()) + 1 if cols.size else 0)
        self.matrix = sparse.csc_matrix((np.ones(rows.size, dtype=np.int64), (rows, cols)),
                                        shape=(len(documents), V))

    def doc_freq(self, words):
        return np.asarray(self.matrix[:, words].sum(axis=0)).ravel()

    def co_doc_freq(self, words):
        sub = self.matrix[:, words]
        return (sub.T @ sub).toarray()


def coherence_score(top_words: Sequence[int], documents, words=None):
    """Sum over m>1, l<m of ``log((D(v_m, v_l) + 1) / D(v_l))``.

    ``documents`` is a list of token-id sequences or a ``DocumentIndex``.
    ``words`` (id -> string) is only used for error messages.
    """
    top = list(top_words)
    if len(top) < 2:
        return 0.0
    index = documents if isinstance(documents, DocumentIndex) else DocumentIndex(documents)
    V = index.matrix.shape[1]
    df = np.array([index.doc_freq([w])[0] if w < V else 0 for w in top])
    for w, c in zip(top, df):
        if c == 0:
            name = words[w] if words is not None else w
            raise ValueError(f"word {name!r} occurs in no document")
    co = index.co_doc_freq(top)
    total = 0.0
    for m in range(1, len(top)):
        for l in range(m):
            total += math.log((co[m, l] + 1) / df[l])
    return total


@dataclass
class CoherenceReport:
    scores: Dict[int, Dict[int, float]]   # aspect -> n -> score
    sizes: tuple = (10, 30, 50)

    def totals(self):
        return {n: sum(s[n] for s in self.scores.values()) for n in self.sizes}

    def to_text(self, title="coherence"):
        head = "aspect\t" + "\t".join(str(n) for n in self.sizes) + "\tsum"
        lines = [f"# {title}", head]
        for k in sorted(self.scores):
            row = [self.scores[k][n] for n in self.sizes]
            lines.append(f"{k}\t" + "\t".join(f"{v:.4f}" for v in row) + f"\t{sum(row):.4f}")
        tot = self.totals()
        lines.append("total\t" + "\t".join(f"{tot[n]:.4f}" for n in self.sizes)
                     + f"\t{sum(tot.values()):.4f}")
        return "\n".join(lines) + "\n"


def coherence_report(top_lists: Dict[int, Sequence[int]], documents, sizes=(10, 30, 50),
                     words=None) -> CoherenceReport:
    """Coherence of each aspect's top-word list truncated at every size."""
    index = documents if isinstance(documents, DocumentIndex) else DocumentIndex(documents)
    scores = {k: {n: coherence_score(list(lst)[:n], index, words) for n in sizes}
              for k, lst in top_lists.items()}
    return CoherenceReport(scores, tuple(sizes))


def merged_aspect_embedding(labeling: AspectLabeling, label, representatives):
    """Unweighted mean of the aspect rows / centroids mapped to ``label``."""
    ks = labeling.clusters(label)
    if not ks:
        raise ValueError(f"no cluster is labeled {label!r}")
    return np.asarray(representatives, dtype=np.float64)[ks].mean(axis=0)


def soft_assignments(sentence_vectors, cluster_vectors, similarity="cosine"):
    """Softmax over per-cluster similarities, one row per sentence."""
    S = np.asarray(sentence_vectors, dtype=np.float64)
    C = np.asarray(cluster_vectors, dtype=np.float64)
    if similarity == "cosine":
        sims = unit_rows(S) @ unit_rows(C).T
    elif similarity == "dot":
        sims = S @ C.T
    else:
        raise ValueError(f"unknown similarity {similarity!r}")
    return softmax(sims, axis=1)


def aspect_prevalence(sentence_vectors, cluster_vectors, labeling: AspectLabeling,
                      similarity="cosine") -> Dict[str, float]:
    """Fraction of sentences per label under soft (softmax) cluster counts."""
    S = np.asarray(sentence_vectors, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] == 0:
        raise ValueError("empty sentence set")
    C = np.asarray(cluster_vectors)
    labeling.check_total(C.shape[0])
    frac = soft_assignments(S, C, similarity).sum(axis=0) / S.shape[0]
    out = {l: 0.0 for l in sorted(set(labeling.mapping.values()))}
    for k in range(C.shape[0]):
        out[labeling.mapping[k]] += float(frac[k])
    return out


def cluster_purity(assignments, truth):
    """Share of items whose cluster's majority true label equals their own."""
    assignments = np.asarray(assignments)
    truth = np.asarray(truth)
    if assignments.size == 0:
        raise ValueError("no items")
    hits = 0
    for k in np.unique(assignments):
        hits += Counter(truth[assignments == k].tolist()).most_common(1)[0][1]
    return hits / assignments.size


def topic_word_purity(top_lists, word_topic):
    """Mean over topics of the share of top words from the topic's majority planted topic."""
    vals = []
    for lst in top_lists:
        labels = [word_topic.get(w, -1) for w in lst]
        vals.append(Counter(labels).most_common(1)[0][1] / len(lst))
    return float(np.mean(vals))
