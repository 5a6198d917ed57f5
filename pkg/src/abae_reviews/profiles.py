"""Guest aspect profiles, KL-based reranking and the distance/rank-correlation experiment."""
import itertools
import warnings
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from . import kernels
from .numerics import softmax

KL_EPS = 1e-10
KINDS = ("listing", "review", "sentence")


@dataclass
class GuestProfile:
    guest_id: str
    distribution: np.ndarray
    aggregation: str
    n_sentences: int


def _as_matrix(dists):
    X = np.asarray(dists, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("no sentence distributions")
    return X


def aggregate_bos(sentence_dists, guest_id="") -> GuestProfile:
    """Uniform average over all of a guest's sentences."""
    X = _as_matrix(sentence_dists)
    return GuestProfile(guest_id, X.mean(axis=0), "bos", X.shape[0])


def aggregate_bor(review_dists: Sequence, guest_id="", weights=None) -> GuestProfile:
    """Average per review, then over reviews (optionally weighted)."""
    reviews = [_as_matrix(r) for r in review_dists]
    if not reviews:
        raise ValueError("no reviews")
    means = np.array([r.mean(axis=0) for r in reviews])
    if weights is None:
        prof = means.mean(axis=0)
    else:
        w = np.asarray(weights, dtype=np.float64)
        prof = (w[:, None] * means).sum(axis=0) / w.sum()
    return GuestProfile(guest_id, prof, "bor", sum(r.shape[0] for r in reviews))


def aggregate_time_decay(review_dists: Sequence, ages_days, half_life_days: Optional[float] = None,
                         guest_id="") -> GuestProfile:
    """BoR with exponentially decaying review weights; ``None`` disables decay."""
    if half_life_days is None:
        return aggregate_bor(review_dists, guest_id)
    w = 0.5 ** (np.asarray(ages_days, dtype=np.float64) / half_life_days)
    prof = aggregate_bor(review_dists, guest_id, weights=w)
    prof.aggregation = "time_decay"
    return prof


def aggregate_max_softmax(sentence_dists, guest_id="") -> GuestProfile:
    """Per-aspect maximum over sentences, renormalized with a softmax."""
    X = _as_matrix(sentence_dists)
    return GuestProfile(guest_id, softmax(X.max(axis=0)), "max_softmax", X.shape[0])


AGGREGATIONS = {"bos": aggregate_bos, "max_softmax": aggregate_max_softmax}


def _smooth(p):
    p = np.maximum(np.asarray(p, dtype=np.float64), KL_EPS)
    return p / p.sum(axis=-1, keepdims=True)


def symmetric_kl(p, q):
    """``KL(p||q) + KL(q||p)`` in nats, after flooring entries at 1e-10."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    p, q = _smooth(p), _smooth(q)
    return float(np.sum((p - q) * (np.log(p) - np.log(q))))


def _symmetric_kl_rows(profile, X):
    p = _smooth(profile)
    Q = _smooth(X)
    return np.sum((p - Q) * (np.log(p) - np.log(Q)), axis=1)


@dataclass
class RankedList:
    ids: List[str]
    scores: np.ndarray
    kind: str = "sentence"


def rank_objects(profile, objects: Mapping[str, object], kind="sentence") -> RankedList:
    """Order objects by ascending symmetric KL to ``profile``; ties by id.

    ``objects`` maps an id to one distribution or to an (n, K) array of
    sentence distributions whose mean represents the object. Objects with
    no sentences are skipped with a warning.
    """
    prof = profile.distribution if isinstance(profile, GuestProfile) else np.asarray(profile)
    ids, rows = [], []
    for oid, d in objects.items():
        d = np.asarray(d, dtype=np.float64)
        if d.size == 0:
            warnings.warn(f"object {oid} has no sentences; skipped", stacklevel=2)
            continue
        ids.append(str(oid))
        rows.append(d.mean(axis=0) if d.ndim == 2 else d)
    if not ids:
        return RankedList([], np.empty(0), kind)
    scores = _symmetric_kl_rows(prof, np.array(rows))
    order = sorted(range(len(ids)), key=lambda i: (scores[i], ids[i]))
    return RankedList([ids[i] for i in order], scores[order], kind)


def kendall_tau(ranking_a: Sequence, ranking_b: Sequence) -> float:
    """Tau-a between two total orders over the same ids."""
    a = list(ranking_a)
    b = list(ranking_b)
    if len(a) != len(b) or set(a) != set(b) or len(set(a)) != len(a):
        raise ValueError("rankings must order the same set of unique ids")
    n = len(a)
    if n < 2:
        raise ValueError("need at least two ranked objects")
    pos = {oid: i for i, oid in enumerate(b)}
    seq = np.array([pos[oid] for oid in a], dtype=np.int64)
    n0 = n * (n - 1) // 2
    inv = int(kernels.count_inversions(seq))
    return (n0 - 2 * inv) / n0


def ols_r2(points):
    """Least-squares line ``y = b0 + b1 x``; returns ``(b0, b1, R^2)``."""
    P = np.asarray(points, dtype=np.float64)
    x, y = P[:, 0], P[:, 1]
    if x.size < 2 or np.ptp(x) == 0:
        raise ValueError("need at least two distinct x values")
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    syy = np.sum((y - ym) ** 2)
    if syy == 0:
        raise ValueError("constant y: R^2 undefined")
    b1 = np.sum((x - xm) * (y - ym)) / sxx
    b0 = ym - b1 * xm
    ss_res = np.sum((y - b0 - b1 * x) ** 2)
    return float(b0), float(b1), float(1.0 - ss_res / syy)


@dataclass
class CorrelationPoint:
    guest_a: str
    guest_b: str
    x_kl: float
    y_tau: float
    kind: str


@dataclass
class ExperimentResult:
    kind: str
    points: List[CorrelationPoint]
    intercept: float
    slope: float
    r2: float


def object_sets(listings: Mapping[str, Mapping[str, np.ndarray]], kind):
    """Ranking universes for one object kind.

    ``listings`` maps listing id -> review id -> (n, K) sentence
    distributions. Listings form one universe of listing-level objects;
    reviews and sentences form one universe per listing.
    """
    if kind == "listing":
        return [{lid: np.vstack([np.atleast_2d(r) for r in revs.values()]) if revs else np.empty(0)
                 for lid, revs in listings.items()}]
    if kind == "review":
        return [dict(revs) for revs in listings.values()]
    if kind == "sentence":
        out = []
        for revs in listings.values():
            objs = {}
            for rid, S in revs.items():
                for j, row in enumerate(np.atleast_2d(S)):
                    objs[f"{rid}:{j}"] = row
            out.append(objs)
        return out
    raise ValueError(f"unknown object kind {kind!r}")


def pairwise_experiment(profiles: Mapping[str, object], listings, kind="sentence") -> ExperimentResult:
    """Symmetric KL between every guest pair against the Kendall tau of
    their rankings (averaged over listings for review/sentence kinds),
    plus an OLS fit of tau on KL."""
    if len(profiles) < 2:
        raise ValueError("need at least two profiles")
    dist = {g: (p.distribution if isinstance(p, GuestProfile) else np.asarray(p, float))
            for g, p in profiles.items()}
    universes = object_sets(listings, kind)
    guests = sorted(dist)
    rankings = {g: [rank_objects(dist[g], objs, kind).ids for objs in universes] for g in guests}
    points = []
    for ga, gb in itertools.combinations(guests, 2):
        taus = [kendall_tau(ra, rb) for ra, rb in zip(rankings[ga], rankings[gb]) if len(ra) >= 2]
        if not taus:
            continue
        points.append(CorrelationPoint(ga, gb, symmetric_kl(dist[ga], dist[gb]),
                                       float(np.mean(taus)), kind))
    try:
        b0, b1, r2 = ols_r2([(p.x_kl, p.y_tau) for p in points])
    except ValueError:
        b0 = b1 = r2 = float("nan")
    return ExperimentResult(kind, points, b0, b1, r2)
