"""Extractive summaries per (listing, aspect) and scoring of human judgments."""
import csv
import warnings
from collections import defaultdict
from dataclasses import dataclass, asdict
from typing import Dict, List, Sequence

import numpy as np

SHEET_COLUMNS = ["example_id", "listing_id", "sentence", "aspect", "verdict", "annotator"]
KEY_COLUMNS = ["example_id", "listing_id", "aspect", "method", "rank", "score", "review_id",
               "position", "sentence"]
ASPECTS = ("location", "cleanliness", "communication")


class ShortListingWarning(UserWarning):
    """A listing had fewer candidate sentences than requested."""


@dataclass
class ExtractedSentence:
    listing_id: str
    aspect: str
    method: str
    text: str
    rank: int
    score: float
    review_id: str = ""
    position: int = 0


def extract_top_sentences(sentences, label, bundle, k=3) -> List[ExtractedSentence]:
    """Top-``k`` sentences of one listing for ``label`` under ``bundle``.

    ``sentences`` are ``EncodedSentence`` records in listing order; score
    ties keep that order. Fewer than ``k`` candidates returns them all and
    emits ``ShortListingWarning``.
    """
    sentences = list(sentences)
    if not sentences:
        return []
    if len(sentences) < k:
        warnings.warn(f"listing {sentences[0].listing_id} has {len(sentences)} sentences (< {k})",
                      ShortListingWarning, stacklevel=2)
    scores = np.asarray(bundle.scores([s.token_ids for s in sentences], label), dtype=np.float64)
    order = np.lexsort((np.arange(scores.size), -scores))[:k]
    return [ExtractedSentence(s.listing_id, label, bundle.method, s.text, rank + 1,
                              float(scores[i]), s.review_id, s.position)
            for rank, i in enumerate(order) for s in [sentences[i]]]


def summarize_listings(corpus, bundles, aspects=ASPECTS, k=3) -> List[ExtractedSentence]:
    """Top sentences for every listing, method and aspect.

    An aspect no cluster of a method is labeled with is skipped for that
    method with a warning.
    """
    usable = []
    for bundle in bundles:
        have = [a for a in aspects if bundle.labeling.clusters(a)]
        for a in sorted(set(aspects) - set(have)):
            warnings.warn(f"{bundle.method}: no cluster labeled {a!r}; skipped", stacklevel=2)
        usable.append((bundle, have))
    out = []
    for lid in sorted(corpus.by_listing):
        sents = [corpus[i] for i in corpus.by_listing[lid]]
        for bundle, have in usable:
            for aspect in have:
                out.extend(extract_top_sentences(sents, aspect, bundle, k))
    return out


# ---------------------------------------------------------------- metrics

def precision_at_k(groups: Dict[tuple, Dict[int, int]], k: int) -> float:
    """Mean over groups of the positive share among ranks ``1..k``.

    ``groups`` maps a group key to ``{rank: verdict}``; a list of verdicts
    in rank order is accepted too.
    """
    if not groups:
        raise ValueError("no judgment groups")
    vals = []
    for key, verdicts in groups.items():
        if not isinstance(verdicts, dict):
            verdicts = {i + 1: v for i, v in enumerate(verdicts)}
        missing = [r for r in range(1, k + 1) if r not in verdicts]
        if missing:
            raise ValueError(f"group {key} is missing rank(s) {missing}")
        hits = 0
        for r in range(1, k + 1):
            v = verdicts[r]
            if v not in (0, 1):
                raise ValueError(f"verdict must be 0 or 1, got {v!r}")
            hits += v
        vals.append(hits / k)
    return float(np.mean(vals))


def fleiss_kappa(counts) -> float:
    """Fleiss' kappa for an items x categories matrix of rater counts.

    Every row must sum to the same number of raters n >= 2. When chance
    agreement is 1 (a single category used throughout) kappa is 1 by
    convention.
    """
    c = np.asarray(counts, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] == 0:
        raise ValueError("counts must be a non-empty 2-D matrix")
    if (c < 0).any():
        raise ValueError("negative counts")
    n = c.sum(axis=1)
    if not np.all(n == n[0]) or n[0] < 2:
        raise ValueError("every item needs the same number (>= 2) of raters")
    n = n[0]
    N = c.shape[0]
    P_i = ((c * c).sum(axis=1) - n) / (n * (n - 1))
    P_bar = P_i.mean()
    p_j = c.sum(axis=0) / (N * n)
    P_e = float((p_j * p_j).sum())
    if P_e == 1.0:
        return 1.0
    return float((P_bar - P_e) / (1.0 - P_e))


# ---------------------------------------------------------------- sheets

@dataclass
class EvaluationSheets:
    sheets: Dict[str, List[dict]]   # annotator -> rows
    key: List[dict]                 # example id -> provenance, including method
    overlap: List[str]              # example ids every annotator judges


def build_evaluation_sheet(extracted: Sequence[ExtractedSentence], n_annotators=3,
                           overlap_fraction=795 / 4536, seed=0) -> EvaluationSheets:
    """Blind annotator sheets.

    Examples are shuffled and given opaque ids, a ``overlap_fraction``
    share goes to every annotator (for agreement), and the rest is dealt
    round-robin. Sheets omit the method.
    """
    if n_annotators < 1:
        raise ValueError("need at least one annotator")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(extracted))
    key = []
    for new_id, i in enumerate(order):
        e = extracted[i]
        key.append({"example_id": f"ex{new_id:06d}", "listing_id": e.listing_id,
                    "aspect": e.aspect, "method": e.method, "rank": e.rank,
                    "score": repr(e.score), "review_id": e.review_id,
                    "position": e.position, "sentence": e.text})
    n_overlap = int(round(overlap_fraction * len(key))) if n_annotators > 1 else 0
    overlap = [row["example_id"] for row in key[:n_overlap]]
    names = [f"a{j + 1}" for j in range(n_annotators)]
    sheets = {a: [] for a in names}

    def row(r, a):
        return {"example_id": r["example_id"], "listing_id": r["listing_id"],
                "sentence": r["sentence"], "aspect": r["aspect"], "verdict": "", "annotator": a}

    for r in key[:n_overlap]:
        for a in names:
            sheets[a].append(row(r, a))
    for j, r in enumerate(key[n_overlap:]):
        a = names[j % n_annotators]
        sheets[a].append(row(r, a))
    for a in names:
        perm = rng.permutation(len(sheets[a]))
        sheets[a] = [sheets[a][i] for i in perm]
    return EvaluationSheets(sheets, key, overlap)


def write_rows(rows, columns, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, columns, delimiter="\t", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: r.get(c, "") for c in columns})


def read_rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


def write_extracted(extracted, path):
    cols = list(asdict(extracted[0]).keys()) if extracted else list(ExtractedSentence.__annotations__)
    write_rows([{**asdict(e), "score": repr(e.score)} for e in extracted], cols, path)


@dataclass
class JudgmentResults:
    precision: Dict[tuple, tuple]   # (method, aspect) -> (P@1, P@3)
    kappa: float
    n_examples: int

    def to_text(self):
        methods = sorted({m for m, _ in self.precision})
        aspects = [a for a in ASPECTS if any(a == x for _, x in self.precision)]
        lines = ["setup\t" + "\t".join(aspects)]
        for m in methods:
            cells = []
            for a in aspects:
                p = self.precision.get((m, a))
                cells.append("-" if p is None else f"{p[0]:.2f}/{p[1]:.2f}")
            lines.append(m + "\t" + "\t".join(cells))
        lines.append(f"fleiss_kappa\t{self.kappa:.4f}")
        lines.append(f"examples\t{self.n_examples}")
        return "\n".join(lines) + "\n"


def score_judgments(judgments: Sequence[dict], key: Sequence[dict]) -> JudgmentResults:
    """P@1/P@3 per (method, aspect) and Fleiss' kappa on multiply-judged examples.

    Examples judged more than once take the majority verdict (ties count as 0).
    """
    meta = {r["example_id"]: r for r in key}
    votes = defaultdict(list)
    for j in judgments:
        v = str(j["verdict"]).strip()
        if v == "":
            continue
        if v not in ("0", "1"):
            raise ValueError(f"verdict must be 0 or 1, got {v!r} for {j['example_id']}")
        if j["example_id"] not in meta:
            raise ValueError(f"unknown example id {j['example_id']}")
        votes[j["example_id"]].append(int(v))

    groups = defaultdict(dict)
    for ex, vs in votes.items():
        r = meta[ex]
        verdict = int(sum(vs) * 2 > len(vs))
        groups[(r["method"], r["aspect"], r["listing_id"])][int(r["rank"])] = verdict

    precision = {}
    by_setup = defaultdict(dict)
    for (m, a, l), g in groups.items():
        by_setup[(m, a)][l] = g
    for setup, gs in sorted(by_setup.items()):
        p1 = precision_at_k(gs, 1)
        full = {l: g for l, g in gs.items() if all(r in g for r in (1, 2, 3))}
        p3 = precision_at_k(full, 3) if full else float("nan")
        precision[setup] = (p1, p3)

    multi = [vs for vs in votes.values() if len(vs) >= 2]
    kappa = float("nan")
    if multi:
        n = max(len(vs) for vs in multi)
        rows = [[vs.count(0), vs.count(1)] for vs in multi if len(vs) == n]
        kappa = fleiss_kappa(rows)
    return JudgmentResults(precision, kappa, len(votes))
