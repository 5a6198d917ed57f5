"""Review ingestion: sentence segmentation, token filtering, vocabulary and splits."""
import json
import re
import hashlib
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date
from importlib import resources
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

ENCODED_HEADER = "# abae-reviews encoded corpus v1"


def _load_word_list(name):
    text = resources.files("abae_reviews.data").joinpath(name).read_text("utf-8")
    return frozenset(
        line.strip() for line in text.splitlines()
        if line.strip() and not line.startswith("#"))


STOPWORDS = _load_word_list("stopwords.txt")
ABBREVIATIONS = _load_word_list("abbreviations.txt")


@dataclass(frozen=True)
class RawReview:
    review_id: str
    listing_id: str
    guest_id: str
    date: str
    text: str

    def __post_init__(self):
        for name in ("review_id", "listing_id", "guest_id"):
            if not getattr(self, name):
                raise ValueError(f"empty {name}")
        date.fromisoformat(self.date)

    @classmethod
    def from_dict(cls, d):
        return cls(str(d["review_id"]), str(d["listing_id"]), str(d["guest_id"]),
                   str(d["date"]), d.get("text") or "")


def read_reviews(path) -> List[RawReview]:
    """Read one JSON review record per line; blank lines are ignored."""
    reviews = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                reviews.append(RawReview.from_dict(json.loads(line)))
            except (KeyError, ValueError, json.JSONDecodeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad review record ({exc})") from exc
    return reviews


def write_reviews(reviews: Iterable[RawReview], path):
    with open(path, "w", encoding="utf-8") as fh:
        for r in reviews:
            fh.write(json.dumps({"review_id": r.review_id, "listing_id": r.listing_id,
                                 "guest_id": r.guest_id, "date": r.date, "text": r.text},
                                ensure_ascii=False) + "\n")


# ---------------------------------------------------------------- segmentation

_TERMINAL = re.compile(r"[.!?]+[\"')\]]*")
_WORD_BEFORE = re.compile(r"([A-Za-z.]+)$")


def _is_abbreviation(text, mark_start):
    m = _WORD_BEFORE.search(text, 0, mark_start)
    if m is None:
        return False
    word = m.group(1).lower().strip(".")
    return word in ABBREVIATIONS or (len(word) == 1 and word.isalpha())


def segment_sentences(text: str) -> List[str]:
    """Split review text into sentences.

    A run of ``.``, ``!`` or ``?`` (optionally followed by closing quotes or
    brackets) ends a sentence when it is followed by whitespace and an
    uppercase letter, or by the end of the text. A lone period after a
    word from ``ABBREVIATIONS`` or after a single letter never splits.
    """
    if not text:
        return []
    pieces = []
    start = 0
    n = len(text)
    for m in _TERMINAL.finditer(text):
        end = m.end()
        rest = text[end:]
        stripped = rest.lstrip()
        if stripped:
            if not rest[:1].isspace() or not stripped[0].isupper():
                continue
        if m.group(0).rstrip("\"')]") == "." and _is_abbreviation(text, m.start()):
            continue
        pieces.append(text[start:end])
        start = end
    if start < n:
        pieces.append(text[start:])
    return [p.strip() for p in pieces if p.strip()]


_TOKEN = re.compile(r"[^\W_]+(?:'[^\W_]+)*")


def tokenize_and_filter(sentence: str, stopwords=STOPWORDS) -> List[str]:
    """Lowercase, strip punctuation and drop stopwords, keeping order."""
    return [t for t in _TOKEN.findall(sentence.lower()) if t not in stopwords]


def ascii_ratio(text: str) -> float:
    if not text:
        return 0.0
    return sum(ch.isascii() for ch in text) / len(text)


# ------------------------------------------------------------------ vocabulary

@dataclass
class Vocabulary:
    words: List[str]
    frequency: List[int]
    max_size: int = 9000
    id_of: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.id_of = {w: i for i, w in enumerate(self.words)}
        if len(self.id_of) != len(self.words):
            raise ValueError("duplicate words in vocabulary")

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.id_of

    def word_of(self, i):
        return self.words[i]

    def encode(self, tokens: Sequence[str]) -> List[int]:
        return [self.id_of[t] for t in tokens if t in self.id_of]

    def decode(self, ids: Sequence[int]) -> List[str]:
        return [self.words[i] for i in ids]

    def digest(self) -> str:
        """SHA-256 over the ordered word list."""
        return hashlib.sha256("\n".join(self.words).encode("utf-8")).hexdigest()

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for w, f in zip(self.words, self.frequency):
                fh.write(f"{w}\t{f}\n")

    @classmethod
    def load(cls, path, max_size=None):
        words, freqs = [], []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                w, f = line.split("\t")
                words.append(w)
                freqs.append(int(f))
        return cls(words, freqs, max_size=max_size or max(len(words), 1))


def build_vocabulary(token_streams: Iterable[Sequence[str]], max_size: int = 9000) -> Vocabulary:
    """Keep the ``max_size`` most frequent words; ties break lexicographically."""
    if max_size < 1:
        raise ValueError("max_size must be >= 1")
    counts = Counter()
    for tokens in token_streams:
        counts.update(tokens)
    if not counts:
        raise ValueError("empty corpus")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:max_size]
    return Vocabulary([w for w, _ in ranked], [c for _, c in ranked], max_size=max_size)


# ---------------------------------------------------------------- encoded data

@dataclass(frozen=True)
class EncodedSentence:
    token_ids: tuple
    review_id: str
    listing_id: str
    guest_id: str
    position: int
    text: str = ""


@dataclass
class EncodedCorpus:
    sentences: List[EncodedSentence]
    listing_review_counts: Dict[str, int] = field(default_factory=dict)
    origin: Optional[List[int]] = None

    def __post_init__(self):
        self.by_listing = defaultdict(list)
        self.by_guest = defaultdict(list)
        self.by_review = defaultdict(list)
        for i, s in enumerate(self.sentences):
            self.by_listing[s.listing_id].append(i)
            self.by_guest[s.guest_id].append(i)
            self.by_review[s.review_id].append(i)

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def __getitem__(self, i):
        return self.sentences[i]

    @property
    def token_lists(self):
        return [s.token_ids for s in self.sentences]

    def n_tokens(self):
        return sum(len(s.token_ids) for s in self.sentences)

    def subset(self, indices) -> "EncodedCorpus":
        indices = list(indices)
        listings = {self.sentences[i].listing_id for i in indices}
        counts = {k: v for k, v in self.listing_review_counts.items() if k in listings}
        base = self.origin
        origin = [base[i] for i in indices] if base is not None else indices
        return EncodedCorpus([self.sentences[i] for i in indices], counts, origin)

    def stats(self) -> Dict[str, int]:
        return {"tokens": self.n_tokens(), "sentences": len(self),
                "guests": len(self.by_guest), "listings": len(self.by_listing)}

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(ENCODED_HEADER + "\n")
            for lid in sorted(self.listing_review_counts):
                fh.write(f"#reviews\t{lid}\t{self.listing_review_counts[lid]}\n")
            for s in self.sentences:
                text = " ".join(s.text.split())
                ids = " ".join(map(str, s.token_ids))
                fh.write(f"{s.review_id}\t{s.listing_id}\t{s.guest_id}\t{s.position}\t{ids}\t{text}\n")

    @classmethod
    def load(cls, path) -> "EncodedCorpus":
        sentences, counts = [], {}
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n")
            if header != ENCODED_HEADER:
                raise ValueError(f"{path}: not an encoded corpus file")
            for line in fh:
                parts = line.rstrip("\n").split("\t")
                if parts[0] == "#reviews":
                    counts[parts[1]] = int(parts[2])
                    continue
                rid, lid, gid, pos, ids, text = parts
                sentences.append(EncodedSentence(
                    tuple(int(t) for t in ids.split()), rid, lid, gid, int(pos), text))
        return cls(sentences, counts)


def encode_corpus(reviews: Iterable[RawReview], vocab: Vocabulary, stopwords=STOPWORDS,
                  min_ascii_ratio: Optional[float] = None) -> EncodedCorpus:
    """Segment, tokenize and id-encode reviews.

    Out-of-vocabulary tokens are dropped, as are sentences left empty.
    ``min_ascii_ratio`` enables the optional non-English heuristic.
    """
    sentences = []
    review_counts = Counter()
    for r in reviews:
        review_counts[r.listing_id] += 1
        position = 0
        for text in segment_sentences(r.text):
            if min_ascii_ratio is not None and ascii_ratio(text) < min_ascii_ratio:
                continue
            ids = vocab.encode(tokenize_and_filter(text, stopwords))
            if not ids:
                continue
            sentences.append(EncodedSentence(tuple(ids), r.review_id, r.listing_id,
                                             r.guest_id, position, text))
            position += 1
    return EncodedCorpus(sentences, dict(review_counts))


def preprocess(reviews: Sequence[RawReview], max_vocab=9000, stopwords=STOPWORDS,
               min_ascii_ratio=None):
    """Build the vocabulary over all review sentences, then encode."""
    def streams():
        for r in reviews:
            for text in segment_sentences(r.text):
                if min_ascii_ratio is not None and ascii_ratio(text) < min_ascii_ratio:
                    continue
                yield tokenize_and_filter(text, stopwords)

    vocab = build_vocabulary(streams(), max_vocab)
    return vocab, encode_corpus(reviews, vocab, stopwords, min_ascii_ratio)


# ---------------------------------------------------------------------- splits

@dataclass
class SplitRules:
    min_listing_reviews: int = 50
    max_listing_reviews: int = 100
    min_guest_sentences: int = 10
    min_rank_listing_sentences: int = 20
    min_summarize_sentences: int = 3
    n_rank_guests: int = 20
    summarize_test_fraction: float = 0.2
    train_fraction: float = 1.0
    seed: int = 0


SPLIT_NAMES = ("train", "summarize_val", "summarize_test", "rank_val", "rank_test")


class SplitError(ValueError):
    pass


def split_datasets(corpus: EncodedCorpus, rules: SplitRules = SplitRules()) -> Dict[str, EncodedCorpus]:
    """Carve train / summarization / ranking sets out of ``corpus``.

    Listings with a review count inside the configured window are held
    out of training and split into summarization validation and test
    sets. Ranking-validation guests are drawn among guests with enough
    sentences and are also held out of training. Ranking-test listings are
    the summarization-test listings with enough sentences.
    """
    rng = np.random.default_rng(rules.seed)
    counts = corpus.listing_review_counts or {
        lid: len({corpus[i].review_id for i in idx}) for lid, idx in corpus.by_listing.items()}

    held_listings = sorted(
        lid for lid in corpus.by_listing
        if rules.min_listing_reviews <= counts.get(lid, 0) <= rules.max_listing_reviews)
    if len(held_listings) < 2:
        raise SplitError(
            "rule min_listing_reviews/max_listing_reviews: fewer than 2 listings with "
            f"{rules.min_listing_reviews}..{rules.max_listing_reviews} reviews")
    held_set = set(held_listings)

    guests = sorted(
        gid for gid, idx in corpus.by_guest.items()
        if len(idx) >= rules.min_guest_sentences)
    if len(guests) < rules.n_rank_guests:
        raise SplitError(
            f"rule min_guest_sentences: only {len(guests)} guests "
            f"have >= {rules.min_guest_sentences} sentences, need {rules.n_rank_guests}")
    rank_guests = sorted(rng.choice(guests, size=rules.n_rank_guests, replace=False).tolist())
    rank_guest_set = set(rank_guests)

    order = rng.permutation(len(held_listings))
    n_test = max(1, int(round(rules.summarize_test_fraction * len(held_listings))))
    test_listings = sorted(held_listings[i] for i in order[:n_test])
    val_listings = sorted(held_listings[i] for i in order[n_test:])
    test_listings = [l for l in test_listings
                     if len(corpus.by_listing[l]) >= rules.min_summarize_sentences]
    if not test_listings:
        raise SplitError("rule min_summarize_sentences: no summarization test listing qualifies")
    rank_listings = [l for l in test_listings
                     if len(corpus.by_listing[l]) >= rules.min_rank_listing_sentences]
    if not rank_listings:
        raise SplitError(
            f"rule min_rank_listing_sentences: no test listing has >= "
            f"{rules.min_rank_listing_sentences} sentences")

    train_idx = [i for i, s in enumerate(corpus)
                 if s.listing_id not in held_set and s.guest_id not in rank_guest_set]
    if rules.train_fraction < 1.0:
        keep = rng.random(len(train_idx)) < rules.train_fraction
        train_idx = [i for i, k in zip(train_idx, keep) if k]
    if not train_idx:
        raise SplitError("rule train_fraction: empty training set")

    def gather(listings):
        return [i for l in listings for i in corpus.by_listing[l]]

    return {
        "train": corpus.subset(train_idx),
        "summarize_val": corpus.subset(sorted(gather(val_listings))),
        "summarize_test": corpus.subset(sorted(gather(test_listings))),
        "rank_val": corpus.subset(sorted(i for g in rank_guests for i in corpus.by_guest[g])),
        "rank_test": corpus.subset(sorted(gather(rank_listings))),
    }


def save_split_manifest(splits: Dict[str, EncodedCorpus], path):
    manifest = {name: {"stats": c.stats(), "sentence_index": list(c.origin or [])}
                for name, c in splits.items()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_splits(corpus: EncodedCorpus, path) -> Dict[str, EncodedCorpus]:
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    return {name: corpus.subset(entry["sentence_index"]) for name, entry in manifest.items()}
