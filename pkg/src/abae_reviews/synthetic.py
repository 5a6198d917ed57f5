"""Synthetic fixtures with known ground truth.

* ``planted_topic_corpus`` - sentences drawn from disjoint topic vocabularies.
* ``fixture_reviews`` - raw review records with listing/guest structure and
  guest topic preferences, sized to pass configurable split rules.
* ``two_archetype_population`` - aspect distributions for guests spread
  between two preference archetypes, plus listings to rank.
"""
from dataclasses import dataclass
from datetime import date, timedelta
from typing import Dict, List

import numpy as np

from .corpus import RawReview

TOPIC_WORDS = {
    "location": [
        "walk", "metro", "subway", "station", "downtown", "restaurants", "shops", "beach",
        "neighborhood", "bus", "minutes", "park", "center", "cafes", "museum", "market",
        "distance", "nearby", "train", "airport", "district", "bars", "harbor", "square",
        "supermarket"],
    "cleanliness": [
        "clean", "spotless", "tidy", "dusty", "dirty", "towels", "sheets", "linens",
        "bathroom", "shower", "immaculate", "smell", "hygiene", "vacuumed", "stains", "mold",
        "fresh", "neat", "washed", "floors", "bedding", "hair", "soap", "sanitized", "crumbs"],
    "communication": [
        "host", "responsive", "replied", "message", "checkin", "instructions",
        "communicative", "quickly", "answered", "keys", "email", "contact", "prompt",
        "texted", "arrival", "phone", "questions", "reply", "informed", "greeted",
        "lockbox", "directions", "timely", "welcomed", "responded"],
    "amenities": [
        "kitchen", "wifi", "bed", "couch", "balcony", "view", "pool", "parking", "heating",
        "tv", "fridge", "stove", "washer", "dryer", "coffee", "desk", "pillows", "mattress",
        "closet", "hangers", "microwave", "oven", "fan", "blanket", "iron"],
    "value": [
        "price", "value", "cheap", "affordable", "expensive", "money", "budget", "worth",
        "cost", "fee", "deal", "bargain", "pricey", "overpriced", "discount", "rate",
        "charge", "refund", "nightly", "reasonable", "dollars", "euros", "payment",
        "deposit", "paid"],
}
TOPIC_NAMES = list(TOPIC_WORDS)
FILLERS = ["the", "was", "very", "and", "it", "we", "our", "so", "is", "a"]


@dataclass
class PlantedCorpus:
    sentences: List[List[str]]
    topics: np.ndarray           # planted topic index per sentence
    topic_words: List[List[str]]


def planted_topic_corpus(n_sentences=2000, n_topics=5, seed=0, min_len=4, max_len=9,
                         words_per_topic=None, weights=None) -> PlantedCorpus:
    """Each sentence picks one topic and draws its words from that topic only."""
    if not 1 <= n_topics <= len(TOPIC_NAMES):
        raise ValueError(f"n_topics must be in 1..{len(TOPIC_NAMES)}")
    rng = np.random.default_rng(seed)
    vocab = [TOPIC_WORDS[t][:words_per_topic] for t in TOPIC_NAMES[:n_topics]]
    p = None if weights is None else np.asarray(weights, float) / np.sum(weights)
    topics = rng.choice(n_topics, size=n_sentences, p=p)
    sentences = []
    for t in topics:
        n = int(rng.integers(min_len, max_len + 1))
        sentences.append([vocab[t][i] for i in rng.integers(0, len(vocab[t]), size=n)])
    return PlantedCorpus(sentences, topics, vocab)


def _sentence_text(words, rng):
    out = []
    for w in words:
        if rng.random() < 0.3:
            out.append(FILLERS[int(rng.integers(len(FILLERS)))])
        out.append(w)
    text = " ".join(out)
    return text[0].upper() + text[1:] + "."


def fixture_reviews(n_listings=40, n_held_listings=10, held_reviews=(12, 18),
                    other_reviews=(3, 8), n_guests=120, sentences_per_review=(1, 4),
                    n_topics=5, seed=0) -> List[RawReview]:
    """Review records over planted topics.

    ``n_held_listings`` listings receive ``held_reviews`` reviews (so split
    rules scaled to that window select them); the rest receive
    ``other_reviews``. Each guest has a topic preference drawn from a
    sparse Dirichlet, and their sentences follow it.
    """
    rng = np.random.default_rng(seed)
    vocab = [TOPIC_WORDS[t] for t in TOPIC_NAMES[:n_topics]]
    prefs = rng.dirichlet(np.full(n_topics, 0.4), size=n_guests)
    reviews = []
    day0 = date(2015, 1, 1)
    rid = 0
    for li in range(n_listings):
        lo, hi = held_reviews if li < n_held_listings else other_reviews
        for _ in range(int(rng.integers(lo, hi + 1))):
            g = int(rng.integers(n_guests))
            parts = []
            for _ in range(int(rng.integers(sentences_per_review[0], sentences_per_review[1] + 1))):
                t = int(rng.choice(n_topics, p=prefs[g]))
                n = int(rng.integers(3, 8))
                parts.append(_sentence_text([vocab[t][i] for i in rng.integers(0, len(vocab[t]), size=n)], rng))
            reviews.append(RawReview(
                review_id=f"r{rid:05d}", listing_id=f"L{li:03d}", guest_id=f"g{g:04d}",
                date=(day0 + timedelta(days=int(rng.integers(0, 730)))).isoformat(),
                text=" ".join(parts)))
            rid += 1
    return reviews


@dataclass
class Population:
    guest_sentences: Dict[str, np.ndarray]      # guest -> (n_sentences, K)
    listings: Dict[str, Dict[str, np.ndarray]]  # listing -> review -> (n_sentences, K)
    mix: Dict[str, float]                       # guest -> weight on archetype A


def _sentence_dists(topics, K, rng, focus=6.0, floor=0.3):
    alpha = np.full((len(topics), K), floor)
    alpha[np.arange(len(topics)), topics] += focus
    return np.vstack([rng.dirichlet(a) for a in alpha])


def two_archetype_population(n_guests=20, n_listings=69, K=5, seed=0,
                             guest_sentences=(10, 66), reviews_per_listing=(4, 12),
                             sentences_per_review=(1, 5), listing_concentration=30.0,
                             focus=2.0, floor=1.0) -> Population:
    """Guests interpolate between a cleanliness archetype (aspect 0) and a
    location archetype (aspect 1); every sentence is concentrated on one
    aspect drawn from its author's preferences. Listing aspect mixes are
    drawn around a shared base mix; ``listing_concentration`` controls how
    alike listings are."""
    rng = np.random.default_rng(seed)
    arch_a = np.full(K, 0.05)
    arch_a[0] = 1.0
    arch_b = np.full(K, 0.05)
    arch_b[1] = 1.0
    arch_a /= arch_a.sum()
    arch_b /= arch_b.sum()

    guest_sent, mix = {}, {}
    for g in range(n_guests):
        w = float(rng.random())
        pref = w * arch_a + (1 - w) * arch_b
        n = int(rng.integers(guest_sentences[0], guest_sentences[1] + 1))
        topics = rng.choice(K, size=n, p=pref)
        gid = f"g{g:02d}"
        guest_sent[gid] = _sentence_dists(topics, K, rng, focus, floor)
        mix[gid] = w

    base = np.full(K, 1.0 / K)
    listings = {}
    for li in range(n_listings):
        lmix = rng.dirichlet(listing_concentration * base)
        reviews = {}
        for r in range(int(rng.integers(reviews_per_listing[0], reviews_per_listing[1] + 1))):
            n = int(rng.integers(sentences_per_review[0], sentences_per_review[1] + 1))
            reviews[f"L{li:02d}r{r:02d}"] = _sentence_dists(rng.choice(K, size=n, p=lmix), K, rng, focus, floor)
        listings[f"L{li:02d}"] = reviews
    return Population(guest_sent, listings, mix)
