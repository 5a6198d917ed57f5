"""Attention-based aspect extraction for review corpora, with k-means and LDA baselines."""
__version__ = "0.1.0"
