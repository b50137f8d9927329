"""Batch toolkit for mining pseudoparallel sentence pairs from comparable corpora."""

__version__ = "0.1.0"
