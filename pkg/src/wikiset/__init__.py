"""Build graded ad-hoc retrieval datasets from Wikipedia articles, index
them, rank with BM25 and evaluate runs."""

__version__ = "0.1.0"
