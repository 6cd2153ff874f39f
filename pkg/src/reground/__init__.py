"""Grounded hybrid-retrieval and assessment engine for regulatory corpora."""

__version__ = "0.1.0"
