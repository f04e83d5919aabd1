"""Word-sense disambiguation over nested-ball taxonomy embeddings."""

__version__ = "0.1.0"
