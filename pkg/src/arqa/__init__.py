"""Open-domain Arabic question answering over a Wikipedia-style corpus."""

__version__ = "0.1.0"
