"""Synthetic cursive-ligature corpus, connected-component filtering and a hierarchical CNN recognizer."""

__version__ = "0.1.0"
