"""Semantic-flow-graph code representation and changeset bug localization."""

__version__ = "0.1.0"
