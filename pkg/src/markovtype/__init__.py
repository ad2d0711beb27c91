"""Markov type of metric spaces via threshold embeddings: experiment toolkit."""

from .errors import InvariantViolation
from .spaces import FiniteMetricSpace, WeightedGraph, generate

__all__ = ["FiniteMetricSpace", "InvariantViolation", "WeightedGraph", "generate"]
__version__ = "0.1.0"
