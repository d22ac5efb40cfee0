"""Data-driven fuzzy modelling: continuous RBM features, probability-based
clustering, Gaussian fuzzy rules with pseudoinverse consequents, and
likelihood-fitted rule probabilities."""

from .errors import ConfigError, DataError, NumericalError, RbmFuzzyError, StageError

__version__ = "0.1.0"

__all__ = ["ConfigError", "DataError", "NumericalError", "RbmFuzzyError", "StageError"]
