"""Approximate amplitude encoding with sign-aware MMD training, post-selection,
variational Schmidt decomposition and the SVD-entropy market indicator."""

__version__ = "0.1.0"
