"""Bayesian joint models for longitudinal and survival data with a general
hazard structure.

Importing the package switches JAX to double precision; every likelihood
and gradient in the package is computed in float64.
"""

import jax

jax.config.update("jax_enable_x64", True)

from .errors import DomainError, NumericalError, ShapeError, ValidationError  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "NumericalError",
    "ShapeError",
    "ValidationError",
    "__version__",
]
