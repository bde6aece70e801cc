"""Implicit-guarantee strength index and ordinal credit-rating estimators.

Pipeline: score policy documents against a two-level indicator scheme,
convert the per-document index to yearly guarantee strength G = 10 - PMC,
attach it to bond issuance records, and estimate its effect on ordinal
ratings with from-scratch ordered-logit and multinomial-logit maximum
likelihood (with a compiled kernel core and a pure-numpy fallback).
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    CollinearityError,
    ConfigError,
    ConvergenceError,
    DataError,
    PmcLogitError,
)
