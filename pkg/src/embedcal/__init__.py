"""Calibration of computational models with embedded model inadequacy."""

from embedcal.core import (
    EmbeddedParameter,
    InferenceProblem,
    LikelihoodSpec,
    LogNormal,
    Normal,
    ObservationSet,
    PlainParameter,
    Uniform,
    log_prior,
    split_sample,
)

__version__ = "0.1.0"

__all__ = [
    "EmbeddedParameter",
    "InferenceProblem",
    "LikelihoodSpec",
    "LogNormal",
    "Normal",
    "ObservationSet",
    "PlainParameter",
    "Uniform",
    "__version__",
    "log_prior",
    "split_sample",
]
