"""Continuous-time transfer-function identification with refined instrumental variables."""

from .errors import (
    AssumptionA3Violated,
    CtsidError,
    DegreeZero,
    DimensionMismatch,
    EmptySignal,
    IllConditioned,
    ImproperTransferFunction,
    InvalidBounds,
    NearSingularNormalMatrix,
    PoleOnGrid,
    ResonantGrid,
    SingularRegression,
    SpecInvalid,
    UnstableFilter,
    ZeroConstantTerm,
)
from .estimator import EstimationResult, EstimatorConfig, ModelOrder, initialize, srivc, srivc_c
from .lti import Hold, TransferFunction, filter_samples, freq_response
from .polynomial import Polynomial
from .signals import Multisine, NoiseModel, SampledSignal, generate_dataset, generate_grid

__version__ = "0.1.0"

__all__ = [
    "AssumptionA3Violated",
    "CtsidError",
    "DegreeZero",
    "DimensionMismatch",
    "EmptySignal",
    "IllConditioned",
    "ImproperTransferFunction",
    "InvalidBounds",
    "NearSingularNormalMatrix",
    "PoleOnGrid",
    "ResonantGrid",
    "SingularRegression",
    "SpecInvalid",
    "UnstableFilter",
    "ZeroConstantTerm",
    "EstimationResult",
    "EstimatorConfig",
    "ModelOrder",
    "initialize",
    "srivc",
    "srivc_c",
    "Hold",
    "TransferFunction",
    "filter_samples",
    "freq_response",
    "Polynomial",
    "Multisine",
    "NoiseModel",
    "SampledSignal",
    "generate_dataset",
    "generate_grid",
]
