"""Weighted composition operators on the Fock space: closed forms and finite sections."""
from .fock import FockVector, LogQuadWeight, SpaceConfig, gaussian_norm_logquad
from .matrices import TruncatedOperator, composition_matrix, operator_norm, weighted_matrix
from .semigroup import SemigroupSpec, Variant
from .symbols import (
    AffineSymbol,
    Boundedness,
    Power,
    classify_composition,
    classify_power_bounded,
    classify_weighted_bounded,
    sup_M,
)

__all__ = [
    "AffineSymbol",
    "Boundedness",
    "FockVector",
    "LogQuadWeight",
    "Power",
    "SemigroupSpec",
    "SpaceConfig",
    "TruncatedOperator",
    "Variant",
    "classify_composition",
    "classify_power_bounded",
    "classify_weighted_bounded",
    "composition_matrix",
    "gaussian_norm_logquad",
    "operator_norm",
    "sup_M",
    "weighted_matrix",
]
__version__ = "0.1.0"
