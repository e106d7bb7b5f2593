"""Generalized Feynman graph expansions for field theories driven by
non-Gaussian (Levy type) noise: partitions, graphs, cumulants, formal series,
closed-form and numeric graph values, and the charged gas equation of state."""

__version__ = "0.1.0"

from .partitions import SetPartition, BlockStructure, bell_number, enumerate_partitions
from .graphs import GenFeynmanGraph, canonicalize, classify, enumerate_graphs
from .cumulants import CumulantTable, MomentTable, cumulants_to_moments, moments_to_cumulants, wick_monomial
from .formal_series import TruncatedSeries
from .levy_models import GasParameters, LevyModel, PropagatorSpec
from .series_engine import InteractionPolynomial, pressure_series

__all__ = [
    "BlockStructure", "CumulantTable", "GasParameters", "GenFeynmanGraph", "InteractionPolynomial",
    "LevyModel", "MomentTable", "PropagatorSpec", "SetPartition", "TruncatedSeries", "bell_number",
    "canonicalize", "classify", "cumulants_to_moments", "enumerate_graphs", "enumerate_partitions",
    "moments_to_cumulants", "pressure_series", "wick_monomial",
]
