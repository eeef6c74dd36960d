"""Spectral sum rules, orthogonal polynomials and large-deviation experiments."""

from .errors import CyclicityError, NumericalError, QuadratureError
from .measures import SpectralMeasure
from .opuc import VerblunskySeq
from .oprl import FiniteRankPerturbation, JacobiParams
from .rng import RngStream
from .sumrules import SumRuleReport

__version__ = "0.1.0"

__all__ = [
    "CyclicityError",
    "FiniteRankPerturbation",
    "JacobiParams",
    "NumericalError",
    "QuadratureError",
    "RngStream",
    "SpectralMeasure",
    "SumRuleReport",
    "VerblunskySeq",
]
