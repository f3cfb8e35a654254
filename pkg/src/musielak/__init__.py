"""Numerical toolkit for Musielak-Orlicz functions, their conjugates and regularity checks."""

from .control import CtrlFun, check_growth_condition, check_log_holder, hat, star, tilde
from .cube import Cube
from .errors import (AlignmentError, ConditionError, DomainError, NumericError,
                     UnsupportedCaseError)
from .field import GridField, luxemburg_norm, modular
from .nfunction import (NFun, power, sobolev_conjugate, upper_conjugate, young_conjugate)

__version__ = "0.1.0"

__all__ = [
    "AlignmentError", "ConditionError", "CtrlFun", "Cube", "DomainError", "GridField", "NFun",
    "NumericError", "UnsupportedCaseError", "check_growth_condition", "check_log_holder", "hat",
    "luxemburg_norm", "modular", "power", "sobolev_conjugate", "star", "tilde",
    "upper_conjugate", "young_conjugate",
]
