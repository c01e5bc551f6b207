"""Numerical verification of twistor and reflector spaces over para-quaternionic contact manifolds."""

from .errors import (ConstraintError, DegenerateStructureError, OutsideDomainError, PqcError,
                     RelationError, UnsupportedInputError)
from .report import Check, VerificationReport

__version__ = "0.1.0"

__all__ = [
    "Check",
    "ConstraintError",
    "DegenerateStructureError",
    "OutsideDomainError",
    "PqcError",
    "RelationError",
    "UnsupportedInputError",
    "VerificationReport",
]
