"""Exception types raised by the verification engine."""


class PqcError(ValueError):
    """Base class for all engine errors."""


class RelationError(PqcError):
    """An algebraic relation that is required as input failed to hold."""

    def __init__(self, relation: str, residual: float):
        super().__init__(f"relation {relation!r} violated (residual {residual:.3e})")
        self.relation = relation
        self.residual = residual


class DegenerateStructureError(PqcError):
    """A linear system that should determine an object uniquely is rank deficient."""


class UnsupportedInputError(PqcError):
    """The operation cannot be carried out for this kind of structure."""


class OutsideDomainError(PqcError):
    """Point outside the open set on which the construction is defined."""


class ConstraintError(PqcError):
    """A tangent vector fails a linear constraint it is required to satisfy."""

    def __init__(self, constraint: str, residual: float):
        super().__init__(f"constraint {constraint!r} violated (residual {residual:.3e})")
        self.constraint = constraint
        self.residual = residual
