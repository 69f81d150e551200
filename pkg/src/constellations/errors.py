"""Exception hierarchy shared by all modules."""


class ConstellationError(Exception):
    """Base class for all library errors."""


class ZeroVector(ConstellationError):
    def __init__(self, row: int):
        self.row = row
        super().__init__(f"row {row} has (near-)zero norm and cannot be normalized")


class DimensionMismatch(ConstellationError):
    pass


class InvalidQuantile(ConstellationError):
    pass


class NonPositiveTemperature(ConstellationError):
    pass


class InvalidBatch(ConstellationError):
    pass


class BadEdge(ConstellationError):
    pass


class InvalidK(ConstellationError):
    pass


class InvalidDelta(ConstellationError):
    pass


class InvalidLift(ConstellationError):
    pass


class InfeasibleParams(ConstellationError):
    pass


class TargetUnreachable(ConstellationError):
    """Raised when the spherical-code sampler exhausts its attempt budget.

    Carries the partial code so callers can still use what was found.
    """

    def __init__(self, accepted_count: int, partial_code=None):
        self.accepted_count = accepted_count
        self.partial_code = partial_code
        super().__init__(f"only {accepted_count} code points accepted before budget ran out")


class ConstructionFailure(ConstellationError):
    pass


class NonUnitW(ConstellationError):
    pass


class DivergenceDetected(ConstellationError):
    pass


class SolverFailure(ConstellationError):
    pass


class Infeasible(ConstellationError):
    pass


class NumericalDegeneracy(ConstellationError):
    pass


class PreconditionViolated(ConstellationError):
    pass


class ParseError(ConstellationError):
    pass


class ShapeError(ConstellationError):
    pass


class NonUnitRows(ConstellationError):
    pass


class ConfigError(ConstellationError):
    pass
