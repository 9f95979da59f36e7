"""Exception types shared across the package."""


class NadmmError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(NadmmError):
    pass


class InfeasibleOffset(NadmmError):
    """Constraint offset vector does not lie in the image of the last block's matrix."""


class SubproblemFailure(NadmmError):
    """A block subproblem could not be solved to tolerance within budget."""

    def __init__(self, block, reason):
        self.block = block
        self.reason = reason
        super().__init__(f"block {block!r}: {reason}")


class NotConverged(NadmmError):
    """Solve hit the iteration cap. Carries the final state and trace for post-mortem."""

    def __init__(self, message, state=None, trace=None):
        self.state = state
        self.trace = trace
        super().__init__(message)


class InvalidParameter(NadmmError):
    pass


class InvalidSpec(NadmmError):
    pass


class NumericalBreakdown(NadmmError):
    pass


class DegenerateB(NadmmError):
    pass


class MissingConstants(NadmmError):
    pass


class NoSubgradientSampler(NadmmError):
    pass


class InvalidBeta(NadmmError):
    pass


class UnknownCase(NadmmError):
    pass


class ConfigParseError(NadmmError):
    pass
