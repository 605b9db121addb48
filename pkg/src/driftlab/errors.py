"""Exception hierarchy shared across driftlab modules."""


class DriftLabError(Exception):
    """Base class for all driftlab errors."""


class ChainError(DriftLabError, ValueError):
    """The chain (or a partition built from it) breaks a structural assumption."""


class ConvergenceError(ChainError):
    """A non-optimal state can never leave its fitness level."""


class PathError(DriftLabError, ValueError):
    """A requested level-graph path does not exist or is malformed."""


class GuardError(DriftLabError, ValueError):
    """Input size exceeds a computational guard."""


class SingularSystemError(DriftLabError, ArithmeticError):
    """A linear system expected to be nonsingular turned out singular."""
