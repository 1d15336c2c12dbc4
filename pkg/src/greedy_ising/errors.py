"""Exception types shared across the package."""


class GreedyIsingError(Exception):
    """Base class for all package errors."""


class NoInactiveCoordinate(GreedyIsingError):
    pass


class EmptySupport(GreedyIsingError):
    pass


class InnerSolveFailure(GreedyIsingError):
    """An inner minimization did not converge.

    Usually means the logistic data are separable on the offending support,
    or the restricted design is singular.
    """

    def __init__(self, message, support=()):
        super().__init__(message)
        self.support = tuple(support)


class NonBinaryData(GreedyIsingError, ValueError):
    pass


class NotPerfectSquare(GreedyIsingError, ValueError):
    pass


class DegreeOutOfRange(GreedyIsingError, ValueError):
    pass


class TooLarge(GreedyIsingError, ValueError):
    pass


class MissingNode(GreedyIsingError, ValueError):
    pass


class MaxIterationsExceeded(GreedyIsingError):
    pass


class MissingConstants(GreedyIsingError, ValueError):
    pass


class IoFailure(GreedyIsingError, OSError):
    pass


class NodeFitError(GreedyIsingError):
    """A per-node fit failed; carries the node id and the original error."""

    def __init__(self, node, cause):
        super().__init__(f"node {node}: {type(cause).__name__}: {cause}")
        self.node = node
        self.cause = cause


class StructureFitError(GreedyIsingError):
    """One or more node fits failed; ``failures`` maps node id to the error."""

    def __init__(self, failures):
        self.failures = dict(failures)
        lines = [f"node {r}: {type(e).__name__}: {e}" for r, e in sorted(self.failures.items())]
        super().__init__(f"{len(self.failures)} node fit(s) failed\n" + "\n".join(lines))
