"""Exception hierarchy shared by all modules."""


class LatentDagError(Exception):
    """Base class; the CLI maps every subclass to exit code 2."""


class SingularMatrix(LatentDagError):
    pass


class ShapeMismatch(LatentDagError):
    pass


class ParseError(LatentDagError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CycleDetected(LatentDagError):
    pass


class BadIndex(LatentDagError):
    pass


class SizeMismatch(LatentDagError):
    pass


class EmptyKeepSet(LatentDagError):
    pass


class TooLarge(LatentDagError):
    pass


class TooSmall(LatentDagError):
    pass


class EdgeMismatch(LatentDagError):
    pass


class SingularSubmatrix(LatentDagError):
    pass


class NotSpearman(LatentDagError):
    pass


class NotCoSpearman(LatentDagError):
    pass


class MissingCache(LatentDagError):
    pass


class ConsistencyError(LatentDagError):
    """A soundness invariant between criteria and the Jacobian test was violated."""
