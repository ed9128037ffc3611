"""Exception types shared across the package.

Every error that a caller might reasonably catch gets its own class so the
CLI can map configuration mistakes to exit code 1 and genuine check failures
to exit code 2 without string matching.
"""


class WspectraError(Exception):
    pass


class NotPositiveDefinite(WspectraError):
    """Right-hand matrix of a generalized eigenproblem failed factorization."""


class NoConvergence(WspectraError):
    """Iterative eigensolver exhausted iterations above tolerance."""


class BadGrid(WspectraError):
    pass


class BadMode(WspectraError):
    pass


class BadDimension(WspectraError):
    pass


class BadBeta(WspectraError):
    pass


class BadAlpha(WspectraError):
    pass


class BadParam(WspectraError):
    pass


class BadT(WspectraError):
    pass


class SingularAtOrigin(WspectraError):
    """Laurent data blows up at 0 (negative modes or log term on a disk)."""


class SingularPoint(WspectraError):
    pass


class FluxNotZero(WspectraError):
    pass


class EmptyRange(WspectraError):
    pass


class NegativeModes(WspectraError):
    pass


class MeasureMismatch(WspectraError):
    pass


class SourceSingular(WspectraError):
    pass


class NotConformal(WspectraError):
    pass


class OpenSurfaceWithoutClamp(WspectraError):
    pass


class ShapeMismatch(WspectraError):
    pass


class ContourOutOfChart(WspectraError):
    pass


class CenterOnSurface(WspectraError):
    pass


class RingOutOfChart(WspectraError):
    pass


class InadmissibleL(WspectraError):
    pass


class IoError(WspectraError):
    pass
