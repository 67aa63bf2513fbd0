class NetMomentsError(Exception):
    """Base class for all package errors."""


class NonSquare(NetMomentsError):
    pass


class AsymmetricEntry(NetMomentsError):
    def __init__(self, i, j, delta):
        super().__init__(f"weights[{i}][{j}] and weights[{j}][{i}] differ by {delta:g}")
        self.i, self.j = i, j


class NonzeroDiagonal(NetMomentsError):
    def __init__(self, i, value):
        super().__init__(f"weights[{i}][{i}] = {value!r}, expected 0")
        self.i = i


class OutOfBounds(NetMomentsError):
    def __init__(self, i, j, value, w_min, w_max):
        super().__init__(f"weights[{i}][{j}] = {value!r} outside [{w_min}, {w_max}]")
        self.i, self.j = i, j


class BoundViolation(NetMomentsError):
    pass


class DecodeError(NetMomentsError):
    pass


class ConvergenceFailure(NetMomentsError):
    pass


class ZeroDenominator(NetMomentsError):
    pass


class TooSmall(NetMomentsError):
    pass


class InvalidTarget(NetMomentsError):
    pass


class InvalidLevel(NetMomentsError):
    pass


class Infeasible(NetMomentsError):
    """Synthesis gave up. ``best`` holds the closest network found."""

    def __init__(self, message, best=None, residuals=None, iterations=0):
        super().__init__(message)
        self.best = best
        self.residuals = residuals
        self.iterations = iterations


class Degenerate(NetMomentsError):
    pass


class RankDeficient(NetMomentsError):
    pass
