"""Spectral radius, eigenvector centrality and its moments."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import ConvergenceFailure, ZeroDenominator
from .network import WeightedNetwork

RESIDUAL_TOL = 1e-12
MAX_ITER = 200_000
ZERO_VAR = 1e-12


@_accel.njit
def _power_iteration_loop(a, tol, max_iter):
    n = a.shape[0]
    # shift by half the mean strength: never exceeds lambda/2, so the most
    # negative eigenvalue cannot dominate the iteration
    shift = 0.0
    for i in range(n):
        for j in range(n):
            shift += a[i, j]
    shift = 0.5 * shift / n
    v = np.ones(n) / np.sqrt(n)
    av = np.zeros(n)
    lam = 0.0
    for it in range(1, max_iter + 1):
        for i in range(n):
            s = 0.0
            for j in range(n):
                s += a[i, j] * v[j]
            av[i] = s
        lam = 0.0
        for i in range(n):
            lam += v[i] * av[i]
        res = 0.0
        for i in range(n):
            d = av[i] - lam * v[i]
            res += d * d
        if np.sqrt(res) <= tol * max(1.0, abs(lam)):
            return lam, v, it, True
        norm = 0.0
        for i in range(n):
            av[i] += shift * v[i]
            norm += av[i] * av[i]
        norm = np.sqrt(norm)
        for i in range(n):
            v[i] = av[i] / norm
    return lam, v, max_iter, False


def _power_iteration_numpy(a, tol, max_iter):
    n = a.shape[0]
    shift = 0.5 * a.sum() / n
    v = np.full(n, 1.0 / np.sqrt(n))
    lam = 0.0
    for it in range(1, max_iter + 1):
        av = a @ v
        lam = float(v @ av)
        if np.linalg.norm(av - lam * v) <= tol * max(1.0, abs(lam)):
            return lam, v, it, True
        av += shift * v
        v = av / np.linalg.norm(av)
    return lam, v, max_iter, False


def power_iteration(a, tol=RESIDUAL_TOL, max_iter=MAX_ITER, use_numba=None):
    """Dominant eigenpair of a symmetric nonnegative matrix.

    Starts from the all-ones vector and stops when the relative residual
    ``||Av - lam v|| / max(1, lam)`` drops to ``tol``. Returns ``(lam, v)``
    with ``v`` unit-norm and positively oriented.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    kernel = _power_iteration_loop if use_numba else _power_iteration_numpy
    lam, v, iters, ok = kernel(a, tol, max_iter)
    if not ok:
        raise ConvergenceFailure(f"power iteration did not converge in {iters} iterations")
    v = np.array(v)
    if v.sum() < 0:
        v = -v
    return float(lam), v


def spectral_radius(net: WeightedNetwork) -> float:
    return power_iteration(net.weights)[0]


def eigenvector_centrality(net: WeightedNetwork) -> np.ndarray:
    return power_iteration(net.weights)[1]


def ec_moments(ec):
    """Population mean, variance and skewness of the centrality scores.

    Skewness is ``m3 / m2**1.5`` and is ``None`` when the variance is below
    ``1e-12``.
    """
    ec = np.asarray(ec, dtype=np.float64)
    mean = float(ec.mean())
    dev = ec - mean
    var = float(np.mean(dev**2))
    if var < ZERO_VAR:
        return mean, var, None
    skew = float(np.mean(dev**3) / var**1.5)
    return mean, var, skew


def frobenius_radius(net: WeightedNetwork, ec) -> float:
    """Spectral radius as the centrality-weighted mean strength."""
    ec = np.asarray(ec, dtype=np.float64)
    denom = ec.sum()
    if denom <= 0:
        raise ZeroDenominator("sum of centrality scores must be positive")
    return float((net.weights @ ec).sum() / denom)


@dataclass(frozen=True)
class EigenSummary:
    lam: float
    ec: np.ndarray
    ec_mean: float
    ec_var: float
    ec_skew: float | None


def summarize(net: WeightedNetwork) -> EigenSummary:
    lam, v = power_iteration(net.weights)
    mean, var, skew = ec_moments(v)
    return EigenSummary(lam, v, mean, var, skew)
