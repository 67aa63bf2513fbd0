"""Rank correlation, least squares with AIC, and LOWESS."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _st

from .errors import Degenerate, RankDeficient


def spearman(xs, ys):
    """Spearman's rho (average ranks for ties) and its two-sided p-value.

    The p-value uses the t approximation with ``n - 2`` degrees of freedom.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-d and of equal length")
    n = x.size
    if n < 3:
        raise ValueError("need at least 3 pairs")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise Degenerate("input is constant")
    rx = _st.rankdata(x)
    ry = _st.rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    rho = float(np.dot(rx, ry) / math.sqrt(np.dot(rx, rx) * np.dot(ry, ry)))
    rho = max(-1.0, min(1.0, rho))
    if abs(rho) == 1.0:
        return rho, 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return rho, float(2.0 * _st.t.sf(abs(t), n - 2))


# -- OLS -----------------------------------------------------------------

def _term_values(term: str, row) -> float | None:
    value = 1.0
    for factor in term.split("*"):
        name, _, power = factor.partition("^")
        v = row[name.strip()]
        if v is None or (isinstance(v, float) and math.isnan(v)):
            return None
        value *= float(v) ** (int(power) if power else 1)
    return value


@dataclass
class FitSummary:
    terms: tuple
    coefficients: np.ndarray
    r2: float
    aic: float
    m: int
    delta_aic: float = 0.0
    rank: int | None = None
    group: str = "base"
    error: str | None = None

    @property
    def label(self) -> str:
        return "+".join(self.terms)


def design(terms, rows, response, log_response=False):
    """Design matrix (with intercept) and response over rows where all terms are defined."""
    xs, ys = [], []
    for row in rows:
        vals = [_term_values(t, row) for t in terms]
        y = row[response]
        if any(v is None for v in vals) or y is None:
            continue
        y = float(y)
        if log_response:
            if y <= 0:
                continue
            y = math.log(y)
        xs.append([1.0] + vals)
        ys.append(y)
    return np.array(xs, dtype=np.float64).reshape(-1, len(terms) + 1), np.array(ys)


def ols_fit(terms, rows, response, log_response=False) -> FitSummary:
    """Least squares with intercept.

    ``rows`` are mappings from variable name to value; a term is a variable
    name, a power (``"lambda^2"``) or a product (``"lambda*var"``). Rows where
    any term is undefined are dropped. AIC is ``m ln(RSS/m) + 2(k+1)``.
    """
    terms = tuple(terms)
    x, y = design(terms, rows, response, log_response)
    m, p = x.shape
    if m < len(terms) + 2:
        raise RankDeficient(f"{m} usable rows for {len(terms)} terms")
    # scale columns before the rank test; squared terms span many decades
    scale = np.abs(x).max(axis=0)
    scale[scale == 0] = 1.0
    if np.linalg.matrix_rank(x / scale) < p:
        raise RankDeficient(f"design for {'+'.join(terms)} is singular")
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ coef
    rss = float(resid @ resid)
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 0.0 if tss == 0 else min(1.0, max(0.0, 1.0 - rss / tss))
    aic = -math.inf if rss == 0 else m * math.log(rss / m) + 2 * (len(terms) + 1)
    return FitSummary(terms, coef, r2, aic, m)


# -- LOWESS --------------------------------------------------------------

def tricube(d):
    d = np.abs(np.asarray(d, dtype=np.float64))
    return np.where(d < 1.0, (1.0 - d**3) ** 3, 0.0)


def lowess(x, y, frac=0.67, robust_iters=0):
    """Locally weighted linear smoother.

    For each point the bandwidth is the distance to its ``floor(frac * m)``-th
    nearest neighbour (itself included), and neighbours are weighted with the
    tricube kernel. Robustifying passes reweight by the bisquare of residuals over six
    median absolute residuals. Returns fitted values in input order.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    m = x.size
    if m < 3 or y.size != m:
        raise ValueError("need at least 3 points with matching x and y")
    if not 0 < frac <= 1:
        raise ValueError("frac must be in (0, 1]")
    if np.all(x == x[0]):
        raise Degenerate("all x values are equal")
    r = min(m, max(2, int(frac * m + 1e-10)))
    dist = np.abs(x[:, None] - x[None, :])
    h = np.sort(dist, axis=1)[:, r - 1]
    robust = np.ones(m)
    fitted = np.empty(m)
    for _ in range(robust_iters + 1):
        for i in range(m):
            if h[i] > 0:
                w = tricube(dist[i] / h[i]) * robust
            else:
                w = (dist[i] == 0).astype(float) * robust
            fitted[i] = _local_line(x, y, w, x[i])
        resid = y - fitted
        s = np.median(np.abs(resid))
        if s == 0:
            break
        u = resid / (6.0 * s)
        robust = np.where(np.abs(u) < 1, (1 - u**2) ** 2, 0.0)
    return fitted


def _local_line(x, y, w, x0):
    sw = w.sum()
    if sw <= 0:
        return float("nan")
    xm = np.dot(w, x) / sw
    ym = np.dot(w, y) / sw
    sxx = np.dot(w, (x - xm) ** 2)
    if sxx <= 1e-14 * max(1.0, xm * xm) * sw:
        return float(ym)
    slope = np.dot(w, (x - xm) * (y - ym)) / sxx
    return float(ym + slope * (x0 - xm))


def lowess_curve(x, y, frac=0.67, robust_iters=0):
    """Smoothed ``(x, yhat)`` pairs sorted by x, one per distinct x."""
    x = np.asarray(x, dtype=np.float64)
    fitted = lowess(x, y, frac, robust_iters)
    order = np.argsort(x, kind="stable")
    xs, idx = np.unique(x[order], return_index=True)
    return xs, fitted[order][idx]
