"""Weighted complete networks.

Edge weights are corridor distances in km, so a *low* weight means easy
movement. Every network here is complete, symmetric and zero-diagonal with
off-diagonal weights inside a box ``[w_min, w_max]``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    AsymmetricEntry,
    BoundViolation,
    DecodeError,
    NonSquare,
    NonzeroDiagonal,
    OutOfBounds,
)

W_MIN = 1.0
W_MAX = 20.0
SYMMETRY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class WeightedNetwork:
    weights: np.ndarray
    w_min: float = W_MIN
    w_max: float = W_MAX

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def upper(self) -> np.ndarray:
        """Upper-triangle weights, row-major."""
        return self.weights[np.triu_indices(self.n, 1)].copy()

    def __eq__(self, other):
        if not isinstance(other, WeightedNetwork):
            return NotImplemented
        return (
            self.w_min == other.w_min
            and self.w_max == other.w_max
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self):
        return hash((self.n, self.w_min, self.w_max, self.weights.tobytes()))

    def __repr__(self):
        return f"WeightedNetwork(n={self.n}, w_min={self.w_min}, w_max={self.w_max})"


def _freeze(w: np.ndarray, w_min: float, w_max: float) -> WeightedNetwork:
    w.setflags(write=False)
    return WeightedNetwork(w, float(w_min), float(w_max))


def validate_network(raw_matrix, w_min: float = W_MIN, w_max: float = W_MAX) -> WeightedNetwork:
    """Check ``raw_matrix`` against the network invariants and return a copy.

    The lower triangle is replaced by the mirrored upper triangle once the
    symmetry check passes, so the stored matrix is exactly symmetric.
    """
    w = np.array(raw_matrix, dtype=np.float64, copy=True)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise NonSquare(f"expected a square matrix, got shape {w.shape}")
    n = w.shape[0]
    if n < 2:
        raise NonSquare(f"need at least 2 nodes, got {n}")
    if not np.all(np.isfinite(w)):
        raise DecodeError("matrix contains non-finite entries")
    for i in range(n):
        if w[i, i] != 0.0:
            raise NonzeroDiagonal(i, float(w[i, i]))
    for i in range(n):
        for j in range(i + 1, n):
            delta = abs(w[i, j] - w[j, i])
            if delta > SYMMETRY_TOL:
                raise AsymmetricEntry(i, j, delta)
    for i in range(n):
        for j in range(i + 1, n):
            if not (w_min <= w[i, j] <= w_max):
                raise OutOfBounds(i, j, float(w[i, j]), w_min, w_max)
    iu = np.triu_indices(n, 1)
    w.T[iu] = w[iu]
    return _freeze(w, w_min, w_max)


def from_upper(values, n: int, w_min: float = W_MIN, w_max: float = W_MAX) -> WeightedNetwork:
    """Build a network from its ``n(n-1)/2`` upper-triangle weights."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (n * (n - 1) // 2,):
        raise NonSquare(f"expected {n * (n - 1) // 2} upper-triangle values, got {values.shape}")
    if np.any(values < w_min) or np.any(values > w_max):
        k = int(np.flatnonzero((values < w_min) | (values > w_max))[0])
        i, j = (a[k] for a in np.triu_indices(n, 1))
        raise OutOfBounds(int(i), int(j), float(values[k]), w_min, w_max)
    w = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    w[iu] = values
    w.T[iu] = values
    return _freeze(w, w_min, w_max)


def uniform_network(n: int, w: float, bounds=(W_MIN, W_MAX)) -> WeightedNetwork:
    w_min, w_max = bounds
    if n < 2:
        raise NonSquare(f"need at least 2 nodes, got {n}")
    if not (w_min <= w <= w_max):
        raise BoundViolation(f"weight {w} outside [{w_min}, {w_max}]")
    m = np.full((n, n), float(w))
    np.fill_diagonal(m, 0.0)
    return _freeze(m, w_min, w_max)


# -- codecs -----------------------------------------------------------------

def to_dict(net: WeightedNetwork) -> dict:
    return {
        "n": net.n,
        "w_min": net.w_min,
        "w_max": net.w_max,
        "weights": [[float(x) for x in row] for row in net.weights],
    }


def from_dict(d: dict) -> WeightedNetwork:
    for key in ("n", "weights"):
        if key not in d:
            raise DecodeError(f"missing field {key!r}")
    try:
        n = int(d["n"])
        w_min = float(d.get("w_min", W_MIN))
        w_max = float(d.get("w_max", W_MAX))
    except (TypeError, ValueError) as exc:
        raise DecodeError(f"bad header field: {exc}") from None
    rows = d["weights"]
    if not isinstance(rows, list) or len(rows) != n:
        raise DecodeError(f"field 'weights': expected {n} rows")
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != n:
            raise DecodeError(f"field 'weights' row {i}: expected {n} values")
        for j, x in enumerate(row):
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise DecodeError(f"field 'weights'[{i}][{j}]: not a number: {x!r}")
    return validate_network(rows, w_min, w_max)


def encode_json(net: WeightedNetwork) -> str:
    return json.dumps(to_dict(net))


def decode_json(text: str) -> WeightedNetwork:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DecodeError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(d, dict):
        raise DecodeError("top-level JSON value must be an object")
    return from_dict(d)


def encode_csv(net: WeightedNetwork) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["n", "w_min", "w_max"])
    out.writerow([net.n, repr(net.w_min), repr(net.w_max)])
    for row in net.weights:
        out.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def decode_csv(text: str) -> WeightedNetwork:
    lines = [(k, ln) for k, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if lines and lines[0][1].replace(" ", "") == "n,w_min,w_max":
        lines = lines[1:]
    if not lines:
        raise DecodeError("line 1: empty input")
    k, first = lines[0]
    head = first.split(",")
    try:
        n, w_min, w_max = int(head[0]), float(head[1]), float(head[2])
    except (IndexError, ValueError):
        raise DecodeError(f"line {k}: expected 'n,w_min,w_max', got {first!r}") from None
    if len(lines) - 1 != n:
        raise DecodeError(f"expected {n} matrix rows, got {len(lines) - 1}")
    rows = []
    for k, ln in lines[1:]:
        fields = ln.split(",")
        if len(fields) != n:
            raise DecodeError(f"line {k}: expected {n} fields, got {len(fields)}")
        try:
            rows.append([float(x) for x in fields])
        except ValueError as exc:
            raise DecodeError(f"line {k}: {exc}") from None
    return validate_network(rows, w_min, w_max)


def load(path) -> WeightedNetwork:
    path = str(path)
    with open(path) as fh:
        text = fh.read()
    return decode_csv(text) if path.endswith(".csv") else decode_json(text)


def save(net: WeightedNetwork, path) -> None:
    path = str(path)
    text = encode_csv(net) if path.endswith(".csv") else encode_json(net)
    with open(path, "w") as fh:
        fh.write(text)
