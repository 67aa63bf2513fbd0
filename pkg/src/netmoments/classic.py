"""Conventional network metrics used for comparison with the eigen-moments.

Weights are distances, so shortest paths minimise summed weight. Note the
sign consequence: strength and clustering grow with distance here and hence
correlate *positively* with the spectral radius.
"""
from __future__ import annotations

import numpy as np

from . import _accel
from .errors import TooSmall
from .network import WeightedNetwork


def mean_strength(net: WeightedNetwork) -> float:
    """Sum over ordered pairs of edge weights, divided by node count."""
    return float(net.weights.sum() / net.n)


@_accel.njit
def _dijkstra_all(w):
    n = w.shape[0]
    d = np.full((n, n), np.inf)
    done = np.zeros(n, np.bool_)
    for s in range(n):
        dist = d[s]
        done[:] = False
        dist[s] = 0.0
        for _ in range(n):
            u = -1
            best = np.inf
            for i in range(n):
                if not done[i] and dist[i] < best:
                    best = dist[i]
                    u = i
            if u < 0:
                break
            done[u] = True
            for v in range(n):
                if not done[v] and v != u:
                    alt = best + w[u, v]
                    if alt < dist[v]:
                        dist[v] = alt
    return d


def _floyd_warshall(w):
    d = np.array(w, dtype=np.float64)
    for k in range(d.shape[0]):
        np.minimum(d, d[:, k, None] + d[None, k, :], out=d)
    return d


def shortest_paths(net: WeightedNetwork) -> np.ndarray:
    """All-pairs shortest weighted path lengths (km)."""
    return _path_matrix(net.weights)


def _path_matrix(w):
    w = np.ascontiguousarray(w, dtype=np.float64)
    if _accel.USE_NUMBA:
        d = _dijkstra_all(w)
    else:
        d = _floyd_warshall(w)
    # symmetrise away last-bit differences from summation order
    return np.minimum(d, d.T)


def mean_shortest_path(paths) -> float:
    paths = np.asarray(paths)
    n = paths.shape[0]
    return float((paths.sum() - np.trace(paths)) / (n * (n - 1)))


def _efficiency(paths) -> float:
    n = paths.shape[0]
    off = ~np.eye(n, dtype=bool)
    return float(np.sum(1.0 / paths[off]) / (n * (n - 1)))


def global_efficiency(paths) -> float:
    return _efficiency(np.asarray(paths))


def local_efficiency(net: WeightedNetwork) -> float:
    """Mean efficiency of the node-deleted subnetworks.

    Each subnetwork's shortest paths are recomputed without the removed node.
    """
    n = net.n
    if n < 3:
        raise TooSmall("local efficiency needs at least 3 nodes")
    total = 0.0
    for k in range(n):
        keep = np.delete(np.arange(n), k)
        sub = net.weights[np.ix_(keep, keep)]
        total += _efficiency(_path_matrix(sub))
    return total / n


def mean_clustering(net: WeightedNetwork) -> float:
    """Onnela weighted clustering averaged over nodes.

    Weights are normalised by the global maximum; every node has ``n - 1``
    neighbours in a complete network.
    """
    n = net.n
    if n < 3:
        raise TooSmall("clustering needs at least 3 nodes")
    c = np.cbrt(net.weights / net.weights.max())
    triangles = np.diag(c @ c @ c)
    return float(np.mean(triangles / ((n - 1) * (n - 2))))


def classic_summary(net: WeightedNetwork) -> dict:
    paths = shortest_paths(net)
    return {
        "mean_strength": mean_strength(net),
        "mean_clustering": mean_clustering(net),
        "mean_shortest_path": mean_shortest_path(paths),
        "global_eff": global_efficiency(paths),
        "local_eff": local_efficiency(net),
    }
