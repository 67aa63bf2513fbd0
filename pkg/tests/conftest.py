import itertools
import math

import numpy as np
import pytest

from netmoments.network import from_upper, validate_network

# the six edge weights of the 4-node example network, one assignment
FOUR_NODE = [
    [0, 3, 4, 6],
    [3, 0, 8, 9],
    [4, 8, 0, 12],
    [6, 9, 12, 0],
]


@pytest.fixture
def four_node():
    return validate_network(FOUR_NODE, 1, 20)


def tri(a, b, c):
    """3-node network with w12=a, w13=b, w23=c."""
    return from_upper([a, b, c], 3)


def cubic_root(a, b, c):
    """Largest root of lam^3 - (a^2+b^2+c^2) lam - 2abc by bisection."""
    p = a * a + b * b + c * c
    q = 2 * a * b * c

    def f(x):
        return x**3 - p * x - q

    lo, hi = 0.0, 2 * (a + b + c)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def enumerate_paths(w):
    """Shortest path lengths by trying every simple path."""
    n = len(w)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            others = [k for k in range(n) if k not in (i, j)]
            best = math.inf
            for r in range(len(others) + 1):
                for mid in itertools.permutations(others, r):
                    path = (i,) + mid + (j,)
                    best = min(best, sum(w[path[k]][path[k + 1]] for k in range(len(path) - 1)))
            d[i, j] = best
    return d


def random_network(rng, n, lo=1.0, hi=20.0):
    return from_upper(rng.uniform(lo, hi, n * (n - 1) // 2), n, lo, hi)
