"""Brute-force Euclidean projection onto the probability simplex.

For every non-empty support ``S`` the equality-constrained problem has the
closed form ``p_S = z_S - tau`` with ``tau = (sum z_S - 1) / |S|``.  Keeping
the non-negative candidates and returning the closest one to ``z`` solves
the projection exactly, without any sorting argument.
"""

from itertools import combinations

import numpy as np


def project_simplex_bruteforce(z):
    z = np.asarray(z, dtype=np.float64)
    d = len(z)
    best, best_dist = None, np.inf
    for k in range(1, d + 1):
        for support in combinations(range(d), k):
            idx = list(support)
            tau = (z[idx].sum() - 1.0) / k
            p = np.zeros(d)
            p[idx] = z[idx] - tau
            if np.any(p[idx] < 0):
                continue
            dist = np.sum((p - z) ** 2)
            if dist < best_dist:
                best, best_dist = p, dist
    return best
