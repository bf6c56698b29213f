import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "flatlab", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("flatlab")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def primitive_lattice_vectors(u, v, L, tol=1e-9):
    """Brute-force primitive vectors ``m u + n v`` of norm at most ``L``."""
    M = np.array([u, v], dtype=float).T
    # coefficient bound from the smallest singular value
    smin = np.linalg.svd(M, compute_uv=False)[-1]
    K = int(math.ceil(L / smin)) + 1
    out = []
    for m in range(-K, K + 1):
        for n in range(-K, K + 1):
            if (m, n) == (0, 0) or math.gcd(m, n) != 1:
                continue
            w = M @ (m, n)
            if math.hypot(*w) <= L + tol:
                out.append((float(w[0]), float(w[1])))
    return sorted(out)


def same_vectors(a, b, tol=1e-9):
    """Multiset equality of planar vectors up to ``tol`` per coordinate."""
    a = sorted(a)
    b = sorted(b)
    if len(a) != len(b):
        return False
    used = [False] * len(b)
    for p in a:
        for k, q in enumerate(b):
            if not used[k] and abs(p[0] - q[0]) <= tol and abs(p[1] - q[1]) <= tol:
                used[k] = True
                break
        else:
            return False
    return True
