"""Seeded quadratic instances shared by the unit and acceptance tests."""

import numpy as np

from gdaflow.hilbert import QuadraticSaddleObjective, hilbert_point


def quadratic_instance(seed: int):
    """A quadratic objective with ``d1, d2 <= 3``, a starting point and a horizon.

    Seeds cycle through strongly convex-concave, degenerate (``lam = 0``) and
    semiconvex (``lam < 0``) couplings.
    """
    rng = np.random.default_rng(1000 + seed)
    d1, d2 = (int(v) for v in rng.integers(1, 4, size=2))
    shift = (0.5, 0.0, -0.5)[seed % 3]
    jitter = 0.0 if seed % 3 == 1 else 0.5

    def sym(d):
        M = rng.standard_normal((d, d))
        S = M @ M.T / d
        return S - np.linalg.eigvalsh(S)[0] * np.eye(d) + shift * np.eye(d) + rng.uniform(0, jitter) * np.eye(d)

    A, B = sym(d1), sym(d2)
    C = rng.standard_normal((d1, d2))
    obj = QuadraticSaddleObjective(A, rng.standard_normal(d1), C, B, rng.standard_normal(d2))
    z0 = hilbert_point(rng.standard_normal(d1), rng.standard_normal(d2))
    return obj, z0, 1.0


def quadratic_suite(count: int = 10):
    return [quadratic_instance(k) for k in range(count)]
