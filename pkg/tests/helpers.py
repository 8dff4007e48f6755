"""Shared test utilities: polytope sampling and small oracles."""

import numpy as np
from scipy.optimize import linprog


def chebyshev_center(A, b):
    """Center and radius of the largest ball inside {x : A x <= b} (scipy oracle)."""
    norms = np.linalg.norm(A, axis=1)
    n = A.shape[1]
    res = linprog(np.r_[np.zeros(n), -1.0], A_ub=np.column_stack([A, norms]), b_ub=b,
                  bounds=[(None, None)] * n + [(0, None)], method="highs")
    assert res.status == 0, res.message
    return res.x[:n], res.x[n]


def hit_and_run(A, b, count, rng, thin=10, burn=200):
    """Approximately uniform samples from the bounded polytope A x <= b."""
    x, r = chebyshev_center(A, b)
    assert r > 0, "polytope has empty interior"
    out = []
    for k in range(burn + count * thin):
        d = rng.standard_normal(x.size)
        d /= np.linalg.norm(d)
        Ad = A @ d
        slack = b - A @ x
        with np.errstate(divide="ignore"):
            t = slack / Ad
        hi = np.min(t[Ad > 0]) if np.any(Ad > 0) else 1.0
        lo = np.max(t[Ad < 0]) if np.any(Ad < 0) else -1.0
        x = x + rng.uniform(lo, hi) * d
        if k >= burn and (k - burn) % thin == 0:
            out.append(x.copy())
    return np.array(out)


def box_rows(n, lo, hi):
    """Rows of lo <= x <= hi."""
    I = np.eye(n)
    return np.vstack([I, -I]), np.r_[np.full(n, hi), np.full(n, -lo)]
