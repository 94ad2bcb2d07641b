"""Independent optimizers for the coefficient-design problem

    minimize   sum_i q_i / (1 + beta_i q_i g)
    subject to beta >= 0, sum beta = 1
"""

import warnings

import cvxpy as cp
import numpy as np
from scipy.optimize import minimize


def project_simplex(v):
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1
    idx = np.nonzero(u - css / np.arange(1, len(v) + 1) > 0)[0][-1]
    return np.maximum(v - css[idx] / (idx + 1), 0)


def projected_gradient(q, g, iters=20000):
    """Projected gradient with backtracking on sum q / (1 + beta q g)."""
    M = len(q)
    f = lambda b: np.sum(q / (1 + b * q * g))  # noqa: E731
    beta = np.full(M, 1.0 / M)
    step = 1.0
    for _ in range(iters):
        grad = -(q**2) * g / (1 + beta * q * g) ** 2
        while True:
            cand = project_simplex(beta - step * grad)
            if f(cand) <= f(beta) + grad @ (cand - beta) + np.sum((cand - beta) ** 2) / (2 * step):
                break
            step /= 2
        if np.max(np.abs(cand - beta)) < 1e-15:
            return cand
        beta = cand
        step *= 1.5
    return beta


def convex_oracle(q, g):
    """Interior point solve, then an SQP polish.

    The conic solver alone stalls near 1e-5 when some 1 / (q g) offsets are tiny.
    """
    beta = cp.Variable(len(q))
    # q / (1 + beta q g) = (1 / g) / (beta + 1 / (q g))
    obj = cp.sum(cp.inv_pos(beta + 1.0 / (q * g)))
    prob = cp.Problem(cp.Minimize(obj), [beta >= 0, cp.sum(beta) == 1])
    with warnings.catch_warnings():
        # an inaccurate interior point is fine; the SQP stage below refines it
        warnings.simplefilter("ignore", UserWarning)
        prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-14, tol_gap_rel=1e-14, tol_feas=1e-14, max_iter=500)
    start = np.clip(np.asarray(beta.value), 0, None)
    start /= start.sum()
    res = minimize(
        lambda b: np.sum(q / (1 + b * q * g)),
        start,
        jac=lambda b: -(q**2) * g / (1 + b * q * g) ** 2,
        method="SLSQP",
        bounds=[(0, 1)] * len(q),
        constraints=[{"type": "eq", "fun": lambda b: b.sum() - 1, "jac": lambda b: np.ones_like(b)}],
        options={"ftol": 1e-16, "maxiter": 1000},
    )
    return res.x


def random_instance(rng):
    M = int(rng.integers(1, 13))
    h = 10 ** rng.uniform(-1, 1, M) * np.exp(1j * rng.uniform(0, 2 * np.pi, M))
    return h, float(10 ** rng.uniform(-3, 1)), int(rng.integers(1, 60))
