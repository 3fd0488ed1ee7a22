"""Independent oracles used by the test suite.

These deliberately avoid the package's solver internals: the QP oracle is a
plain accelerated projected-gradient method on the stacked (locations,
scales) variable, with the Lipschitz constant taken from an explicit dense
residual operator. It is slow and simple on purpose.
"""

from __future__ import annotations

import numpy as np


def qp_objective(edges: np.ndarray, gammas: np.ndarray, weights: np.ndarray,
                 t: np.ndarray, dvec: np.ndarray) -> float:
    r = t[edges[:, 0]] - t[edges[:, 1]] - dvec[:, None] * gammas
    return float(np.sum(weights * np.sum(r * r, axis=1)))


def solve_qp_oracle(edges: np.ndarray, gammas: np.ndarray, weights: np.ndarray,
                    n: int, c: float = 1.0, max_iters: int = 200_000,
                    rel_tol: float = 1e-14) -> tuple[np.ndarray, np.ndarray, float]:
    """Projected-gradient (FISTA) solution of

        min sum_e w_e ||t_i - t_j - d_e * g_e||^2
        s.t. sum_i t_i = 0,  d_e >= c.

    Returns (t, d, objective).
    """
    m, dim = gammas.shape
    ei, ej = edges[:, 0], edges[:, 1]

    # Dense residual operator for an exact Lipschitz constant.
    A = np.zeros((m * dim, n * dim + m))
    sw = np.sqrt(weights)
    for e in range(m):
        for k in range(dim):
            row = e * dim + k
            A[row, ei[e] * dim + k] = sw[e]
            A[row, ej[e] * dim + k] = -sw[e]
            A[row, n * dim + e] = -sw[e] * gammas[e, k]
    lipschitz = 2.0 * np.linalg.norm(A, 2) ** 2
    step = 1.0 / lipschitz

    def project(t, dvec):
        return t - t.mean(axis=0), np.maximum(c, dvec)

    def gradient(t, dvec):
        r = t[ei] - t[ej] - dvec[:, None] * gammas
        wr = 2.0 * weights[:, None] * r
        gt = np.zeros_like(t)
        np.add.at(gt, ei, wr)
        np.add.at(gt, ej, -wr)
        gd = -np.einsum("ed,ed->e", wr, gammas)
        return gt, gd

    t = np.zeros((n, dim))
    dvec = np.full(m, c)
    yt, yd = t, dvec
    momentum = 1.0
    f_prev = np.inf
    f = qp_objective(edges, gammas, weights, t, dvec)
    for it in range(1, max_iters + 1):
        gt, gd = gradient(yt, yd)
        t_new, d_new = project(yt - step * gt, yd - step * gd)
        momentum_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * momentum ** 2))
        beta = (momentum - 1.0) / momentum_new
        yt = t_new + beta * (t_new - t)
        yd = d_new + beta * (d_new - dvec)
        t, dvec = t_new, d_new
        momentum = momentum_new
        if it % 200 == 0:
            f = qp_objective(edges, gammas, weights, t, dvec)
            if np.isfinite(f_prev) and abs(f_prev - f) <= rel_tol * max(f_prev, 1e-300):
                break
            f_prev = f
    t, dvec = project(t, dvec)
    return t, dvec, qp_objective(edges, gammas, weights, t, dvec)


def nrmse_reference(estimates: np.ndarray, truth: np.ndarray) -> float:
    """Straight transcription of the normalized RMS error formula."""
    center = truth.mean(axis=0)
    num = 0.0
    den = 0.0
    for a, b in zip(estimates, truth):
        num += float(np.sum((a - b) ** 2))
    for b in truth:
        den += float(np.sum((b - center) ** 2))
    return float(np.sqrt(num / den))
