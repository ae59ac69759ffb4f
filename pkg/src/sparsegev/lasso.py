"""L1-penalised least squares by cyclic coordinate descent.

Problems are given in Gram form,

    f(b) = yy - 2 b'g + b'G b + lam * sum_{j penalised} |b_j|,

which covers both ordinary data (``G = Z'Z``, ``g = Z'y``) and expected
objectives assembled from posterior moments.  Note the loss carries no 1/2
factor, so the KKT bound on a zero coefficient is ``|2 (G b - g)_j| <= lam``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


@dataclass
class LassoResult:
    coef: np.ndarray
    kkt: float
    n_sweeps: int


def lasso_objective(G, g, yy, coef, lam, penalized) -> float:
    coef = np.asarray(coef, dtype=float)
    smooth = yy - 2.0 * coef @ g + coef @ G @ coef
    return float(smooth + lam * np.abs(coef[penalized]).sum())


def kkt_residual(G, g, coef, lam, penalized) -> float:
    """Largest violation of the Lasso optimality conditions."""
    grad = 2.0 * (G @ coef - g)
    res = np.abs(grad)
    pen = np.asarray(penalized, dtype=bool)
    nz = pen & (coef != 0.0)
    z = pen & (coef == 0.0)
    res[nz] = np.abs(grad[nz] + lam * np.sign(coef[nz]))
    res[z] = np.maximum(np.abs(grad[z]) - lam, 0.0)
    # coordinates with no curvature cannot move and carry no information
    res[np.diag(G) <= 0.0] = 0.0
    return float(res.max()) if res.size else 0.0


def _polish(G, g, coef, lam, penalized):
    """Solve the stationarity equations exactly on the current active set."""
    active = (coef != 0.0) | ~penalized
    active &= np.diag(G) > 0.0
    if not active.any():
        return coef
    idx = np.flatnonzero(active)
    rhs = g[idx] - 0.5 * lam * np.where(penalized[idx], np.sign(coef[idx]), 0.0)
    try:
        sol = np.linalg.solve(G[np.ix_(idx, idx)], rhs)
    except np.linalg.LinAlgError:
        return coef
    # keep the polish only if no sign flips
    flips = penalized[idx] & (np.sign(sol) != np.sign(coef[idx]))
    if flips.any():
        return coef
    out = coef.copy()
    out[idx] = sol
    return out


def lasso_gram(G, g, lam: float, penalized=None, coef0=None, yy: float = 0.0,
               tol: float = 1e-10, max_sweeps: int = 100_000) -> LassoResult:
    """Minimise the Gram-form Lasso objective.

    Parameters
    ----------
    G : (d, d) positive semi-definite matrix.
    g : (d,) cross-moment vector.
    lam : penalty weight, ``>= 0``.
    penalized : (d,) bool mask; unpenalised coordinates (intercepts) get no L1 term.
    coef0 : warm start.
    tol : target KKT residual.

    Raises
    ------
    ConvergenceError
        Sweep cap reached before the KKT residual fell below ``tol``.
    """
    G = np.asarray(G, dtype=float)
    g = np.asarray(g, dtype=float)
    d = g.shape[0]
    if lam < 0:
        raise DomainError("lam must be >= 0")
    penalized = np.ones(d, bool) if penalized is None else np.asarray(penalized, bool)
    coef = np.zeros(d) if coef0 is None else np.array(coef0, dtype=float)
    diag = np.diag(G).tolist()
    pen_list = penalized.tolist()
    half = 0.5 * lam
    Gb = G @ coef
    kkt = np.inf
    prev_active = None
    for sweep in range(1, max_sweeps + 1):
        for j in range(d):
            cj = float(coef[j])
            if diag[j] <= 0.0:
                if cj != 0.0:
                    Gb -= G[:, j] * cj
                    coef[j] = 0.0
                continue
            rho = float(g[j] - Gb[j]) + diag[j] * cj
            if pen_list[j]:
                new = math.copysign(max(abs(rho) - half, 0.0), rho) / diag[j]
            else:
                new = rho / diag[j]
            delta = new - cj
            if delta != 0.0:
                Gb += G[:, j] * delta
                coef[j] = new
        active = coef != 0.0
        stable = prev_active is not None and np.array_equal(active, prev_active)
        prev_active = active
        if not stable and sweep % 50 != 0:
            continue
        kkt = kkt_residual(G, g, coef, lam, penalized)
        if kkt > tol:
            # an unchanged active set usually means the exact solve on it is the answer
            polished = _polish(G, g, coef, lam, penalized)
            pk = kkt_residual(G, g, polished, lam, penalized)
            if pk < kkt:
                coef, kkt = polished, pk
                Gb = G @ coef
        if kkt <= tol:
            return LassoResult(coef, kkt, sweep)
    raise ConvergenceError(f"coordinate descent stopped with KKT residual {kkt:.3g}",
                           last_iterate=coef, residual=kkt)


def lambda_max(G, g, penalized) -> float:
    """Smallest penalty at which every penalised coefficient is zero."""
    G = np.asarray(G, dtype=float)
    g = np.asarray(g, dtype=float)
    pen = np.asarray(penalized, bool)
    free = np.flatnonzero(~pen & (np.diag(G) > 0))
    coef = np.zeros_like(g)
    if free.size:
        coef[free] = np.linalg.lstsq(G[np.ix_(free, free)], g[free], rcond=None)[0]
    grad = 2.0 * (G @ coef - g)
    return float(np.abs(grad[pen]).max()) if pen.any() else 0.0


def lagged_design(values, lag: int):
    """Rows ``[x_{t-1}, ..., x_{t-L}]`` (lag-major) and targets ``x_t`` for ``t >= L``."""
    values = np.asarray(values, dtype=float)
    T, P = values.shape
    X = np.concatenate([values[lag - l:T - l] for l in range(1, lag + 1)], axis=1)
    return X, values[lag:]


def fit_lagged_lasso(values, lam: float, lag: int, intercept: bool = True):
    """Per-target Lasso of ``x_t`` on all lagged series.

    Returns ``(beta, c)`` with ``beta`` of shape ``(P, P, L)`` indexed
    ``[target, source, lag - 1]``.
    """
    X, Y = lagged_design(values, lag)
    n, P = Y.shape
    Z = np.hstack([np.ones((n, 1)), X]) if intercept else X
    G = Z.T @ Z
    pen = np.ones(Z.shape[1], bool)
    if intercept:
        pen[0] = False
    beta = np.zeros((P, P, lag))
    c = np.zeros(P)
    for i in range(P):
        res = lasso_gram(G, Z.T @ Y[:, i], lam, pen)
        b = res.coef
        if intercept:
            c[i], b = b[0], b[1:]
        beta[i] = b.reshape(lag, P).T
    return beta, c
