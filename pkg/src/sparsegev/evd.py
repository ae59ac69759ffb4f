"""Extreme-value distribution primitives.

Gumbel and GEV densities, distribution functions and quantiles, inverse-cdf
sampling, Gumbel maximum likelihood, and the principal branch of the Lambert
W function.  Everything is vectorised over numpy arrays; scalar inputs give
scalar (float) outputs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DegenerateDataError, DomainError

EULER_GAMMA = 0.5772156649015329
_INV_E = np.exp(-1.0)


@dataclass(frozen=True)
class GumbelParams:
    """Location ``mu`` and scale ``sigma`` of a Gumbel distribution."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.mu) and np.isfinite(self.sigma)):
            raise DomainError(f"non-finite Gumbel parameters {self}")
        if self.sigma <= 0:
            raise DomainError(f"Gumbel scale must be positive, got {self.sigma}")

    @property
    def mean(self) -> float:
        return self.mu + EULER_GAMMA * self.sigma


@dataclass(frozen=True)
class GevParams:
    """Location, scale and shape of a generalized extreme value law."""

    mu: float
    sigma: float
    xi: float

    def __post_init__(self):
        if not all(np.isfinite([self.mu, self.sigma, self.xi])):
            raise DomainError(f"non-finite GEV parameters {self}")
        if self.sigma <= 0:
            raise DomainError(f"GEV scale must be positive, got {self.sigma}")


def _as_finite(z, name="z"):
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise DomainError(f"{name} must be finite")
    return z


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def gumbel_logpdf(z, p: GumbelParams):
    z = _as_finite(z)
    s = (z - p.mu) / p.sigma
    with np.errstate(over="ignore"):
        return _out(-np.log(p.sigma) - s - np.exp(-s))


def gumbel_pdf(z, p: GumbelParams):
    """Gumbel density ``exp(-s - exp(-s)) / sigma`` with ``s = (z - mu) / sigma``."""
    return _out(np.exp(gumbel_logpdf(z, p)))


def gumbel_cdf(z, p: GumbelParams):
    z = np.asarray(z, dtype=float)
    if np.any(np.isnan(z)):
        raise DomainError("z must not be NaN")
    with np.errstate(over="ignore"):
        return _out(np.exp(-np.exp(-(z - p.mu) / p.sigma)))


def gumbel_quantile(q, p: GumbelParams):
    """Inverse cdf, ``mu - sigma * log(-log q)`` for ``0 < q < 1``."""
    q = np.asarray(q, dtype=float)
    if np.any(~(q > 0) | ~(q < 1)):
        raise DomainError("quantile level must lie strictly inside (0, 1)")
    return _out(p.mu - p.sigma * np.log(-np.log(q)))


def gumbel_sample(p: GumbelParams, rng: np.random.Generator, size=None):
    """Draw Gumbel variates by inverting the cdf at uniform levels."""
    u = rng.uniform(np.finfo(float).tiny, 1.0, size=size)
    return gumbel_quantile(u, p)


def gev_cdf(z, p: GevParams):
    """GEV distribution function; ``xi == 0`` is the Gumbel branch.

    Outside the support ``1 + xi (z - mu) / sigma > 0`` the cdf is 0 below the
    lower endpoint (``xi > 0``) and 1 above the upper endpoint (``xi < 0``).
    """
    z = np.asarray(z, dtype=float)
    s = (z - p.mu) / p.sigma
    if p.xi == 0.0:
        return gumbel_cdf(z, GumbelParams(p.mu, p.sigma))
    arg = p.xi * s
    inside = arg > -1.0
    safe = np.where(inside, arg, 0.0)
    with np.errstate(over="ignore"):
        t = np.exp(-np.log1p(safe) / p.xi)
        val = np.exp(-t)
    outside_val = 0.0 if p.xi > 0 else 1.0
    return _out(np.where(inside, val, outside_val))


def gev_pdf(z, p: GevParams):
    z = np.asarray(z, dtype=float)
    if p.xi == 0.0:
        return gumbel_pdf(z, GumbelParams(p.mu, p.sigma))
    s = (z - p.mu) / p.sigma
    arg = p.xi * s
    inside = arg > -1.0
    safe = np.where(inside, arg, 0.0)
    with np.errstate(over="ignore"):
        log_t = -np.log1p(safe) / p.xi
        dens = np.exp((p.xi + 1.0) * log_t - np.exp(log_t)) / p.sigma
    return _out(np.where(inside, dens, 0.0))


# ---------------------------------------------------------------------------
# Lambert W, principal branch


def _lambertw_initial(x):
    w = np.empty_like(x)
    near = x < -0.25
    # branch-point series in p = sqrt(2 (e x + 1))
    p = np.sqrt(np.maximum(2.0 * (np.e * x[near] + 1.0), 0.0))
    w[near] = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    mid = (~near) & (x <= 3.0)
    w[mid] = np.log1p(x[mid]) * (1.0 - np.log1p(np.log1p(x[mid])) / (2.0 + np.log1p(x[mid])))
    big = x > 3.0
    l1 = np.log(x[big])
    l2 = np.log(l1)
    w[big] = l1 - l2 + l2 / l1
    return w


def lambert_w0(x, max_iter: int = 50):
    """Principal branch ``W0`` of ``w * exp(w) = x`` for ``x >= -1/e``.

    Halley iteration from a branch-aware starting point.  The result
    satisfies ``|w e^w - x| <= 1e-12 * max(1, |x|)``.
    """
    x_arr = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    if np.any(np.isnan(x_arr)):
        raise DomainError("Lambert W argument is NaN")
    # one ulp of slack at the branch point
    if np.any(x_arr < -_INV_E * (1.0 + 4 * np.finfo(float).eps)):
        raise DomainError("Lambert W0 is real only for x >= -1/e")
    x_arr = np.maximum(x_arr, -_INV_E)
    if np.any(np.isinf(x_arr)):
        raise DomainError("Lambert W argument must be finite")

    w = _lambertw_initial(x_arr)
    branch = x_arr == -_INV_E
    w[branch] = -1.0
    active = ~branch & (x_arr != 0.0)
    w[x_arr == 0.0] = 0.0
    for _ in range(max_iter):
        if not active.any():
            break
        wa = w[active]
        ew = np.exp(wa)
        f = wa * ew - x_arr[active]
        wp1 = wa + 1.0
        denom = ew * wp1 - (wa + 2.0) * f / (2.0 * wp1)
        # near the branch point the derivative vanishes and the residual is pure
        # rounding noise; such entries are left where they are
        at_floor = np.abs(f) <= 4.0 * np.finfo(float).eps * np.abs(x_arr[active])
        step = np.where((denom != 0.0) & ~at_floor, f / np.where(denom != 0.0, denom, 1.0), 0.0)
        w_new = wa - step
        w[active] = w_new
        # cubic convergence: the update after a 1e-12 step is already at rounding level
        done = at_floor | (np.abs(step) <= 1e-12 * (1.0 + np.abs(w_new)))
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    else:
        if active.any():
            raise ConvergenceError("Lambert W Halley iteration did not converge",
                                   last_iterate=_out(w if np.ndim(x) else w[0]))
    return _out(w if np.ndim(x) else w[0])


def lambert_w0_exp(y):
    """``W0(exp(y))`` without forming ``exp(y)``.

    For large ``y`` the argument overflows double precision; there the
    equivalent equation ``w + log w = y`` is solved by Newton from the
    asymptotic start ``y - log y + log y / y``.
    """
    scalar = np.ndim(y) == 0
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.empty_like(y)
    small = y <= 700.0
    if small.any():
        out[small] = np.atleast_1d(lambert_w0(np.exp(y[small])))
    big = ~small
    if big.any():
        yb = y[big]
        ly = np.log(yb)
        w = yb - ly + ly / yb
        for _ in range(50):
            step = (w + np.log(w) - yb) / (1.0 + 1.0 / w)
            w = w - step
            if np.all(np.abs(step) <= 1e-15 * w):
                break
        out[big] = w
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Maximum likelihood


def _profile_score(sigma, xs):
    # xs is shifted so min(xs) == 0; weights exp(-x / sigma) are <= 1
    e = np.exp(-xs / sigma)
    se = e.sum()
    wmean = (xs * e).sum() / se
    wvar = (xs * xs * e).sum() / se - wmean ** 2
    return sigma - xs.mean() + wmean, 1.0 + max(wvar, 0.0) / sigma ** 2


def gumbel_mle_score(samples, p: GumbelParams) -> np.ndarray:
    """Gradient of the mean Gumbel log-likelihood in ``(mu, sigma)``."""
    x = np.asarray(samples, dtype=float)
    s = (x - p.mu) / p.sigma
    e = np.exp(-s)
    d_mu = (1.0 - e).mean() / p.sigma
    d_sigma = (-1.0 + s - s * e).mean() / p.sigma
    return np.array([d_mu, d_sigma])


def fit_gumbel_mle(samples, tol: float = 1e-12, max_iter: int = 200) -> GumbelParams:
    """Maximum-likelihood Gumbel fit.

    The scale solves the profile equation
    ``sigma = mean(x) - sum(x e^{-x/sigma}) / sum(e^{-x/sigma})`` by Newton's
    method started at the moment estimate ``std * sqrt(6) / pi``; a step that
    leaves the current bracket is replaced by bisection.  The location then
    follows in closed form, ``mu = -sigma log mean(e^{-x/sigma})``.

    Raises
    ------
    DegenerateDataError
        Fewer than three samples or all samples equal.
    ConvergenceError
        Iteration cap reached; the last iterate is attached.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 3:
        raise DegenerateDataError("Gumbel fit needs at least 3 samples")
    if not np.all(np.isfinite(x)):
        raise DomainError("samples must be finite")
    if np.ptp(x) == 0.0:
        raise DegenerateDataError("all samples are equal; the scale MLE is at the boundary 0")

    shift = x.min()
    xs = x - shift
    spread = xs.std()
    sigma = max(spread * np.sqrt(6.0) / np.pi, 1e-3 * np.ptp(xs))
    lo, hi = 0.0, None
    for _ in range(max_iter):
        g, dg = _profile_score(sigma, xs)
        if g > 0:
            hi = sigma
        else:
            lo = sigma
        step = g / dg
        cand = sigma - step
        if hi is not None and not (lo < cand < hi):
            cand = 0.5 * (lo + hi)
        elif cand <= lo:
            cand = 0.5 * (lo + sigma)
        if abs(cand - sigma) <= tol * sigma:
            sigma = cand
            break
        sigma = cand
    else:
        raise ConvergenceError("Gumbel MLE did not converge", last_iterate=sigma)
    mu = shift - sigma * np.log(np.mean(np.exp(-xs / sigma)))
    return GumbelParams(float(mu), float(sigma))
