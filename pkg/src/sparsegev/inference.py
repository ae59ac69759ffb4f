"""Particle approximation of the latent-location posterior.

Every series proposes from a Gaussian placed at the mode of
``Gumbel(x | mu, sigma) * N(mu | mu_tilde, tau^2)``; that mode has a closed
form through the Lambert W function.  Importance weights use the standard
correction ``p(x | mu) p(mu | history) / q(mu)`` in log space and particles
are systematically resampled after every step.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DimensionError, DomainError, ParticleDegeneracyError
from .evd import lambert_w0_exp
from .model import SparseGevModel, TimeSeriesPanel, transition_means


def proposal_params(x, mu_tilde, sigma, tau, variance: str = "fixed"):
    """Mean and variance of the Gaussian proposal for one latent location.

    With ``gamma = tau / sigma`` the mean is
    ``mu_tilde + gamma tau - sigma W0(gamma^2 exp((mu_tilde - x) / sigma + gamma^2))``,
    the exact mode of ``Gumbel(x | mu, sigma) N(mu | mu_tilde, tau^2)``.
    ``variance="fixed"`` gives ``tau^2 / (gamma^2 + 1)``; ``"laplace"`` gives
    the inverse curvature at the mode, ``tau^2 / (1 + W)``, which agrees with
    the fixed value when ``x == mu_tilde``.  Broadcasts over arrays.
    """
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0) or tau <= 0:
        raise DomainError("sigma and tau must be positive")
    x = np.asarray(x, dtype=float)
    mu_tilde = np.asarray(mu_tilde, dtype=float)
    gamma = tau / sigma
    # W0(gamma^2 e^y) = W0(e^{y + 2 log gamma}), evaluated without overflow
    with np.errstate(over="ignore"):
        log_arg = (mu_tilde - x) / sigma + gamma ** 2 + 2.0 * np.log(gamma)
    w = lambert_w0_exp(log_arg)
    mean = mu_tilde + gamma * tau - sigma * w
    if variance == "fixed":
        var = np.broadcast_to(tau ** 2 / (gamma ** 2 + 1.0), np.shape(mean))
    elif variance == "laplace":
        var = tau ** 2 / (1.0 + np.asarray(w))
    else:
        raise DomainError(f"unknown proposal variance rule {variance!r}")
    if np.ndim(mean) == 0:
        return float(mean), float(var)
    return mean, np.array(var, dtype=float)


def systematic_resample(weights, rng: np.random.Generator) -> np.ndarray:
    """Ancestor indices by systematic resampling (one uniform, N strata)."""
    n = weights.shape[0]
    positions = (rng.random() + np.arange(n)) / n
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, positions, side="right").clip(max=n - 1)


def effective_sample_size(weights) -> float:
    return float(1.0 / np.sum(np.square(weights)))


@dataclass
class ParticleEnsemble:
    """Particles at one time step.

    ``histories`` has shape ``(N, L, P)``, row 0 being the most recent
    latent values (the current ``particles`` after a step).
    """

    particles: np.ndarray
    weights: np.ndarray
    histories: np.ndarray
    ess: float
    t: int = 0
    resampled: bool = False
    ancestors: np.ndarray | None = None
    log_evidence: float = 0.0

    def history_weights(self) -> np.ndarray:
        """Weights attached to ``histories`` (uniform once resampled)."""
        n = self.histories.shape[0]
        return np.full(n, 1.0 / n) if self.resampled else self.weights


@dataclass
class PosteriorSummary:
    """Weighted particle moments for the expectation step.

    ``cross_terms`` is the sum over ``t >= L`` of ``E[z_t z_t']`` with
    ``z_t = [1, mu_{t-1}, ..., mu_{t-L}, mu_t]`` (each block length ``P``).
    ``particles[t]`` and ``weights[t]`` are the weighted path samples behind
    the time-``t`` moments, kept for non-quadratic expectations.
    """

    mean_mu: np.ndarray
    second_moment: np.ndarray
    cross_terms: np.ndarray
    particles: np.ndarray
    weights: np.ndarray
    lag: int
    ess: np.ndarray
    min_weight: np.ndarray
    max_weight: np.ndarray
    filter_mean: np.ndarray | None = None
    loglik: float = float("nan")

    @property
    def T(self) -> int:
        return self.mean_mu.shape[0]

    @property
    def P(self) -> int:
        return self.mean_mu.shape[1]

    def series_moments(self, i: int):
        """``(G, g, yy)`` for target ``i``: moments of regressors ``[1, lags]`` and of ``mu_t^i``."""
        d = 1 + self.lag * self.P
        S = self.cross_terms
        return S[:d, :d], S[:d, d + i], S[d + i, d + i]

    def ess_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "ess", "min_weight", "max_weight"])
        for t in range(self.T):
            w.writerow([t, repr(float(self.ess[t])), repr(float(self.min_weight[t])),
                        repr(float(self.max_weight[t]))])
        return buf.getvalue()


def init_ensemble(x_init, model: SparseGevModel, n: int, rng: np.random.Generator) -> ParticleEnsemble:
    """Particles for the first ``L`` steps, drawn from ``N(x_t, tau^2)``.

    ``x_init`` has shape ``(L, P)`` in time order; weights are uniform.
    """
    L, P = model.L, model.P
    x_init = np.asarray(x_init, dtype=float)
    draws = x_init[None] + model.tau * rng.standard_normal((n, L, P))
    hist = draws[:, ::-1, :].copy()
    w = np.full(n, 1.0 / n)
    return ParticleEnsemble(hist[:, 0, :].copy(), w, hist, float(n), t=L - 1)


def pf_step(ens: ParticleEnsemble, x_t, model: SparseGevModel, rng: np.random.Generator,
            resample: bool = True, variance: str = "laplace") -> ParticleEnsemble:
    """Advance the ensemble one step: propose, weight, (optionally) resample.

    The returned ensemble carries the normalised pre-resampling weights in
    ``weights`` and the matching samples in ``particles``; its ``histories``
    are already resampled when ``resample`` is set, so filtering moments at
    this step must be read from ``particles``/``weights``.
    """
    x_t = np.asarray(x_t, dtype=float)
    if x_t.shape != (model.P,):
        raise DimensionError(f"observation must have length {model.P}")
    mu_tilde = transition_means(model, ens.histories)
    mean, var = proposal_params(x_t[None, :], mu_tilde, model.sigma[None, :], model.tau, variance)
    sd = np.sqrt(var)
    eps = rng.standard_normal(mean.shape)
    mu = mean + sd * eps
    # overflow here means an observation no particle can explain; the
    # degeneracy check below reports it
    with np.errstate(over="ignore", invalid="ignore"):
        s = (x_t - mu) / model.sigma
        log_lik = -np.log(model.sigma) - s - np.exp(-s)
        log_prior = -0.5 * ((mu - mu_tilde) / model.tau) ** 2 - np.log(model.tau)
        # the 2 pi constants of prior and proposal cancel
        log_q = -0.5 * eps ** 2 - np.log(sd)
        logw = np.log(ens.history_weights()) + np.sum(log_lik + log_prior - log_q, axis=1)
    if not np.any(np.isfinite(logw)):
        raise ParticleDegeneracyError(
            f"all particle weights vanished at t={ens.t + 1}", t=ens.t + 1,
            diagnostics={"max_log_weight": float(np.nanmax(logw)) if np.any(~np.isnan(logw)) else None})
    logw = np.where(np.isnan(logw), -np.inf, logw)
    log_z = float(logsumexp(logw))
    w = np.exp(logw - log_z)
    w /= w.sum()
    ess = effective_sample_size(w)
    idx = None
    if resample:
        idx = systematic_resample(w, rng)
        hist = np.concatenate([mu[idx, None, :], ens.histories[idx, :-1, :]], axis=1)
    else:
        hist = np.concatenate([mu[:, None, :], ens.histories[:, :-1, :]], axis=1)
    return ParticleEnsemble(mu, w, hist, ess, t=ens.t + 1, resampled=resample,
                            ancestors=idx if resample else None, log_evidence=log_z)


def run_filter(panel: TimeSeriesPanel, model: SparseGevModel, n_particles: int,
               rng: np.random.Generator, smoothing_lag: int | None = None,
               variance: str = "laplace") -> PosteriorSummary:
    """Filter the whole panel and collect the moments needed by the M-step.

    Moments for time ``t`` are read off the ancestral paths of the particles
    alive at ``s = min(t + smoothing_lag, T - 1)``, weighted by the filtering
    weights at ``s``; ``smoothing_lag=None`` traces every path back from the
    final step, ``0`` uses plain filtering marginals.  ``filter_mean`` always
    holds the filtering means ``E[mu_t | x_1..x_t]`` and ``loglik`` the
    particle estimate of ``log p(x_{L+1..T} | x_{1..L})``.
    """
    x = panel.values
    T, P = x.shape
    L = model.L
    if P != model.P:
        raise DimensionError(f"panel has {P} series, model has {model.P}")
    if T <= L:
        raise DomainError(f"panel length {T} must exceed lag {L}")
    if n_particles < 2:
        raise DomainError("need at least 2 particles")
    n = n_particles
    particles = np.empty((T, n, P))
    weights = np.empty((T, n))
    # parents[t][k]: index at t-1 of the parent of particle k at t
    parents = np.tile(np.arange(n), (T, 1))
    ess = np.empty(T)
    wmin = np.empty(T)
    wmax = np.empty(T)

    ens = init_ensemble(x[:L], model, n, rng)
    for t in range(L):
        particles[t] = ens.histories[:, L - 1 - t, :]
        weights[t] = ens.weights
    ess[:L] = n
    wmin[:L] = wmax[:L] = 1.0 / n
    loglik = 0.0

    for t in range(L, T):
        if ens.ancestors is not None:
            parents[t] = ens.ancestors
        try:
            ens = pf_step(ens, x[t], model, rng, variance=variance)
        except ParticleDegeneracyError as err:
            err.diagnostics.update(ess_trace=ess[:t].tolist(), min_weight=wmin[:t].tolist(),
                                   max_weight=wmax[:t].tolist())
            raise
        particles[t] = ens.particles
        weights[t] = ens.weights
        ess[t] = ens.ess
        wmin[t] = ens.weights.min()
        wmax[t] = ens.weights.max()
        loglik += ens.log_evidence

    filter_mean = np.einsum("tn,tnp->tp", weights, particles)
    lag = T if smoothing_lag is None else int(smoothing_lag)
    if lag < 0:
        raise DomainError("smoothing_lag must be >= 0")

    # path-traced samples: sm_particles[t] is the lineage value at t of the
    # particles alive at s(t), carrying weights sm_weights[t] = weights[s(t)]
    sm_particles = np.empty_like(particles)
    sm_weights = np.empty_like(weights)
    d = 1 + L * P + P
    S = np.zeros((d, d))
    z = np.empty((n, d))
    z[:, 0] = 1.0
    for t in range(T):
        s_end = min(t + lag, T - 1)
        lin = np.arange(n)
        window = {}
        for r in range(s_end, max(t - L, 0) - 1, -1):
            if r <= t:
                window[r] = lin
            lin = parents[r][lin]
        w = weights[s_end]
        sm_particles[t] = particles[t][window[t]]
        sm_weights[t] = w
        if t < L:
            continue
        for l in range(1, L + 1):
            z[:, 1 + (l - 1) * P:1 + l * P] = particles[t - l][window[t - l]]
        z[:, 1 + L * P:] = sm_particles[t]
        S += (z * w[:, None]).T @ z

    mean_mu = np.einsum("tn,tnp->tp", sm_weights, sm_particles)
    second = np.einsum("tn,tnp->tp", sm_weights, sm_particles ** 2)
    return PosteriorSummary(mean_mu, second, S, sm_particles, sm_weights, L, ess, wmin, wmax,
                            filter_mean=filter_mean, loglik=loglik)
