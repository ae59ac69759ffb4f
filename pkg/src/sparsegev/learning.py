"""Generalized EM for the sparse latent-location model.

Each iteration runs the particle filter under the current parameters, then
updates ``(beta, c)`` by an expected Lasso per series and ``sigma`` by
Newton's method on the Gumbel part of the expected complete-data
log-likelihood.
"""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConvergenceError, DegenerateDataError, DimensionError, DomainError, SparseGevError
from .evd import fit_gumbel_mle
from .inference import PosteriorSummary, run_filter
from .lasso import kkt_residual, lasso_gram
from .model import SparseGevModel, TimeSeriesPanel, predict_next


@dataclass(frozen=True)
class EmConfig:
    lam: float = 0.1
    max_iters: int = 30
    tol: float = 1e-4
    particles: int = 1000
    tau: float = 0.2
    lag: int = 2
    seed: int = 0
    smoothing_lag: int | None = None

    def __post_init__(self):
        if self.lam < 0 or self.max_iters < 1 or self.tol <= 0:
            raise DomainError(f"invalid EM configuration {self}")
        if self.particles < 2 or self.tau <= 0 or self.lag < 1:
            raise DomainError(f"invalid EM configuration {self}")

    def replace(self, **kw) -> "EmConfig":
        d = asdict(self)
        d.update(kw)
        return EmConfig(**d)


@dataclass
class EmRecord:
    q: float
    penalized_q: float
    max_dbeta: float
    sigma: np.ndarray


@dataclass
class EmTrace:
    records: list[EmRecord] = field(default_factory=list)
    converged: bool = False
    summary: PosteriorSummary | None = None

    def __len__(self):
        return len(self.records)

    def penalized_q(self) -> np.ndarray:
        return np.array([r.penalized_q for r in self.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        P = len(self.records[0].sigma) if self.records else 0
        w.writerow(["iter", "q", "penalized_q", "max_dbeta"] + [f"sigma_{i + 1}" for i in range(P)])
        for k, r in enumerate(self.records):
            w.writerow([k + 1, repr(r.q), repr(r.penalized_q), repr(r.max_dbeta)]
                       + [repr(float(s)) for s in r.sigma])
        return buf.getvalue()


def _check(summary: PosteriorSummary, panel: TimeSeriesPanel, model: SparseGevModel | None = None):
    if summary.mean_mu.shape != panel.values.shape:
        raise DimensionError("posterior summary and panel shapes differ")
    if model is not None and (model.P != panel.P or model.L != summary.lag):
        raise DimensionError("model does not match the summary's lag structure")


def expected_gumbel_terms(summary: PosteriorSummary, panel: TimeSeriesPanel, sigma) -> np.ndarray:
    """Per-series ``sum_t E[(x - mu) / sigma + exp(-(x - mu) / sigma)]`` over ``t >= L``."""
    L = summary.lag
    r = panel.values[L:, None, :] - summary.particles[L:]
    u = r / np.asarray(sigma)
    return np.einsum("tn,tnp->p", summary.weights[L:], u + np.exp(-u))


def expected_sq_residual(summary: PosteriorSummary, i: int, coef) -> float:
    G, g, yy = summary.series_moments(i)
    return float(yy - 2.0 * coef @ g + coef @ G @ coef)


def _coef_vector(model: SparseGevModel, i: int) -> np.ndarray:
    return np.concatenate([[model.c[i]], model.beta[i].T.ravel()])


def q_value(summary: PosteriorSummary, panel: TimeSeriesPanel, model: SparseGevModel) -> float:
    """Monte Carlo expected complete-data log-likelihood (constants dropped).

    ``-sum_i (T - L) log sigma_i - sum E[(x-mu)/sigma + exp(-(x-mu)/sigma)
    + (mu - c - sum beta mu)^2 / (2 tau^2)]``.  The exponential term is
    averaged over the weighted particles, not evaluated at the mean.
    """
    _check(summary, panel, model)
    n_t = panel.T - model.L
    gum = expected_gumbel_terms(summary, panel, model.sigma)
    sq = np.array([expected_sq_residual(summary, i, _coef_vector(model, i)) for i in range(model.P)])
    return float(-n_t * np.log(model.sigma).sum() - gum.sum() - sq.sum() / (2.0 * model.tau ** 2))


def penalized_q_value(summary, panel, model, lam: float) -> float:
    # the M-step penalty lives on the squared-residual scale, i.e. lam / (2 tau^2) here
    return float(q_value(summary, panel, model) - lam * np.abs(model.beta).sum() / (2.0 * model.tau ** 2))


@dataclass
class MStepInfo:
    kkt: np.ndarray
    sweeps: np.ndarray


def m_step_beta_c(summary: PosteriorSummary, lam: float, lag: int | None = None,
                  warm: SparseGevModel | None = None, tol: float = 1e-10):
    """Expected Lasso for every series.

    For series ``i`` minimises ``E sum_t (mu_t^i - c^i - sum beta mu_{t-l})^2
    + lam ||beta^i||_1`` using the posterior cross moments; ``c`` is not
    penalised.  Returns ``(beta, c, info)``.
    """
    L = summary.lag if lag is None else lag
    if L != summary.lag:
        raise DimensionError(f"summary was accumulated with lag {summary.lag}, not {L}")
    P = summary.P
    d = 1 + L * P
    pen = np.ones(d, bool)
    pen[0] = False
    beta = np.zeros((P, P, L))
    c = np.zeros(P)
    kkt = np.zeros(P)
    sweeps = np.zeros(P, int)
    for i in range(P):
        G, g, _ = summary.series_moments(i)
        coef0 = _coef_vector(warm, i) if warm is not None else None
        res = lasso_gram(G, g, lam, pen, coef0=coef0, tol=tol)
        c[i] = res.coef[0]
        beta[i] = res.coef[1:].reshape(L, P).T
        kkt[i] = kkt_residual(G, g, res.coef, lam, pen)
        sweeps[i] = res.n_sweeps
    return beta, c, MStepInfo(kkt, sweeps)


def _sigma_score(s, r, w, n_t):
    # score in log-scale s = log sigma; decreasing in s
    u = r * np.exp(-s)
    with np.errstate(over="ignore"):
        e = np.exp(-u)
    h = -n_t + np.sum(w * u * (1.0 - e))
    dh = -np.sum(w * u * (1.0 - e + u * e))
    return h, dh


def m_step_sigma(summary: PosteriorSummary, panel: TimeSeriesPanel, sigma_old,
                 tol: float = 1e-10, max_iter: int = 200) -> np.ndarray:
    """Newton-Raphson update of every series scale.

    Maximises ``-(T-L) log sigma - sum_t E[(x-mu)/sigma + exp(-(x-mu)/sigma)]``
    over ``log sigma``; the expectation of the exponential is recomputed from
    the particles at each iterate.  The root of the score is bracketed by
    doubling steps in ``log sigma`` and then refined by Newton steps, with
    bisection whenever a step leaves the bracket or shrinks it too slowly.
    """
    _check(summary, panel)
    sigma_old = np.asarray(sigma_old, dtype=float)
    if np.any(sigma_old <= 0):
        raise DomainError("sigma_old must be positive")
    L = summary.lag
    n_t = panel.T - L
    w = summary.weights[L:]
    out = np.empty(summary.P)
    for i in range(summary.P):
        r = panel.values[L:, i][:, None] - summary.particles[L:, :, i]
        if np.all(np.abs(r) == 0.0):
            raise DegenerateDataError(f"series {i}: all residuals are zero; sigma -> 0")
        s = np.log(sigma_old[i])
        h, dh = _sigma_score(s, r, w, n_t)
        # bracket the root: the score is decreasing in log sigma
        step = 1.0 if h > 0 else -1.0
        lo = hi = s
        for _ in range(max_iter):
            nxt = (hi if step > 0 else lo) + step
            hn, _ = _sigma_score(nxt, r, w, n_t)
            if step > 0:
                lo, hi = hi, nxt
            else:
                lo, hi = nxt, lo
            if (hn <= 0) if step > 0 else (hn >= 0):
                break
            step *= 2.0
        # safeguarded Newton: bisect when a step leaves the bracket or stalls
        s = 0.5 * (lo + hi)
        prev_width = hi - lo
        for _ in range(max_iter):
            h, dh = _sigma_score(s, r, w, n_t)
            if abs(h) <= tol or hi - lo <= 1e-15 * (1.0 + abs(s)):
                break
            if h > 0:
                lo = s
            else:
                hi = s
            with np.errstate(invalid="ignore"):
                cand = s - h / dh if dh < 0 else np.nan
            if not (lo < cand < hi) or abs(cand - s) > 0.5 * prev_width:
                cand = 0.5 * (lo + hi)
            prev_width = abs(cand - s)
            s = cand
        else:
            raise ConvergenceError(f"sigma update for series {i} did not converge",
                                   last_iterate=float(np.exp(s)), residual=float(h))
        out[i] = np.exp(s)
    return out


def sigma_score(summary: PosteriorSummary, panel: TimeSeriesPanel, sigma) -> np.ndarray:
    """Derivative of the Gumbel Q-terms in ``log sigma`` (zero at the M-step solution)."""
    L = summary.lag
    return np.array([
        _sigma_score(np.log(sigma[i]), panel.values[L:, i][:, None] - summary.particles[L:, :, i],
                     summary.weights[L:], panel.T - L)[0]
        for i in range(summary.P)])


def initial_model(panel: TimeSeriesPanel, config: EmConfig) -> SparseGevModel:
    """``beta = 0``; ``c`` and ``sigma`` from per-series marginal Gumbel fits."""
    P = panel.P
    fits = [fit_gumbel_mle(panel.values[:, i]) for i in range(P)]
    c = np.array([f.mu for f in fits])
    sigma = np.array([f.sigma for f in fits])
    return SparseGevModel(c, np.zeros((P, P, config.lag)), sigma, config.tau)


def fit(panel: TimeSeriesPanel, config: EmConfig) -> tuple[SparseGevModel, EmTrace]:
    """Run generalized EM until the penalised Q stalls or ``max_iters``.

    Every E-step reuses a generator seeded with ``config.seed`` (common random
    numbers), so the Monte Carlo Q is a deterministic function of the
    parameters and its trace is free of resampling jitter.
    """
    if panel.T <= config.lag:
        raise DomainError(f"panel length {panel.T} must exceed lag {config.lag}")
    model = initial_model(panel, config)
    trace = EmTrace()
    prev = None
    for it in range(config.max_iters):
        try:
            summary = run_filter(panel, model, config.particles, np.random.default_rng(config.seed),
                                 config.smoothing_lag)
            beta, c, _ = m_step_beta_c(summary, config.lam, config.lag, warm=model)
            new = model.replace(beta=beta, c=c)
            sigma = m_step_sigma(summary, panel, model.sigma)
            new = new.replace(sigma=sigma)
        except SparseGevError as err:
            err.args = (f"EM iteration {it + 1}: {err.args[0] if err.args else err}",)
            raise
        pq = penalized_q_value(summary, panel, new, config.lam)
        trace.records.append(EmRecord(q_value(summary, panel, new), pq,
                                      float(np.abs(new.beta - model.beta).max()), new.sigma.copy()))
        model = new
        trace.summary = summary
        if prev is not None and abs(pq - prev) <= config.tol * abs(prev):
            trace.converged = True
            break
        prev = pq
    return model, trace


def posterior_history(panel: TimeSeriesPanel, model: SparseGevModel, n_particles: int,
                      seed: int) -> np.ndarray:
    """Filtered posterior means of the last ``L`` latent states, most recent first."""
    summary = run_filter(panel, model, n_particles, np.random.default_rng(seed))
    return summary.mean_mu[::-1][:model.L]


def forecast(panel: TimeSeriesPanel, model: SparseGevModel, n_particles: int, seed: int) -> np.ndarray:
    return predict_next(model, posterior_history(panel, model, n_particles, seed))


def one_step_errors(panel: TimeSeriesPanel, model: SparseGevModel, start: int,
                    n_particles: int, seed: int) -> np.ndarray:
    """Forecast errors for ``x_t``, ``t >= start``, each from filtered means up to ``t - 1``."""
    summary = run_filter(panel, model, n_particles, np.random.default_rng(seed))
    L = model.L
    errs = []
    for t in range(max(start, L), panel.T):
        hist = summary.filter_mean[t - L:t][::-1]
        errs.append(predict_next(model, hist) - panel.values[t])
    return np.array(errs)


def select_lambda(panel: TimeSeriesPanel, config_grid: list[EmConfig],
                  train_frac: float = 0.8) -> EmConfig:
    """Forward-chaining choice of the penalty.

    Fits on the first ``train_frac`` of the time steps, scores one-step RMSE
    on the rest, and returns the best config; ties go to the larger penalty.
    """
    if not config_grid:
        raise DomainError("empty configuration grid")
    if len(config_grid) == 1:
        return config_grid[0]
    n_train = int(np.floor(train_frac * panel.T))
    train = panel.window(0, n_train)
    scores = []
    failures = []
    for cfg in config_grid:
        try:
            model, _ = fit(train, cfg)
            e = one_step_errors(panel, model, n_train, cfg.particles, cfg.seed)
            scores.append(float(np.sqrt(np.mean(e ** 2))))
        except SparseGevError as err:
            failures.append(f"lam={cfg.lam}: {err}")
            scores.append(np.inf)
    if not np.isfinite(scores).any():
        raise SparseGevError("every candidate fit failed: " + "; ".join(failures))
    best = min(range(len(config_grid)), key=lambda k: (scores[k], -config_grid[k].lam))
    return config_grid[best]


@dataclass(frozen=True)
class SparseGevPredictor:
    """Forecaster with the same calling convention as the baseline predictors.

    Called with a ``(n, P)`` array of observations (oldest first), it filters
    them under ``model`` and returns the Gumbel-mean forecast of the next row.
    """

    model: SparseGevModel
    particles: int = 1000
    seed: int = 0

    def __call__(self, history) -> np.ndarray:
        panel = TimeSeriesPanel.from_array(np.asarray(history, dtype=float))
        return forecast(panel, self.model, self.particles, self.seed)
