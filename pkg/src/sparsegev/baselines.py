"""Comparison methods for graph learning and one-step prediction.

* Lasso-Granger: per-target Lasso of ``x_t`` on the lagged observations.
* Transfer entropy: pairwise kNN transfer-entropy scores, plus a kNN
  regression forecaster built on the highest-scoring parents.
* Gaussian copula: marginals mapped to normal scores, then the same lagged
  Lasso in the transformed space.

Each ``fit`` returns a :class:`~sparsegev.graph.DependencyGraph` and a
predictor.  A predictor is called with a ``(n, P)`` array of observations
(oldest first) and returns the forecast of the next row.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import ndtr, ndtri

from .entropy import knn_entropy, plugin_entropy
from .errors import DegenerateDataError, DimensionError, DomainError
from .evd import GumbelParams, fit_gumbel_mle, gumbel_cdf, gumbel_quantile
from .graph import DependencyGraph
from .lasso import fit_lagged_lasso, lagged_design
from .model import TimeSeriesPanel

CLAMP = 1e-10


# ---------------------------------------------------------------- normal cdf

def normal_cdf(z):
    """Standard normal distribution function."""
    out = ndtr(np.asarray(z, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def normal_cdf_inv(q):
    """Standard normal quantile; ``q`` must lie strictly inside (0, 1)."""
    q = np.asarray(q, dtype=float)
    if np.any(~((q > 0.0) & (q < 1.0))):
        raise DomainError("normal quantile needs 0 < q < 1")
    out = ndtri(q)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------- predictors

def _recent(history, lag: int) -> np.ndarray:
    h = np.asarray(history, dtype=float)
    if h.ndim != 2 or h.shape[0] < lag:
        raise DimensionError(f"need at least {lag} rows of history")
    return h[::-1][:lag]


@dataclass(frozen=True)
class LinearLagPredictor:
    """``x_hat = c + sum_l beta[:, :, l-1] x_{t-l}``."""

    beta: np.ndarray
    c: np.ndarray

    @property
    def lag(self) -> int:
        return self.beta.shape[2]

    def __call__(self, history) -> np.ndarray:
        h = _recent(history, self.lag)
        if h.shape[1] != self.c.shape[0]:
            raise DimensionError("history has the wrong number of series")
        return self.c + np.einsum("ijl,lj->i", self.beta, h)


def _lag_graph(beta) -> DependencyGraph:
    return DependencyGraph.from_scores(np.max(np.abs(beta), axis=2), lag_weights=beta)


# ---------------------------------------------------------------- Lasso-Granger

def lasso_granger(panel: TimeSeriesPanel, lam: float, lag: int):
    """Sparse lagged regression on the observed values.

    An unpenalised intercept is fitted for every target.  Edge scores are
    ``max_l |beta[i, j, l]|``.

    Returns
    -------
    graph : DependencyGraph
    predictor : LinearLagPredictor
    """
    if panel.T <= lag:
        raise DomainError(f"panel length {panel.T} must exceed lag {lag}")
    beta, c = fit_lagged_lasso(panel.values, lam, lag)
    return _lag_graph(beta), LinearLagPredictor(beta, c)


# ---------------------------------------------------------------- transfer entropy

@dataclass(frozen=True)
class TeConfig:
    """Settings for transfer entropy.

    ``k`` is the entropy neighbour order, ``lag`` the history length,
    ``estimator`` either ``"knn"`` or ``"plugin"`` (discrete data).  The
    forecaster uses the ``m_parents`` best-scoring sources and
    ``k_predict`` neighbours.
    """

    k: int = 4
    lag: int = 2
    estimator: str = "knn"
    m_parents: int = 3
    k_predict: int = 5

    def __post_init__(self):
        if self.k < 1 or self.lag < 1 or self.m_parents < 0 or self.k_predict < 1:
            raise DomainError(f"invalid transfer-entropy configuration {self}")
        if self.estimator not in ("knn", "plugin"):
            raise DomainError(f"unknown entropy estimator {self.estimator!r}")


def _lags(values: np.ndarray, j: int, lag: int) -> np.ndarray:
    T = values.shape[0]
    return np.column_stack([values[lag - l:T - l, j] for l in range(1, lag + 1)])


def transfer_entropy(panel: TimeSeriesPanel, src: int, dst: int, cfg: TeConfig = TeConfig()) -> float:
    """Estimated information flow ``src -> dst`` in nats.

    ``H(y | y_past) - H(y | y_past, s_past)`` with each conditional entropy
    written as a difference of joint entropies.
    """
    x = panel.values
    if panel.T <= cfg.lag + 1:
        raise DomainError(f"panel length {panel.T} too short for lag {cfg.lag}")
    if not (0 <= src < panel.P and 0 <= dst < panel.P):
        raise DimensionError("series index out of range")
    y = x[cfg.lag:, dst][:, None]
    own = _lags(x, dst, cfg.lag)
    other = _lags(x, src, cfg.lag)
    if cfg.estimator == "knn":
        def H(a):
            return knn_entropy(a, cfg.k)
    else:
        H = plugin_entropy
    h_own = H(np.hstack([y, own])) - H(own)
    both = np.hstack([own, other])
    h_both = H(np.hstack([y, both])) - H(both)
    return float(h_own - h_both)


def te_scores(panel: TimeSeriesPanel, cfg: TeConfig = TeConfig()) -> np.ndarray:
    """``P x P`` matrix of raw estimates indexed ``[dst, src]``; diagonal is 0."""
    P = panel.P
    s = np.zeros((P, P))
    for dst in range(P):
        for src in range(P):
            if src != dst:
                s[dst, src] = transfer_entropy(panel, src, dst, cfg)
    return s


def te_graph(panel: TimeSeriesPanel, cfg: TeConfig = TeConfig()) -> DependencyGraph:
    """All ordered pairs scored by transfer entropy clipped at 0, no self loops."""
    s = np.maximum(te_scores(panel, cfg), 0.0)
    return DependencyGraph.from_scores(s, keep_zero=True, self_loops=False)


@dataclass(frozen=True)
class KnnLagPredictor:
    """Average next value of the ``k`` nearest past states.

    The state of target ``i`` is its own last ``lag`` values followed by the
    last ``lag`` values of each parent in ``parents[i]``; distances are
    Euclidean.  Neighbours are searched in ``train``.
    """

    train: np.ndarray
    parents: tuple
    lag: int
    k: int

    def _state(self, values, i, rows):
        cols = (i,) + tuple(self.parents[i])
        return np.column_stack([values[rows - l, j] for j in cols for l in range(1, self.lag + 1)])

    def __call__(self, history) -> np.ndarray:
        h = np.asarray(history, dtype=float)
        if h.ndim != 2 or h.shape[0] < self.lag or h.shape[1] != self.train.shape[1]:
            raise DimensionError("history does not match the training panel")
        T = self.train.shape[0]
        rows = np.arange(self.lag, T)
        out = np.empty(h.shape[1])
        for i in range(h.shape[1]):
            X = self._state(self.train, i, rows)
            q = self._state(h, i, np.array([h.shape[0]]))
            k = min(self.k, X.shape[0])
            _, idx = cKDTree(X).query(q, k=k)
            out[i] = float(np.mean(self.train[rows[np.atleast_1d(idx[0])], i]))
        return out


def te_method(panel: TimeSeriesPanel, cfg: TeConfig = TeConfig()):
    """Transfer-entropy graph and the matching kNN forecaster."""
    raw = te_scores(panel, cfg)
    graph = DependencyGraph.from_scores(np.maximum(raw, 0.0), keep_zero=True, self_loops=False)
    parents = []
    for i in range(panel.P):
        order = [j for j in np.argsort(-raw[i], kind="stable") if j != i and raw[i, j] > 0.0]
        parents.append(tuple(int(j) for j in order[:cfg.m_parents]))
    return graph, KnnLagPredictor(panel.values.copy(), tuple(parents), cfg.lag, cfg.k_predict)


# ---------------------------------------------------------------- Gaussian copula

@dataclass(frozen=True)
class GumbelMarginal:
    params: GumbelParams

    def cdf(self, x):
        return gumbel_cdf(x, self.params)

    def quantile(self, q):
        return gumbel_quantile(q, self.params)


@dataclass(frozen=True)
class EmpiricalMarginal:
    """Rank-based cdf ``F(x) = #{x_k <= x} / (n + 1)``, linearly interpolated.

    The quantile interpolates the sorted sample against ``k / (n + 1)`` and
    is the exact inverse of ``cdf`` inside the sample range.
    """

    sorted_values: np.ndarray

    def _grid(self):
        n = self.sorted_values.shape[0]
        return np.arange(1, n + 1) / (n + 1.0)

    def cdf(self, x):
        out = np.interp(x, self.sorted_values, self._grid())
        return float(out) if np.ndim(out) == 0 else out

    def quantile(self, q):
        out = np.interp(q, self._grid(), self.sorted_values)
        return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class GaussianMarginal:
    """Normal marginal; the normal scores are then an affine map of ``x``."""

    mean: float
    std: float

    def cdf(self, x):
        return normal_cdf((np.asarray(x, dtype=float) - self.mean) / self.std)

    def quantile(self, q):
        return self.mean + self.std * normal_cdf_inv(q)


def fit_marginal(values, kind: str = "gev"):
    """Gumbel maximum-likelihood marginal (``"gev"``), empirical cdf
    (``"empirical"``) or moment-matched normal (``"gaussian"``)."""
    values = np.asarray(values, dtype=float)
    if kind == "gev":
        return GumbelMarginal(fit_gumbel_mle(values))
    if kind == "empirical":
        return EmpiricalMarginal(np.sort(values))
    if kind == "gaussian":
        std = float(values.std())
        if std == 0.0:
            raise DegenerateDataError("constant series has no normal marginal")
        return GaussianMarginal(float(values.mean()), std)
    raise DomainError(f"unknown marginal {kind!r}")


def to_normal_scores(x, marginal) -> np.ndarray:
    u = np.clip(marginal.cdf(x), CLAMP, 1.0 - CLAMP)
    return normal_cdf_inv(u)


def from_normal_scores(z, marginal):
    return marginal.quantile(np.clip(normal_cdf(z), CLAMP, 1.0 - CLAMP))


@dataclass(frozen=True)
class CopulaPredictor:
    marginals: tuple
    linear: LinearLagPredictor

    def transform(self, history) -> np.ndarray:
        h = np.asarray(history, dtype=float)
        return np.column_stack([to_normal_scores(h[:, i], m) for i, m in enumerate(self.marginals)])

    def __call__(self, history) -> np.ndarray:
        z_hat = self.linear(self.transform(history))
        return np.array([from_normal_scores(z_hat[i], m) for i, m in enumerate(self.marginals)])


def copula_method(panel: TimeSeriesPanel, lam: float, lag: int, marginal: str = "gev"):
    """Lagged Lasso on the normal scores ``Phi^-1(F_i(x))``.

    Returns the graph of the fitted lag coefficients and a predictor that
    forecasts in the normal-score space and maps back through
    ``F_i^-1(Phi(.))``.
    """
    if panel.T <= lag:
        raise DomainError(f"panel length {panel.T} must exceed lag {lag}")
    margs = tuple(fit_marginal(panel.values[:, i], marginal) for i in range(panel.P))
    U = np.column_stack([to_normal_scores(panel.values[:, i], m) for i, m in enumerate(margs)])
    beta, c = fit_lagged_lasso(U, lam, lag)
    return _lag_graph(beta), CopulaPredictor(margs, LinearLagPredictor(beta, c))


def lagged_ols(values, lag: int):
    """Unpenalised VAR fit by least squares, ``(beta, c)``; a reference for tests."""
    X, Y = lagged_design(values, lag)
    Z = np.hstack([np.ones((X.shape[0], 1)), X])
    coef = np.linalg.lstsq(Z, Y, rcond=None)[0]
    P = Y.shape[1]
    beta = coef[1:].T.reshape(P, lag, P).transpose(0, 2, 1)
    return beta, coef[0]
