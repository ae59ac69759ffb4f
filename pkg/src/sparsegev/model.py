"""The sparse latent-location model for multivariate block maxima.

Each observation ``x[t, i]`` is Gumbel with latent location ``mu[t, i]`` and
series scale ``sigma[i]``.  The locations follow a sparse vector
autoregression

    mu[t, i] = c[i] + sum_l sum_j beta[i, j, l-1] * mu[t-l, j] + N(0, tau^2)

so a nonzero ``beta[i, j, :]`` means series ``i`` depends on the past of
series ``j``.  Latent histories are passed as ``(L, P)`` arrays whose row
``l-1`` holds the lag-``l`` values (row 0 is time ``t-1``).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError
from .evd import EULER_GAMMA
from .graph import DependencyGraph

SYNTH_P = 9
SYNTH_T = 40
SYNTH_LAG = 2
SYNTH_OFFSET_MEAN = 0.2
SYNTH_OFFSET_STD = 0.05
SYNTH_TAU = float(np.sqrt(0.1))
SYNTH_SIGMA = 0.05


@dataclass
class TimeSeriesPanel:
    """``T x P`` block of observations with series names."""

    names: list[str]
    values: np.ndarray
    t0: float | None = None
    interval: float | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise DimensionError("panel values must be a T x P matrix")
        if len(self.names) != self.values.shape[1]:
            raise DimensionError(
                f"{len(self.names)} names for {self.values.shape[1]} series")
        if len(set(self.names)) != len(self.names):
            raise DomainError("series names must be unique")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("panel contains missing or non-finite values")

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def P(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_array(cls, values, names=None):
        values = np.asarray(values, dtype=float)
        if names is None:
            names = [f"x{i + 1}" for i in range(values.shape[1])]
        return cls(list(names), values)

    def window(self, start: int, stop: int) -> "TimeSeriesPanel":
        t0 = None
        if self.t0 is not None:
            t0 = self.t0 + start * (self.interval or 1.0)
        return TimeSeriesPanel(list(self.names), self.values[start:stop].copy(), t0, self.interval)

    def permuted(self, order) -> "TimeSeriesPanel":
        order = list(order)
        return TimeSeriesPanel([self.names[k] for k in order], self.values[:, order].copy(),
                               self.t0, self.interval)


@dataclass
class LatentPath:
    mu: np.ndarray


@dataclass
class GroundTruthGraph:
    """Boolean ``P x P`` adjacency indexed ``[dst, src]``."""

    adjacency: np.ndarray

    @property
    def P(self) -> int:
        return self.adjacency.shape[0]

    def edges(self) -> list[tuple[int, int]]:
        dst, src = np.nonzero(self.adjacency)
        return [(int(s), int(d)) for d, s in zip(dst, src)]


@dataclass(frozen=True)
class SparseGevModel:
    """Parameters of the latent-location model.

    ``beta`` has shape ``(P, P, L)`` indexed ``[target, source, lag - 1]``.
    ``tau`` is a fixed hyperparameter, never estimated.
    """

    c: np.ndarray
    beta: np.ndarray
    sigma: np.ndarray
    tau: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).copy()
        beta = np.asarray(self.beta, dtype=float).copy()
        sigma = np.asarray(self.sigma, dtype=float).copy()
        P = c.shape[0]
        if c.ndim != 1 or sigma.shape != (P,):
            raise DimensionError("c and sigma must be vectors of length P")
        if beta.ndim != 3 or beta.shape[:2] != (P, P) or beta.shape[2] < 1:
            raise DimensionError(f"beta must have shape (P, P, L), got {beta.shape}")
        if not (np.all(sigma > 0) and self.tau > 0):
            raise DomainError("sigma and tau must be positive")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(beta))):
            raise DomainError("non-finite model coefficients")
        for a in (c, beta, sigma):
            a.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def P(self) -> int:
        return self.c.shape[0]

    @property
    def L(self) -> int:
        return self.beta.shape[2]

    def replace(self, **kw) -> "SparseGevModel":
        args = dict(c=self.c, beta=self.beta, sigma=self.sigma, tau=self.tau, meta=self.meta)
        args.update(kw)
        return SparseGevModel(**args)

    def to_dict(self) -> dict:
        return {
            "P": self.P,
            "L": self.L,
            "c": self.c.tolist(),
            "sigma": self.sigma.tolist(),
            "tau": self.tau,
            "beta": self.beta.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SparseGevModel":
        m = cls(np.array(d["c"], float), np.array(d["beta"], float),
                np.array(d["sigma"], float), float(d["tau"]))
        if m.P != d["P"] or m.L != d["L"]:
            raise DimensionError("model JSON P/L disagree with array shapes")
        return m

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SparseGevModel":
        return cls.from_dict(json.loads(text))


def _check_history(model: SparseGevModel, mu_history) -> np.ndarray:
    h = np.asarray(mu_history, dtype=float)
    if h.shape[-2:] != (model.L, model.P):
        raise DimensionError(
            f"history must have trailing shape (L, P) = ({model.L}, {model.P}), got {h.shape}")
    return h


def transition_means(model: SparseGevModel, mu_history) -> np.ndarray:
    """Transition means for all series; ``mu_history`` has shape ``(..., L, P)``."""
    h = _check_history(model, mu_history)
    # flatten (L, P) lag-major so that row l * P + j of B holds beta[:, j, l]
    B = model.beta.transpose(2, 1, 0).reshape(model.L * model.P, model.P)
    flat = h.reshape(h.shape[:-2] + (model.L * model.P,))
    return model.c + flat @ B


def transition_mean(model: SparseGevModel, i: int, mu_history) -> float:
    h = _check_history(model, mu_history)
    if h.ndim != 2:
        raise DimensionError("single-series transition mean takes one (L, P) history")
    return float(model.c[i] + np.sum(model.beta[i].T * h))


def simulate(model: SparseGevModel, T: int, rng: np.random.Generator, init=None,
             burn_in: int = 20) -> tuple[TimeSeriesPanel, LatentPath]:
    """Draw a latent path and Gumbel observations of length ``T``.

    The first ``L`` latent rows are ``init`` (default: the offsets ``c``),
    ``burn_in`` further steps are discarded, then ``T`` steps are emitted.
    """
    L, P = model.L, model.P
    if T <= L:
        raise DomainError(f"T = {T} must exceed the lag {L}")
    if init is None:
        init = np.tile(model.c, (L, 1))
    init = np.asarray(init, dtype=float)
    if init.shape != (L, P):
        raise DimensionError(f"init must have shape ({L}, {P})")
    total = L + burn_in + T
    mu = np.empty((total, P))
    # stored oldest first; row t - L is the initial state
    mu[:L] = init[::-1]
    noise = rng.normal(0.0, model.tau, size=(total, P))
    for t in range(L, total):
        hist = mu[t - L:t][::-1]
        mu[t] = transition_means(model, hist) + noise[t]
    mu = mu[total - T:]
    u = rng.uniform(np.finfo(float).tiny, 1.0, size=(T, P))
    x = mu - model.sigma * np.log(-np.log(u))
    return TimeSeriesPanel.from_array(x), LatentPath(mu)


def companion_spectral_radius(beta) -> float:
    beta = np.asarray(beta, dtype=float)
    P, _, L = beta.shape
    comp = np.zeros((P * L, P * L))
    comp[:P, :] = np.concatenate([beta[:, :, l] for l in range(L)], axis=1)
    if L > 1:
        comp[P:, :-P] = np.eye(P * (L - 1))
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


def random_sparse_beta(P: int, L: int, rng: np.random.Generator, in_degree: float = 2.0,
                       coef_bound: float = 0.8, max_radius: float = 0.95,
                       coef_floor: float = 0.0) -> np.ndarray:
    """Random sparse stationary coefficient tensor.

    Each ordered pair ``(target, source)`` is an edge with probability
    ``in_degree / P`` at one random lag; coefficients are uniform in
    ``[-coef_bound, coef_bound]``.  The tensor is shrunk by a factor 0.9 until
    the companion matrix has spectral radius below ``max_radius``.

    ``coef_floor > 0`` instead draws magnitudes uniform in
    ``[coef_floor, coef_bound]`` with a random sign, which gives "strong"
    dependencies for recovery experiments.
    """
    if not 0.0 <= coef_floor <= coef_bound:
        raise DomainError("need 0 <= coef_floor <= coef_bound")
    beta = np.zeros((P, P, L))
    mask = rng.random((P, P)) < in_degree / P
    lags = rng.integers(0, L, size=(P, P))
    if coef_floor > 0.0:
        coefs = rng.uniform(coef_floor, coef_bound, size=(P, P)) * rng.choice([-1.0, 1.0], size=(P, P))
    else:
        coefs = rng.uniform(-coef_bound, coef_bound, size=(P, P))
    tgt, src = np.nonzero(mask)
    beta[tgt, src, lags[tgt, src]] = coefs[tgt, src]
    while companion_spectral_radius(beta) >= max_radius:
        beta *= 0.9
    return beta


def ground_truth(model: SparseGevModel) -> GroundTruthGraph:
    return GroundTruthGraph(np.any(model.beta != 0.0, axis=2))


def synthetic_model(rng: np.random.Generator, P: int = SYNTH_P, L: int = SYNTH_LAG,
                    coef_floor: float = 0.0) -> SparseGevModel:
    """Model drawn from the benchmark recipe: offsets N(0.2, 0.05^2),
    ``tau^2 = 0.1``, ``sigma = 0.05`` and a sparse stationary ``beta``."""
    while True:
        beta = random_sparse_beta(P, L, rng, coef_floor=coef_floor)
        adj = np.any(beta != 0.0, axis=2)
        off = adj & ~np.eye(P, dtype=bool)
        # the edge-ranking score needs at least one cross edge and one non-edge
        if off.any() and (~off).sum() > P:
            break
    c = rng.normal(SYNTH_OFFSET_MEAN, SYNTH_OFFSET_STD, size=P)
    return SparseGevModel(c, beta, np.full(P, SYNTH_SIGMA), SYNTH_TAU)


def make_synthetic_suite(n_datasets: int, rng: np.random.Generator, T: int = SYNTH_T,
                         P: int = SYNTH_P, L: int = SYNTH_LAG, coef_floor: float = 0.0):
    """List of ``(panel, truth, model)`` triples, one per random sparse model."""
    if n_datasets < 1:
        raise DomainError("n_datasets must be >= 1")
    suite = []
    for _ in range(n_datasets):
        model = synthetic_model(rng, P, L, coef_floor)
        panel, _ = simulate(model, T, rng)
        suite.append((panel, ground_truth(model), model))
    return suite


def predict_next(model: SparseGevModel, mu_history) -> np.ndarray:
    """One-step forecast ``c + sum beta mu_bar + euler_gamma * sigma``.

    ``mu_history`` holds posterior means of the last ``L`` latent states,
    most recent first.  The Gumbel mean sits ``euler_gamma * sigma`` above
    the location.
    """
    h = _check_history(model, mu_history)
    if h.ndim != 2:
        raise DimensionError("prediction takes one (L, P) history")
    return transition_means(model, h) + EULER_GAMMA * model.sigma


def extract_graph(model: SparseGevModel, self_loops: bool = True) -> DependencyGraph:
    """Edge ``j -> i`` iff some ``beta[i, j, l] != 0``; score ``max_l |beta[i, j, l]|``."""
    scores = np.max(np.abs(model.beta), axis=2)
    return DependencyGraph.from_scores(scores, lag_weights=model.beta, self_loops=self_loops)
