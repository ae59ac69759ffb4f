"""Benchmark protocol: normalisation, edge-ranking AUC, sliding-window RMSE.

Every method is wrapped in a :class:`MethodSpec`, which picks its penalty by
forward-chaining validation and then returns a graph and a one-step
predictor.  :func:`run_benchmark` runs each method on each dataset for both
tasks and collects :class:`EvalReport` records; its JSON output depends only
on the inputs and seeds, so repeated runs are byte-identical.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata

from .baselines import TeConfig, copula_method, lasso_granger, te_method
from .errors import DegenerateDataError, DimensionError, DomainError, SparseGevError
from .graph import DependencyGraph
from .learning import EmConfig, SparseGevPredictor, fit, select_lambda
from .model import GroundTruthGraph, TimeSeriesPanel, extract_graph, make_synthetic_suite

METHODS = ("sparse-gev", "granger", "te", "copula")


# ---------------------------------------------------------------- preprocessing

@dataclass(frozen=True)
class Normalization:
    """Per-series minima and maxima used for ``[0, 1]`` scaling."""

    mins: np.ndarray
    maxs: np.ndarray

    def apply(self, values) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.mins) / (self.maxs - self.mins)

    def inverse(self, values) -> np.ndarray:
        return np.asarray(values, dtype=float) * (self.maxs - self.mins) + self.mins

    def to_dict(self) -> dict:
        return {"min": self.mins.tolist(), "max": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalization":
        return cls(np.array(d["min"], float), np.array(d["max"], float))


def normalize_panel(panel: TimeSeriesPanel):
    """Min-max scale every series to ``[0, 1]``.

    Returns the scaled panel and the :class:`Normalization` needed to map
    predictions back.  Raises :class:`DegenerateDataError` on a constant
    series.
    """
    v = panel.values
    lo, hi = v.min(axis=0), v.max(axis=0)
    flat = np.flatnonzero(hi == lo)
    if flat.size:
        raise DegenerateDataError(f"series {panel.names[flat[0]]!r} is constant")
    rec = Normalization(lo, hi)
    scaled = np.clip(rec.apply(v), 0.0, 1.0)
    return TimeSeriesPanel(list(panel.names), scaled, panel.t0, panel.interval), rec


def block_maxima(raw, block: int) -> np.ndarray:
    """Maxima over consecutive non-overlapping blocks along axis 0.

    A trailing partial block is dropped.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.size == 0:
        raise DomainError("empty input")
    if block < 1:
        raise DomainError("block length must be >= 1")
    n = raw.shape[0] // block
    if n == 0:
        raise DomainError(f"series of length {raw.shape[0]} is shorter than one block")
    return raw[:n * block].reshape((n, block) + raw.shape[1:]).max(axis=1)


# ---------------------------------------------------------------- scoring

def edge_auc(graph: DependencyGraph, truth: GroundTruthGraph, self_loops: bool = False) -> float:
    """Probability that a true edge outscores a non-edge, ties counting one half.

    Pairs absent from ``graph`` score 0.  Diagonal pairs are left out
    unless ``self_loops``.
    """
    if graph.P != truth.P:
        raise DimensionError(f"graph has {graph.P} nodes, truth has {truth.P}")
    scores = graph.score_matrix()
    adj = np.asarray(truth.adjacency, bool)
    mask = np.ones_like(adj) if self_loops else ~np.eye(truth.P, dtype=bool)
    s, y = scores[mask], adj[mask]
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise DomainError("AUC is undefined without both true edges and non-edges")
    ranks = rankdata(s)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def rmse(errors) -> float:
    e = np.asarray(errors, dtype=float)
    return float(np.sqrt(np.mean(e ** 2)))


@dataclass
class EvalReport:
    """Scores of one method on one dataset.

    ``window_errors[s]`` holds the per-node forecast errors of window ``s``,
    or ``None`` if that window failed.  ``wall_time`` is kept out of
    :meth:`to_dict` so reports can be compared byte for byte.
    """

    method: str
    dataset: int = 0
    auc: float | None = None
    rmse: float | None = None
    window_errors: list = field(default_factory=list)
    partial: bool = False
    errors: list = field(default_factory=list)
    lam_graph: float | None = None
    lam_predict: float | None = None
    wall_time: float = 0.0

    def recompute_rmse(self) -> float | None:
        ok = [w for w in self.window_errors if w is not None]
        return rmse(ok) if ok else None

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("wall_time")
        return d


# ---------------------------------------------------------------- methods

@dataclass
class FittedMethod:
    graph: DependencyGraph
    predictor: object
    lam: float | None
    model: object = None


@dataclass(frozen=True)
class MethodSpec:
    """A comparison method with its settings.

    ``lam_grid`` is searched by forward-chaining validation (fit on the
    first ``train_frac`` of the panel, one-step RMSE on the rest, ties to
    the larger penalty).  Transfer entropy has no penalty.
    """

    name: str
    lam_grid: tuple = (0.03, 0.1, 0.3)
    lag: int = 2
    em: EmConfig = EmConfig()
    te: TeConfig = TeConfig()
    marginal: str = "gev"
    train_frac: float = 0.8

    def __post_init__(self):
        if self.name not in METHODS:
            raise DomainError(f"unknown method {self.name!r}; choose from {', '.join(METHODS)}")
        if not self.lam_grid:
            raise DomainError("empty penalty grid")

    def _fit_at(self, panel: TimeSeriesPanel, lam: float | None) -> FittedMethod:
        if self.name == "granger":
            g, p = lasso_granger(panel, lam, self.lag)
            return FittedMethod(g, p, lam)
        if self.name == "copula":
            g, p = copula_method(panel, lam, self.lag, self.marginal)
            return FittedMethod(g, p, lam)
        if self.name == "te":
            g, p = te_method(panel, self.te)
            return FittedMethod(g, p, None)
        cfg = self.em.replace(lam=lam, lag=self.lag)
        model, trace = fit(panel, cfg)
        return FittedMethod(extract_graph(model), SparseGevPredictor(model, cfg.particles, cfg.seed),
                            lam, model=(model, trace))

    def select_lam(self, panel: TimeSeriesPanel) -> float | None:
        if self.name == "te":
            return None
        if len(self.lam_grid) == 1:
            return float(self.lam_grid[0])
        if self.name == "sparse-gev":
            grid = [self.em.replace(lam=float(l), lag=self.lag) for l in self.lam_grid]
            return select_lambda(panel, grid, self.train_frac).lam
        n_train = int(np.floor(self.train_frac * panel.T))
        scores = []
        for lam in self.lam_grid:
            try:
                pred = self._fit_at(panel.window(0, n_train), float(lam)).predictor
                e = [pred(panel.values[:t]) - panel.values[t] for t in range(n_train, panel.T)]
                scores.append(rmse(e))
            except SparseGevError:
                scores.append(np.inf)
        if not np.isfinite(scores).any():
            raise SparseGevError(f"{self.name}: every penalty in the grid failed")
        best = min(range(len(scores)), key=lambda k: (scores[k], -self.lam_grid[k]))
        return float(self.lam_grid[best])

    def fit(self, panel: TimeSeriesPanel, lam: float | None = None) -> FittedMethod:
        """Fit at ``lam``, or at the validated penalty when ``lam`` is None."""
        if lam is None:
            lam = self.select_lam(panel)
        return self._fit_at(panel, lam)


def sliding_window_rmse(panel: TimeSeriesPanel, method: MethodSpec, S: int = 10,
                        lam: float | None = None) -> EvalReport:
    """One-step forecasts from ``S`` shifted training windows.

    Window ``s = 1..S`` trains on rows ``s-1 .. T-S+s-2`` (0-based) and is
    scored on row ``T-S+s-1``.  The penalty is validated once on the first
    window unless given.  A failing window is recorded and the report is
    marked partial.
    """
    T = panel.T
    if S < 1:
        raise DomainError("S must be >= 1")
    if T - S <= method.lag + 1:
        raise DomainError(f"panel length {T} leaves too little training data for S={S}")
    report = EvalReport(method.name)
    if lam is None:
        lam = method.select_lam(panel.window(0, T - S))
    report.lam_predict = lam
    for s in range(1, S + 1):
        train = panel.window(s - 1, T - S + s - 1)
        try:
            pred = method.fit(train, lam).predictor
            e = np.asarray(pred(train.values), dtype=float) - panel.values[T - S + s - 1]
            report.window_errors.append([float(v) for v in e])
        except SparseGevError as err:
            report.window_errors.append(None)
            report.partial = True
            report.errors.append(f"window {s}: {type(err).__name__}: {err}")
    report.rmse = report.recompute_rmse()
    return report


# ---------------------------------------------------------------- benchmark

@dataclass(frozen=True)
class BenchmarkConfig:
    datasets: int = 8
    seed: int = 0
    S: int = 10
    self_loops: bool = False
    methods: tuple = METHODS


@dataclass
class BenchmarkResult:
    config: dict
    reports: list

    def summary(self) -> dict:
        out = {}
        for name in dict.fromkeys(r.method for r in self.reports):
            rs = [r for r in self.reports if r.method == name]
            aucs = [r.auc for r in rs if r.auc is not None]
            rms = [r.rmse for r in rs if r.rmse is not None]
            out[name] = {
                "mean_auc": float(np.mean(aucs)) if aucs else None,
                "mean_rmse": float(np.mean(rms)) if rms else None,
                "n_auc": len(aucs),
                "n_rmse": len(rms),
            }
        return out

    def to_json(self) -> str:
        doc = {"config": self.config, "summary": self.summary(),
               "reports": [r.to_dict() for r in self.reports]}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def table(self) -> str:
        """Plain-text table, one row per method."""
        loops = "included" if self.config.get("self_loops") else "excluded"
        lines = [f"# self-loops {loops} from AUC; RMSE in normalised [0,1] units",
                 f"{'method':<12} {'mean AUC':>9} {'mean RMSE':>10}"]
        for name, s in self.summary().items():
            auc = "-" if s["mean_auc"] is None else f"{s['mean_auc']:.4f}"
            rms = "-" if s["mean_rmse"] is None else f"{s['mean_rmse']:.4f}"
            lines.append(f"{name:<12} {auc:>9} {rms:>10}")
        return "\n".join(lines) + "\n"

    def timings(self) -> dict:
        return {f"{r.dataset}/{r.method}": r.wall_time for r in self.reports}


def _config_dict(cfg: BenchmarkConfig, methods) -> dict:
    d = asdict(cfg)
    d["methods"] = list(cfg.methods)
    d["method_settings"] = [
        {"name": m.name, "lam_grid": list(m.lam_grid), "lag": m.lag, "marginal": m.marginal,
         "em": asdict(m.em), "te": asdict(m.te), "train_frac": m.train_frac}
        for m in methods]
    return d


def evaluate_dataset(panel: TimeSeriesPanel, truth: GroundTruthGraph | None, method: MethodSpec,
                     S: int = 10, self_loops: bool = False, dataset: int = 0) -> EvalReport:
    """Both tasks for one (already normalised) panel; failures are recorded, not raised."""
    start = time.perf_counter()
    try:
        report = sliding_window_rmse(panel, method, S)
    except SparseGevError as err:
        report = EvalReport(method.name, partial=True,
                            errors=[f"prediction: {type(err).__name__}: {err}"])
    report.dataset = dataset
    if truth is not None:
        try:
            fitted = method.fit(panel)
            report.lam_graph = fitted.lam
            report.auc = edge_auc(fitted.graph, truth, self_loops)
        except SparseGevError as err:
            report.partial = True
            report.errors.append(f"graph: {type(err).__name__}: {err}")
    report.wall_time = time.perf_counter() - start
    return report


def run_benchmark(suite, methods, cfg: BenchmarkConfig = BenchmarkConfig()) -> BenchmarkResult:
    """Every method on every dataset.

    ``suite`` is a list of ``(panel, truth)`` or ``(panel, truth, model)``
    tuples with raw panels; each panel is normalised to ``[0, 1]`` first.
    Reports are ordered by dataset, then by the order of ``methods``.
    """
    if not suite or not methods:
        raise DomainError("benchmark needs at least one dataset and one method")
    reports = []
    for d, item in enumerate(suite):
        panel, truth = item[0], item[1]
        norm, _ = normalize_panel(panel)
        for m in methods:
            reports.append(evaluate_dataset(norm, truth, m, cfg.S, cfg.self_loops, d))
    return BenchmarkResult(_config_dict(cfg, methods), reports)


def synthetic_benchmark(cfg: BenchmarkConfig = BenchmarkConfig(), methods=None) -> BenchmarkResult:
    """Regenerate the synthetic suite from ``cfg.seed`` and benchmark it."""
    if methods is None:
        methods = [MethodSpec(name, em=EmConfig(seed=cfg.seed)) for name in cfg.methods]
    suite = make_synthetic_suite(cfg.datasets, np.random.default_rng(cfg.seed))
    return run_benchmark(suite, methods, cfg)
