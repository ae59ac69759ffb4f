"""Command-line interface: ``sparsegev {simulate,fit,predict,evaluate,benchmark}``.

Settings come from three layers, highest first: command-line flags, a JSON
file given with ``--config``, and the defaults in :data:`DEFAULTS`.  The
resolved settings (minus the output directory) are written into every
output file.

Exit status: 0 success, 1 usage error, 2 data error, 3 numerical error.
Failures print one line to stderr of the form
``sparsegev: error=<tag> type=<ExceptionName> message=<text>``.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .baselines import (CopulaPredictor, EmpiricalMarginal, GaussianMarginal, GumbelMarginal, KnnLagPredictor,
                        LinearLagPredictor, TeConfig)
from .errors import (ConvergenceError, DegenerateDataError, DimensionError, DomainError,
                     ParseError, ParticleDegeneracyError, SparseGevError)
from .evaluation import (METHODS, BenchmarkConfig, MethodSpec, Normalization,
                         normalize_panel, run_benchmark)
from .evd import GumbelParams
from .io import (atomic_write, dump_json, format_table_csv, format_panel_csv, graph_document,
                 read_json, read_panel_csv, truth_document, truth_from_document, with_meta)
from .learning import EmConfig, SparseGevPredictor
from .model import SparseGevModel, TimeSeriesPanel, make_synthetic_suite

DEFAULTS = {
    "method": "sparse-gev",
    "lambda": None,
    "lambda_grid": [0.03, 0.1, 0.3],
    "lag": 2,
    "particles": 1000,
    "tau": 0.2,
    "seed": 0,
    "max_iters": 30,
    "tol": 1e-4,
    "self_loops": False,
    "marginal": "gev",
    "te_k": 4,
    "windows": 10,
    "datasets": 8,
    "methods": "all",
    "T": 40,
    "P": 9,
    "input": None,
    "truth": None,
    "model": None,
    "output": ".",
}

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------- configuration

def _check_type(key, value):
    ints = {"lag", "particles", "seed", "max_iters", "te_k", "windows", "datasets", "T", "P"}
    floats = {"tau", "tol"}
    paths = {"input", "truth", "model", "output"}
    bad = False
    if key in ints:
        bad = isinstance(value, bool) or not isinstance(value, int)
    elif key in floats:
        bad = isinstance(value, bool) or not isinstance(value, (int, float))
    elif key == "lambda":
        bad = value is not None and (isinstance(value, bool) or not isinstance(value, (int, float)))
    elif key == "lambda_grid":
        bad = not (isinstance(value, list) and value
                   and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value))
    elif key == "self_loops":
        bad = not isinstance(value, bool)
    elif key in ("method", "marginal"):
        bad = not isinstance(value, str)
    elif key == "methods":
        bad = not (isinstance(value, str) or (isinstance(value, list) and all(isinstance(v, str) for v in value)))
    elif key in paths:
        bad = value is not None and not isinstance(value, str)
    if bad:
        raise UsageError(f"config key {key!r} has invalid value {value!r}")


def _validate(cfg: dict) -> dict:
    if cfg["method"] not in METHODS:
        raise UsageError(f"unknown method {cfg['method']!r}; choose from {', '.join(METHODS)}")
    if cfg["marginal"] not in ("gev", "empirical", "gaussian"):
        raise UsageError(f"unknown marginal {cfg['marginal']!r}")
    methods = cfg["methods"]
    if isinstance(methods, str):
        methods = list(METHODS) if methods == "all" else [m.strip() for m in methods.split(",")]
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r} in methods")
    cfg["methods"] = methods
    positive = ("lag", "particles", "max_iters", "te_k", "windows", "datasets", "T", "P")
    for key in positive:
        if cfg[key] < 1:
            raise UsageError(f"{key} must be >= 1")
    if cfg["particles"] < 2:
        raise UsageError("particles must be >= 2")
    if cfg["tau"] <= 0 or cfg["tol"] <= 0:
        raise UsageError("tau and tol must be positive")
    if cfg["lambda"] is not None and cfg["lambda"] < 0:
        raise UsageError("lambda must be >= 0")
    if any(v < 0 for v in cfg["lambda_grid"]):
        raise UsageError("lambda_grid entries must be >= 0")
    cfg["lambda_grid"] = [float(v) for v in cfg["lambda_grid"]]
    if cfg["lambda"] is not None:
        cfg["lambda"] = float(cfg["lambda"])
    cfg["tau"] = float(cfg["tau"])
    cfg["tol"] = float(cfg["tol"])
    return cfg


def resolve_config(flags: dict, config_path: str | None = None) -> dict:
    """Merge defaults, the optional JSON file and explicitly given flags."""
    cfg = dict(DEFAULTS)
    if config_path is not None:
        try:
            doc = json.loads(Path(config_path).read_text())
        except json.JSONDecodeError as err:
            raise ParseError(f"{config_path}: line {err.lineno}, column {err.colno}: {err.msg}") from None
        if not isinstance(doc, dict):
            raise UsageError(f"{config_path}: config must be a JSON object")
        unknown = sorted(set(doc) - set(DEFAULTS))
        if unknown:
            raise UsageError(f"{config_path}: unknown config keys: {', '.join(unknown)}")
        for k, v in doc.items():
            _check_type(k, v)
        cfg.update(doc)
    for k, v in flags.items():
        if v is not None:
            _check_type(k, v)
            cfg[k] = v
    return _validate(cfg)


def echo(cfg: dict) -> dict:
    """The settings written into outputs: everything but the output directory."""
    return {k: v for k, v in sorted(cfg.items()) if k != "output"}


def em_config(cfg: dict) -> EmConfig:
    lam = cfg["lambda"] if cfg["lambda"] is not None else cfg["lambda_grid"][0]
    return EmConfig(lam=lam, max_iters=cfg["max_iters"], tol=cfg["tol"], particles=cfg["particles"],
                    tau=cfg["tau"], lag=cfg["lag"], seed=cfg["seed"])


def method_spec(cfg: dict, name: str | None = None) -> MethodSpec:
    grid = cfg["lambda_grid"] if cfg["lambda"] is None else [cfg["lambda"]]
    return MethodSpec(name or cfg["method"], lam_grid=tuple(grid), lag=cfg["lag"],
                      em=em_config(cfg), te=TeConfig(k=cfg["te_k"], lag=cfg["lag"]),
                      marginal=cfg["marginal"])


def benchmark_config(cfg: dict) -> BenchmarkConfig:
    return BenchmarkConfig(datasets=cfg["datasets"], seed=cfg["seed"], S=cfg["windows"],
                           self_loops=cfg["self_loops"], methods=tuple(cfg["methods"]))


# ---------------------------------------------------------------- predictor (de)serialisation

def predictor_document(fitted, method: str, cfg: dict) -> dict:
    pred = fitted.predictor
    if method == "sparse-gev":
        return {"sparse_gev": fitted.model[0].to_dict(), "particles": pred.particles, "seed": pred.seed}
    if method == "granger":
        return {"beta": pred.beta.tolist(), "c": pred.c.tolist()}
    if method == "copula":
        margs = []
        for m in pred.marginals:
            if isinstance(m, GumbelMarginal):
                margs.append({"kind": "gev", "mu": m.params.mu, "sigma": m.params.sigma})
            elif isinstance(m, GaussianMarginal):
                margs.append({"kind": "gaussian", "mean": m.mean, "std": m.std})
            else:
                margs.append({"kind": "empirical", "values": m.sorted_values.tolist()})
        return {"beta": pred.linear.beta.tolist(), "c": pred.linear.c.tolist(), "marginals": margs}
    return {"train": pred.train.tolist(), "parents": [list(p) for p in pred.parents],
            "lag": pred.lag, "k": pred.k}


def predictor_from_document(method: str, doc: dict):
    try:
        if method == "sparse-gev":
            return SparseGevPredictor(SparseGevModel.from_dict(doc["sparse_gev"]),
                                      int(doc["particles"]), int(doc["seed"]))
        if method == "granger":
            return LinearLagPredictor(np.array(doc["beta"], float), np.array(doc["c"], float))
        if method == "copula":
            margs = []
            for m in doc["marginals"]:
                if m["kind"] == "gev":
                    margs.append(GumbelMarginal(GumbelParams(float(m["mu"]), float(m["sigma"]))))
                elif m["kind"] == "gaussian":
                    margs.append(GaussianMarginal(float(m["mean"]), float(m["std"])))
                else:
                    margs.append(EmpiricalMarginal(np.array(m["values"], float)))
            return CopulaPredictor(tuple(margs), LinearLagPredictor(np.array(doc["beta"], float),
                                                                    np.array(doc["c"], float)))
        if method == "te":
            return KnnLagPredictor(np.array(doc["train"], float), tuple(tuple(p) for p in doc["parents"]),
                                   int(doc["lag"]), int(doc["k"]))
    except (KeyError, TypeError, ValueError) as err:
        raise ParseError(f"malformed model document: {err!r}") from None
    raise ParseError(f"model document has unknown method {method!r}")


# ---------------------------------------------------------------- commands

def _out(cfg: dict, name: str) -> Path:
    return Path(cfg["output"]) / name


def _need(cfg: dict, key: str) -> str:
    if cfg[key] is None:
        raise UsageError(f"--{key} is required for this command")
    return cfg[key]


def cmd_simulate(cfg: dict) -> list[Path]:
    """Panel CSV, ground-truth JSON and generating-model JSON for one synthetic dataset."""
    rng = np.random.default_rng(cfg["seed"])
    panel, truth, model = make_synthetic_suite(1, rng, T=cfg["T"], P=cfg["P"], L=cfg["lag"])[0]
    meta = echo(cfg)
    files = {
        "panel.csv": format_panel_csv(panel, meta),
        "truth.json": dump_json(truth_document(truth, panel.names, meta)),
        "model.json": dump_json({"config": meta, "method": "generator", "model": model.to_dict(),
                                 "nodes": panel.names}),
    }
    for name, text in files.items():
        atomic_write(_out(cfg, name), text)
    return [_out(cfg, n) for n in files]


def roughness_ratio(posterior_mean, values) -> float:
    """``mean |diff(mu_bar)| / mean |diff(x)|``; below 1 means a smoother latent path."""
    return float(np.mean(np.abs(np.diff(posterior_mean, axis=0))) / np.mean(np.abs(np.diff(values, axis=0))))


def cmd_fit(cfg: dict, stdout=sys.stdout) -> list[Path]:
    """Model JSON, graph JSON and, for sparse-gev, the EM and ESS traces."""
    raw = read_panel_csv(_need(cfg, "input"))
    panel, norm = normalize_panel(raw)
    spec = method_spec(cfg)
    fitted = spec.fit(panel, cfg["lambda"])
    meta = echo(cfg)
    files = {
        "model.json": dump_json({
            "config": meta, "method": spec.name, "lambda": fitted.lam, "nodes": raw.names,
            "normalization": norm.to_dict(), "predictor": predictor_document(fitted, spec.name, cfg)}),
        "graph.json": dump_json(graph_document(fitted.graph, raw.names, meta)),
    }
    if spec.name == "sparse-gev":
        _, trace = fitted.model
        files["em_trace.csv"] = with_meta(trace.to_csv(), meta)
        files["ess_trace.csv"] = with_meta(trace.summary.ess_csv(), meta)
        ratio = roughness_ratio(trace.summary.mean_mu, panel.values)
        print(f"roughness ratio mean|d mu| / mean|d x| = {ratio:.4f} (tau = {cfg['tau']})", file=stdout)
    for name, text in files.items():
        atomic_write(_out(cfg, name), text)
    return [_out(cfg, n) for n in files]


def predict_values(raw: TimeSeriesPanel, model_doc: dict) -> np.ndarray:
    """Next-step forecast in original units from a saved model document."""
    try:
        names = model_doc["nodes"]
        norm = Normalization.from_dict(model_doc["normalization"])
        method = model_doc["method"]
        pdoc = model_doc["predictor"]
    except (KeyError, TypeError) as err:
        raise ParseError(f"malformed model document: missing {err}") from None
    if list(raw.names) != list(names):
        raise DimensionError(f"input series {raw.names} differ from the model's {names}")
    pred = predictor_from_document(method, pdoc)
    return norm.inverse(pred(norm.apply(raw.values)))


def cmd_predict(cfg: dict) -> list[Path]:
    raw = read_panel_csv(_need(cfg, "input"))
    doc = read_json(_need(cfg, "model"))
    xhat = predict_values(raw, doc)
    text = format_table_csv(raw.names, [list(xhat)], echo(cfg))
    atomic_write(_out(cfg, "predictions.csv"), text)
    return [_out(cfg, "predictions.csv")]


def _write_report(cfg: dict, result) -> list[Path]:
    files = {"report.json": result.to_json(),
             "table.txt": f"# config: {json.dumps(echo(cfg), sort_keys=True)}\n" + result.table(),
             "timings.json": dump_json(result.timings())}
    for name, text in files.items():
        atomic_write(_out(cfg, name), text)
    return [_out(cfg, n) for n in files]


def cmd_evaluate(cfg: dict) -> list[Path]:
    """Both tasks on one CSV panel (graph task only when ``--truth`` is given)."""
    raw = read_panel_csv(_need(cfg, "input"))
    truth = None
    if cfg["truth"] is not None:
        truth = truth_from_document(read_json(cfg["truth"]))
        if truth.P != raw.P:
            raise DimensionError(f"truth has {truth.P} nodes, panel has {raw.P}")
    methods = [method_spec(cfg, m) for m in cfg["methods"]]
    result = run_benchmark([(raw, truth)], methods, benchmark_config(cfg))
    result.config = echo(cfg)
    return _write_report(cfg, result)


def cmd_benchmark(cfg: dict) -> list[Path]:
    """Regenerate the synthetic suite from the seed and benchmark every method."""
    bcfg = benchmark_config(cfg)
    suite = make_synthetic_suite(bcfg.datasets, np.random.default_rng(bcfg.seed),
                                 T=cfg["T"], P=cfg["P"], L=cfg["lag"])
    methods = [method_spec(cfg, m) for m in cfg["methods"]]
    result = run_benchmark(suite, methods, bcfg)
    result.config = echo(cfg)
    return _write_report(cfg, result)


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "predict": cmd_predict,
            "evaluate": cmd_evaluate, "benchmark": cmd_benchmark}


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparsegev", description="Sparse latent-GEV dependency learning for extreme-value time series.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    helps = {"simulate": "draw one synthetic panel with its ground truth",
             "fit": "fit a method to a CSV panel",
             "predict": "one-step forecast from a fitted model",
             "evaluate": "AUC and sliding-window RMSE on a CSV panel",
             "benchmark": "all methods on a regenerated synthetic suite"}
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", help="JSON file of settings (flags take precedence)")
        p.add_argument("--output", "-o", help="output directory (default: current directory)")
        p.add_argument("--seed", type=int)
        p.add_argument("--lag", type=int)
        if name in ("simulate", "benchmark"):
            p.add_argument("--T", type=int, dest="T", help="series length (default 40)")
            p.add_argument("--P", type=int, dest="P", help="number of series (default 9)")
        if name in ("fit", "predict", "evaluate"):
            p.add_argument("--input", "-i", help="wide CSV panel")
        if name == "predict":
            p.add_argument("--model", help="model JSON written by fit")
        if name == "evaluate":
            p.add_argument("--truth", help="ground-truth JSON written by simulate")
        if name in ("fit", "evaluate", "benchmark"):
            if name == "fit":
                p.add_argument("--method", choices=METHODS)
            else:
                p.add_argument("--methods", help="comma-separated list or 'all'")
            p.add_argument("--lambda", type=float, dest="lambda", help="penalty (default: validated over --lambda-grid)")
            p.add_argument("--lambda-grid", dest="lambda_grid",
                           type=lambda s: [float(v) for v in s.split(",")], help="comma-separated penalties")
            p.add_argument("--particles", type=int)
            p.add_argument("--tau", type=float)
            p.add_argument("--max-iters", type=int, dest="max_iters")
            p.add_argument("--tol", type=float)
            p.add_argument("--marginal", choices=("gev", "empirical", "gaussian"))
            p.add_argument("--te-k", type=int, dest="te_k")
        if name in ("evaluate", "benchmark"):
            p.add_argument("--windows", type=int, help="sliding windows S (default 10)")
            p.add_argument("--self-loops", action="store_const", const=True, dest="self_loops",
                           help="count i->i pairs in AUC")
        if name == "benchmark":
            p.add_argument("--datasets", type=int)
    return parser


def _error_line(tag: str, err: BaseException) -> str:
    msg = " ".join(str(err).split())
    return f"sparsegev: error={tag} type={type(err).__name__} message={msg}"


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = vars(build_parser().parse_args(argv))
        command = args.pop("command")
        config_path = args.pop("config")
        cfg = resolve_config(args, config_path)
        if command == "fit":
            written = cmd_fit(cfg, stdout)
        else:
            written = COMMANDS[command](cfg)
        for path in written:
            print(f"wrote {path}", file=stdout)
        return EXIT_OK
    except UsageError as err:
        print(_error_line("usage", err), file=stderr)
        return EXIT_USAGE
    except (ConvergenceError, ParticleDegeneracyError) as err:
        print(_error_line("numerical", err), file=stderr)
        return EXIT_NUMERIC
    except (ParseError, DomainError, DimensionError, DegenerateDataError, OSError) as err:
        print(_error_line("data", err), file=stderr)
        return EXIT_DATA
    except SparseGevError as err:
        print(_error_line("numerical", err), file=stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
