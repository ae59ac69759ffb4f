"""Score the three comparison methods on one synthetic dataset.

The latent-GEV fit is left out to keep the run short; see
``recover_graph.py`` for that.
"""
import numpy as np

from sparsegev import (MethodSpec, edge_auc, make_synthetic_suite, normalize_panel, sliding_window_rmse)

(panel, truth, _), = make_synthetic_suite(1, np.random.default_rng(7))
norm, _ = normalize_panel(panel)
print(f"dataset: {norm.T} steps, {norm.P} series, {int(truth.adjacency.sum())} true edges")
print(f"{'method':<10} {'lambda':>7} {'AUC':>6} {'RMSE':>7}")
for name in ("granger", "copula", "te"):
    spec = MethodSpec(name)
    fitted = spec.fit(norm)
    auc = edge_auc(fitted.graph, truth)
    err = sliding_window_rmse(norm, spec, S=5)
    lam = "-" if fitted.lam is None else f"{fitted.lam:g}"
    print(f"{name:<10} {lam:>7} {auc:6.3f} {err.rmse:7.4f}")
