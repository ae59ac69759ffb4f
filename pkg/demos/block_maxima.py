"""From raw daily readings to a block-maxima panel and Gumbel fits."""
import numpy as np

from sparsegev import TimeSeriesPanel, block_maxima, fit_gumbel_mle, normalize_panel

rng = np.random.default_rng(3)
days = 52 * 7 * 4
raw = rng.gamma(2.0, 1.5, size=(days, 3)) * np.array([1.0, 2.0, 0.5])
weekly = block_maxima(raw, 7)
print(f"{days} daily readings -> {weekly.shape[0]} weekly maxima per series")
for j in range(weekly.shape[1]):
    g = fit_gumbel_mle(weekly[:, j])
    print(f"series {j}: Gumbel location {g.mu:.3f}, scale {g.sigma:.3f}")
panel, rec = normalize_panel(TimeSeriesPanel.from_array(weekly))
print("normalised range per series:", panel.values.min(axis=0), panel.values.max(axis=0))
