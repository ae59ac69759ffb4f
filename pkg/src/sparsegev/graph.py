"""Scored directed dependency graphs."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    score: float
    lag_weights: tuple[float, ...] | None = None


@dataclass
class DependencyGraph:
    """Directed edges ``src -> dst`` over ``P`` nodes, each with a score >= 0.

    Absent pairs have score 0.  ``includes_self_loops`` records whether
    ``i -> i`` records were produced at all.
    """

    P: int
    edges: list[Edge] = field(default_factory=list)
    includes_self_loops: bool = True

    def __post_init__(self):
        seen = set()
        for e in self.edges:
            if not (0 <= e.src < self.P and 0 <= e.dst < self.P):
                raise DimensionError(f"edge {e.src}->{e.dst} outside {self.P} nodes")
            if not np.isfinite(e.score) or e.score < 0:
                raise DomainError(f"edge score must be finite and >= 0, got {e.score}")
            if (e.src, e.dst) in seen:
                raise DomainError(f"duplicate edge {e.src}->{e.dst}")
            seen.add((e.src, e.dst))

    @classmethod
    def from_scores(cls, scores, lag_weights=None, keep_zero=False, self_loops=True):
        """Build from a ``P x P`` matrix with ``scores[dst, src]``.

        ``lag_weights`` optionally has shape ``(P, P, L)`` in the same
        orientation.  Zero scores are dropped unless ``keep_zero``.
        """
        scores = np.asarray(scores, dtype=float)
        P = scores.shape[0]
        edges = []
        for dst in range(P):
            for src in range(P):
                if src == dst and not self_loops:
                    continue
                s = float(scores[dst, src])
                if s == 0.0 and not keep_zero:
                    continue
                lw = None
                if lag_weights is not None:
                    lw = tuple(float(v) for v in lag_weights[dst, src])
                edges.append(Edge(src, dst, s, lw))
        return cls(P, edges, self_loops)

    def score_matrix(self) -> np.ndarray:
        """``P x P`` matrix indexed ``[dst, src]``; absent edges are 0."""
        m = np.zeros((self.P, self.P))
        for e in self.edges:
            m[e.dst, e.src] = e.score
        return m

    def support(self) -> np.ndarray:
        return self.score_matrix() > 0

    def to_records(self) -> list[dict]:
        """Flat ``{src, dst, lag, weight}`` records, one per nonzero lag."""
        out = []
        for e in self.edges:
            if e.lag_weights is None:
                out.append({"src": e.src, "dst": e.dst, "lag": None, "weight": e.score})
                continue
            for lag, w in enumerate(e.lag_weights, start=1):
                if w != 0.0:
                    out.append({"src": e.src, "dst": e.dst, "lag": lag, "weight": w})
        return out
