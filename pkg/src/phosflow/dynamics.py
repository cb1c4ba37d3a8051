"""Temporal comparison of flow matrices via weighted Jaccard similarity."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .errors import BothZeroError, FewerThanTwoYearsError, LagExceedsSpanError


def _values(flow) -> np.ndarray:
    return np.asarray(getattr(flow, "values", flow), dtype=float)


def weighted_jaccard(flow_a, flow_b) -> float:
    """Elementwise min-over-max similarity of two flow matrices.

    1 means identical flows, 0 means disjoint supports.
    """
    a = _values(flow_a)
    b = _values(flow_b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    max_total = np.maximum(a, b).sum()
    if max_total <= 0.0:
        raise BothZeroError("both matrices are all zero")
    return float(np.minimum(a, b).sum() / max_total)


def similarity_series(matrices: Mapping[int, object]) -> list[tuple[int, float]]:
    """Similarity between successive years, ascending, keyed by the later year."""
    years = sorted(matrices)
    if len(years) < 2:
        raise FewerThanTwoYearsError("similarity series needs at least two years")
    return [
        (year, weighted_jaccard(matrices[year], matrices[prev]))
        for prev, year in zip(years, years[1:])
    ]


def similarity_decay(
    matrices: Mapping[int, object],
    max_lag: int,
    min_lag: int = 1,
) -> list[tuple[int, float]]:
    """Mean similarity over all year pairs at each lag from min_lag to max_lag."""
    years = sorted(matrices)
    if len(years) < 2:
        raise FewerThanTwoYearsError("similarity decay needs at least two years")
    span = years[-1] - years[0]
    if max_lag > span:
        raise LagExceedsSpanError(f"lag {max_lag} exceeds the {span}-year span")
    if min_lag < 0 or min_lag > max_lag:
        raise ValueError(f"invalid lag range [{min_lag}, {max_lag}]")
    out = []
    for lag in range(min_lag, max_lag + 1):
        values = [
            weighted_jaccard(matrices[y], matrices[y - lag])
            for y in years
            if y - lag in matrices
        ]
        if values:
            out.append((lag, float(np.mean(values))))
    return out


def similarity_pairs(
    matrices: Mapping[int, object],
    max_lag: int,
) -> list[tuple[int, int, float]]:
    """Per-anchor similarities (year, lag, J), the raw data behind the decay."""
    years = sorted(matrices)
    out = []
    for lag in range(1, max_lag + 1):
        for y in years:
            if y - lag in matrices:
                out.append((y, lag, weighted_jaccard(matrices[y], matrices[y - lag])))
    return out
