"""Naive loop-based references for every pipeline formula.

These implementations are deliberately written with explicit Python loops
and no shared code with the optimized versions; equivalence tests compare
the two within 1e-12.  Inputs and outputs are plain arrays.
"""

from __future__ import annotations

import numpy as np

from .errors import UnknownFormulaError


def ref_normalize_shares(raw) -> np.ndarray:
    raw = [float(x) for x in raw]
    total = 0.0
    for x in raw:
        total += x
    return np.array([x / total for x in raw])


def ref_net_reduce(matrix) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            diff = matrix[i, j] - matrix[j, i]
            out[i, j] = diff if diff > 0.0 else 0.0
    return out


def ref_weighted_trade(stack, weights) -> np.ndarray:
    stack = np.asarray(stack, dtype=float)
    weights = [float(w) for w in weights]
    c, n, _ = stack.shape
    combined = np.zeros((n, n))
    for ci in range(c):
        for i in range(n):
            for j in range(n):
                combined[i, j] += weights[ci] * stack[ci, i, j]
    return ref_net_reduce(combined)


def ref_normalize_trade(matrix) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    total = 0.0
    for row in matrix:
        for x in row:
            total += x
    return matrix / total


def ref_implied_local_use(mining, use, trade_norm, gamma_tr=0.6, im_convention="column-sum"):
    trade_norm = np.asarray(trade_norm, dtype=float)
    n = trade_norm.shape[0]
    exported = np.zeros(n)
    local = np.zeros(n)
    for i in range(n):
        gross = 0.0
        for j in range(n):
            gross += trade_norm[j, i] if im_convention == "column-sum" else trade_norm[i, j]
        e = mining[i] - use[i] + gamma_tr * gross
        exported[i] = e if e > 0.0 else 0.0
        l = mining[i] - exported[i]
        local[i] = l if l > 0.0 else 0.0
    return exported, local


def ref_assemble_m1(trade_norm, local) -> np.ndarray:
    trade_norm = np.asarray(trade_norm, dtype=float)
    local = [float(x) for x in local]
    n = trade_norm.shape[0]
    total_local = 0.0
    for x in local:
        total_local += x
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = trade_norm[i, j] * (1.0 - total_local)
        out[i, i] += local[i]
    return out


def ref_predict_use(values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    out = np.zeros(n)
    for j in range(n):
        for i in range(n):
            out[j] += values[i, j]
    return out


def ref_predict_mining(values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    out = np.zeros(n)
    for i in range(n):
        for j in range(n):
            out[i] += values[i, j]
    return out


def ref_objective_d(use_pred, use_obs, mining_pred, mining_obs, alpha_m=2.0 / 3.0, alpha_u=1.0 / 3.0) -> float:
    total = 0.0
    for a, b in zip(use_pred, use_obs):
        total += alpha_u * abs(float(a) - float(b))
    for a, b in zip(mining_pred, mining_obs):
        total += alpha_m * abs(float(a) - float(b))
    return total


def ref_renormalize(star, previous_values, denominator="off-diagonal") -> np.ndarray:
    star = np.asarray(star, dtype=float)
    previous_values = np.asarray(previous_values, dtype=float)
    n = star.shape[0]
    trace_prev = 0.0
    for i in range(n):
        trace_prev += previous_values[i, i]
    off_total = 0.0
    full_total = 0.0
    for i in range(n):
        for j in range(n):
            full_total += star[i, j]
            if i != j:
                off_total += star[i, j]
    denom = off_total if denominator == "off-diagonal" else full_total
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                out[i, j] = previous_values[i, j]
            else:
                out[i, j] = star[i, j] * (1.0 - trace_prev) / denom
    return out


def ref_mining_row_scale(values, mining, gamma_r=1.0, m_floor=0.005, out_floor=0.003) -> np.ndarray:
    """Row scaling of stage M5 before renormalization."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    out = values.copy()
    for i in range(n):
        expected = mining[i] - values[i, i]
        if not (mining[i] > m_floor and expected > out_floor):
            continue
        observed = 0.0
        for j in range(n):
            if j != i:
                observed += values[i, j]
        r = (observed / expected - 1.0) * gamma_r + 1.0
        if abs(r) < 1e-6:
            continue
        for j in range(n):
            if j != i:
                out[i, j] = values[i, j] / r
    return out


def ref_weighted_jaccard(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    num = 0.0
    den = 0.0
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            num += min(a[i, j], b[i, j])
            den += max(a[i, j], b[i, j])
    return num / den


FORMULAS = {
    "normalize_shares": ref_normalize_shares,
    "net_reduce": ref_net_reduce,
    "weighted_trade": ref_weighted_trade,
    "normalize_trade": ref_normalize_trade,
    "implied_local_use": ref_implied_local_use,
    "assemble_m1": ref_assemble_m1,
    "predict_use": ref_predict_use,
    "predict_mining": ref_predict_mining,
    "objective_d": ref_objective_d,
    "renormalize": ref_renormalize,
    "mining_row_scale": ref_mining_row_scale,
    "weighted_jaccard": ref_weighted_jaccard,
}


def brute_force_reference(name: str, *args, **kwargs):
    """Evaluate the named formula with its naive reference implementation."""
    try:
        func = FORMULAS[name]
    except KeyError:
        raise UnknownFormulaError(f"no reference formula named {name!r}") from None
    return func(*args, **kwargs)
