"""Estimation of per-category trade weights.

The weight of a goods category stands in for its typical phosphate content
per USD.  Weights live on the positive simplex (the pipeline normalizes the
trade matrix, so only their ratios matter) and are estimated by minimizing
the fit objective D with a derivative-free local search from several seeded
starting points.  The objective is piecewise smooth but not differentiable
(absolute errors, clamps, netting), which rules out gradient methods.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import NoImprovementWarning
from .fit import DEFAULT_ALPHA_M, DEFAULT_ALPHA_U, FitReport, fit_report
from .flows import (
    IM_COLUMN_SUM,
    FlowMatrix,
    Stage,
    assemble_m1,
    implied_local_use,
    net_tensor,
    normalize_trade,
    weighted_trade,
)


@dataclass
class WeightVector:
    """Per-category weights plus the active-set mask used in estimation."""

    weights: np.ndarray
    active: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.active = np.asarray(self.active, dtype=bool)

    def validate(self, atol: float = 1e-9) -> None:
        if self.weights.shape != self.active.shape:
            raise ValueError("weights and active mask must have the same length")
        if self.weights.min() < 0:
            raise ValueError("weights must be non-negative")
        if np.any(self.weights[~self.active] != 0.0):
            raise ValueError("inactive categories must have zero weight")
        total = self.weights[self.active].sum()
        if abs(total - 1.0) > atol:
            raise ValueError(f"active weights sum to {total!r}, expected 1")

    @classmethod
    def equal(cls, n_categories: int, active: np.ndarray | None = None) -> "WeightVector":
        """Equal weights over the active set (all categories by default)."""
        if active is None:
            active = np.ones(n_categories, dtype=bool)
        active = np.asarray(active, dtype=bool)
        weights = np.zeros(n_categories)
        weights[active] = 1.0 / active.sum()
        return cls(weights, active)

    @classmethod
    def from_active(cls, values: np.ndarray, active: np.ndarray) -> "WeightVector":
        """Embed weights given on the active set into the full category space."""
        active = np.asarray(active, dtype=bool)
        values = np.asarray(values, dtype=float)
        weights = np.zeros(active.shape[0])
        weights[active] = values / values.sum()
        return cls(weights, active)

    def as_dict(self, categories) -> dict[str, float]:
        return {c.hs6: float(w) for c, w in zip(categories.categories, self.weights)}


@dataclass
class OptimizerConfig:
    """Settings of the derivative-free weight search."""

    active_category_count: int = 11
    max_iterations: int = 2000    # objective evaluations per restart
    convergence_tol: float = 1e-6
    restarts: int = 8
    seed: int = 0
    alpha_m: float = DEFAULT_ALPHA_M
    alpha_u: float = DEFAULT_ALPHA_U

    def __post_init__(self):
        if not 1 <= self.active_category_count <= 25:
            raise ValueError("active_category_count must be in [1, 25]")
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")


def select_active_categories(tensor: np.ndarray, k: int) -> np.ndarray:
    """Mask of the k categories with the largest total USD volume.

    Ties at the cutoff go to the earlier (lower HS6) category; the tensor's
    category axis follows the ascending-code order of the category table.
    """
    tensor = np.asarray(tensor, dtype=float)
    n_cat = tensor.shape[0]
    if k < 1:
        raise ValueError("active set must contain at least one category")
    k = min(k, n_cat)
    volumes = tensor.sum(axis=(1, 2))
    order = np.argsort(-volumes, kind="stable")
    mask = np.zeros(n_cat, dtype=bool)
    mask[order[:k]] = True
    return mask


def make_assembly_eval(
    net_stack: np.ndarray,
    mining: np.ndarray,
    use: np.ndarray,
    gamma_tr: float = 0.6,
    im_convention: str = IM_COLUMN_SUM,
):
    """Map a full-length weight vector to the stage-one flow matrix values."""
    net_stack = np.asarray(net_stack, dtype=float)
    mining = np.asarray(mining, dtype=float)
    use = np.asarray(use, dtype=float)

    def evaluate(weights: np.ndarray) -> np.ndarray:
        trade = weighted_trade(net_stack, weights)
        trade_norm = normalize_trade(trade)
        _, local = implied_local_use(mining, use, trade_norm, gamma_tr, im_convention)
        return assemble_m1(trade_norm, local).values

    return evaluate


def _softmax(logits: np.ndarray) -> np.ndarray:
    # last logit pinned to zero removes the scaling degeneracy
    full = np.concatenate([logits, [0.0]])
    full -= full.max()
    e = np.exp(full)
    return e / e.sum()


def _pattern_polish(objective, z: np.ndarray, best: float, budget: int) -> tuple[np.ndarray, float]:
    """Compass search with shrinking steps; grinds into non-smooth minima."""
    step = 0.25
    evals = 0
    z = z.copy()
    while step > 1e-12 and evals < budget:
        improved = False
        for axis in range(z.size):
            for sign in (1.0, -1.0):
                trial = z.copy()
                trial[axis] += sign * step
                value = objective(trial)
                evals += 1
                if value < best:
                    best, z, improved = value, trial, True
                if evals >= budget:
                    return z, best
        if not improved:
            step *= 0.5
    return z, best


def optimize_weights(
    tensor: np.ndarray,
    mining: np.ndarray,
    use: np.ndarray,
    cfg: OptimizerConfig,
    pipeline_eval=None,
    active: np.ndarray | None = None,
    gamma_tr: float = 0.6,
    im_convention: str = IM_COLUMN_SUM,
    year: int = 0,
    stage: Stage = Stage.M2,
) -> tuple[WeightVector, FitReport]:
    """Find weights minimizing the fit objective D.

    ``pipeline_eval`` maps a full-length weight vector to the flow-matrix
    values whose D is evaluated; by default the stage-one assembly on the
    netted tensor.  Restarts begin at equal weights plus seeded random
    simplex points; the best point is polished with a compass search.  The
    result never degrades on the equal-weight baseline: if no restart
    improves on it, equal weights are returned with a warning.

    Deterministic for a fixed seed and inputs.
    """
    tensor = np.asarray(tensor, dtype=float)
    if active is None:
        active = select_active_categories(tensor, cfg.active_category_count)
    active = np.asarray(active, dtype=bool)
    idx = np.where(active)[0]
    k = idx.size
    n_cat = tensor.shape[0]

    if pipeline_eval is None:
        pipeline_eval = make_assembly_eval(net_tensor(tensor), mining, use, gamma_tr, im_convention)

    def flow_of(active_weights: np.ndarray) -> np.ndarray:
        full = np.zeros(n_cat)
        full[idx] = active_weights
        return pipeline_eval(full)

    def d_of(active_weights: np.ndarray) -> float:
        values = flow_of(active_weights)
        use_err = np.abs(values.sum(axis=0) - use).sum()
        min_err = np.abs(values.sum(axis=1) - mining).sum()
        return float(cfg.alpha_u * use_err + cfg.alpha_m * min_err)

    def finalize(vector: WeightVector) -> tuple[WeightVector, FitReport]:
        vector.validate()
        flow = FlowMatrix(flow_of(vector.weights[idx]), stage, year)
        report = fit_report(flow, mining, use, cfg.alpha_m, cfg.alpha_u)
        return vector, report

    equal = WeightVector.equal(n_cat, active)
    if k == 1:
        return finalize(equal)

    def objective(z: np.ndarray) -> float:
        return d_of(_softmax(z))

    d_equal = objective(np.zeros(k - 1))

    rng = np.random.default_rng(cfg.seed)
    starts = [np.zeros(k - 1)]
    for _ in range(cfg.restarts - 1):
        w0 = np.maximum(rng.dirichlet(np.ones(k)), 1e-8)
        starts.append(np.log(w0[:-1]) - np.log(w0[-1]))

    options = {
        "maxfev": cfg.max_iterations,
        "fatol": cfg.convergence_tol * 1e-3,
        "xatol": 1e-10,
    }
    best_z = np.zeros(k - 1)
    best_d = d_equal
    for z0 in starts:
        res = minimize(objective, z0, method="Nelder-Mead", options=options)
        if res.fun < best_d:
            best_d = float(res.fun)
            best_z = np.asarray(res.x, dtype=float)

    # the objective is piecewise smooth; a single simplex run stalls well
    # above the optimum, so alternate restarts from the incumbent with a
    # compass polish until converged
    for _ in range(4):
        previous = best_d
        best_z, best_d = _pattern_polish(objective, best_z, best_d, cfg.max_iterations)
        res = minimize(objective, best_z, method="Nelder-Mead", options=options)
        if res.fun < best_d:
            best_d = float(res.fun)
            best_z = np.asarray(res.x, dtype=float)
        if previous - best_d <= cfg.convergence_tol * 1e-6:
            break

    if best_d >= d_equal:
        if d_equal > cfg.convergence_tol:
            warnings.warn(
                "weight optimization did not improve on equal weights",
                NoImprovementWarning,
                stacklevel=2,
            )
        return finalize(equal)
    return finalize(WeightVector.from_active(_softmax(best_z), active))
