"""Predictions and fit metrics for flow matrices.

Row sums of a flow matrix predict mining shares, column sums predict use
shares.  The headline objective D is a weighted sum of absolute errors of
both predictions; absolute rather than squared errors keep small countries
from being drowned out by the few large ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ZeroVarianceError
from .flows import FlowMatrix, Stage

DEFAULT_ALPHA_M = 2.0 / 3.0
DEFAULT_ALPHA_U = 1.0 / 3.0

R2_DEFINITION = "1 - ss_res/ss_tot"


def _values(flow) -> np.ndarray:
    return np.asarray(getattr(flow, "values", flow), dtype=float)


def predict_use(flow) -> np.ndarray:
    """Predicted use shares: column sums of the flow matrix."""
    return _values(flow).sum(axis=0)


def predict_mining(flow) -> np.ndarray:
    """Predicted mining shares: row sums of the flow matrix."""
    return _values(flow).sum(axis=1)


def objective_d(
    use_pred: np.ndarray,
    use_obs: np.ndarray,
    mining_pred: np.ndarray,
    mining_obs: np.ndarray,
    alpha_m: float = DEFAULT_ALPHA_M,
    alpha_u: float = DEFAULT_ALPHA_U,
) -> float:
    """Weighted sum of absolute prediction errors for use and mining."""
    use_err = np.abs(np.asarray(use_pred, float) - np.asarray(use_obs, float)).sum()
    mining_err = np.abs(np.asarray(mining_pred, float) - np.asarray(mining_obs, float)).sum()
    return float(alpha_u * use_err + alpha_m * mining_err)


def r_squared(predicted: np.ndarray, observed: np.ndarray) -> float:
    """Coefficient of determination, 1 - SS_res / SS_tot.

    Can be negative when predictions are worse than the observed mean.
    """
    predicted = np.asarray(predicted, dtype=float)
    observed = np.asarray(observed, dtype=float)
    ss_tot = float(((observed - observed.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise ZeroVarianceError("observed vector has no variance")
    ss_res = float(((predicted - observed) ** 2).sum())
    return 1.0 - ss_res / ss_tot


@dataclass
class FitReport:
    """Fit of one stage matrix against observed mining and use shares."""

    year: int
    stage: Stage | None
    d: float
    r2_min: float
    r2_use: float
    r2_pooled: float
    r2_stacked: float
    alpha_m: float = DEFAULT_ALPHA_M
    alpha_u: float = DEFAULT_ALPHA_U
    r2_definition: str = field(default=R2_DEFINITION)

    def __post_init__(self):
        if self.d < 0:
            raise ValueError("objective D cannot be negative")
        if abs(self.alpha_m + self.alpha_u - 1.0) > 1e-9:
            raise ValueError("alpha_m and alpha_u must sum to 1")

    def to_dict(self) -> dict:
        return {
            "year": self.year,
            "stage": self.stage.value if self.stage else None,
            "d": self.d,
            "r2_min": self.r2_min,
            "r2_use": self.r2_use,
            "r2_pooled": self.r2_pooled,
            "r2_stacked": self.r2_stacked,
            "alpha_m": self.alpha_m,
            "alpha_u": self.alpha_u,
            "r2_definition": self.r2_definition,
        }

    def as_row(self) -> list:
        """Row for the run-level CSV: year, stage, D, r2_min, r2_use, r2_pooled."""
        return [
            self.year,
            self.stage.value if self.stage else "",
            self.d,
            self.r2_min,
            self.r2_use,
            self.r2_pooled,
        ]


def fit_report(
    flow: FlowMatrix,
    mining: np.ndarray,
    use: np.ndarray,
    alpha_m: float = DEFAULT_ALPHA_M,
    alpha_u: float = DEFAULT_ALPHA_U,
) -> FitReport:
    """Evaluate a flow matrix against observed mining and use shares."""
    mining_pred = predict_mining(flow)
    use_pred = predict_use(flow)
    d = objective_d(use_pred, use, mining_pred, mining, alpha_m, alpha_u)
    r2_min = r_squared(mining_pred, mining)
    r2_use = r_squared(use_pred, use)
    stacked = r_squared(
        np.concatenate([mining_pred, use_pred]), np.concatenate([mining, use])
    )
    return FitReport(
        year=flow.year,
        stage=flow.stage,
        d=d,
        r2_min=r2_min,
        r2_use=r2_use,
        r2_pooled=0.5 * (r2_min + r2_use),
        r2_stacked=stacked,
        alpha_m=alpha_m,
        alpha_u=alpha_u,
    )
