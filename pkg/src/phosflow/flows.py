"""Stage-one flow matrix construction from netted, weighted trade.

All quantities are shares of one year's global phosphate, expressed as
P2O5-equivalent fractions.  A flow matrix F is N x N with row sums equal to
mining shares and column sums equal to use shares; its diagonal carries
phosphate that is mined and used in the same country.  The construction is:

    1. net-reduce each bilateral trade matrix (drop the smaller of each
       reciprocal pair of values),
    2. combine categories with per-category weights and net-reduce once more
       across the weighted sum,
    3. normalize to unit total,
    4. infer each country's exported and locally retained share from mining,
       use and an import correction,
    5. place the local shares on the diagonal and rescale the trade part so
       the matrix sums to one.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import AllZeroError, InvalidFlowMatrixError, LocalUseExceedsTotalError

SHARE_ATOL = 1e-9

IM_COLUMN_SUM = "column-sum"
IM_ROW_SUM = "row-sum"


class Stage(str, Enum):
    """Estimation stages, from raw weighted trade to fully corrected flows."""

    M1 = "M1"  # equal-weight trade with local use on the diagonal
    M2 = "M2"  # optimized category weights
    M3 = "M3"  # exports of non-mining countries reattributed to origins
    M4 = "M4"  # through-flow via mining countries rerouted
    M5 = "M5"  # rows of miners scaled to the mining data
    M6 = "M6"  # M5 pipeline estimated from mining data only


@dataclass
class FlowMatrix:
    """N x N matrix of global-phosphate shares for one year and stage."""

    values: np.ndarray
    stage: Stage | None
    year: int

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def local_use(self) -> np.ndarray:
        return np.diag(self.values).copy()

    def offdiagonal(self) -> np.ndarray:
        out = self.values.copy()
        np.fill_diagonal(out, 0.0)
        return out

    def validate(self, dummy_slot: int | None = None, atol: float = SHARE_ATOL) -> None:
        v = self.values
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InvalidFlowMatrixError(f"flow matrix must be square, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidFlowMatrixError("flow matrix contains non-finite entries")
        if v.min() < -1e-12:
            raise InvalidFlowMatrixError(f"negative entry {v.min():.3e} in flow matrix")
        total = v.sum()
        if abs(total - 1.0) > atol:
            raise InvalidFlowMatrixError(f"flow matrix total {total!r} is not 1")
        if dummy_slot is not None and v[dummy_slot].sum() > 1e-12:
            raise InvalidFlowMatrixError("dummy slot must not originate flow")


def normalize_shares(raw) -> np.ndarray:
    """Scale a non-negative vector to unit sum."""
    raw = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(raw)):
        raise ValueError("shares input contains non-finite entries")
    if raw.min() < 0:
        raise ValueError("shares input contains negative entries")
    total = raw.sum()
    if total <= 0:
        raise AllZeroError("cannot normalize an all-zero vector")
    return raw / total


def impute_missing_use(
    use_shares: np.ndarray,
    missing: np.ndarray,
    net_import_shares: np.ndarray,
) -> np.ndarray:
    """Fill use shares of countries without data from their net-import shares.

    Masked entries are replaced by the country's share of total net imports
    and the whole vector is renormalized to unit sum.
    """
    use_shares = np.asarray(use_shares, dtype=float)
    missing = np.asarray(missing, dtype=bool)
    if not missing.any():
        return use_shares.copy()
    out = np.where(missing, np.asarray(net_import_shares, dtype=float), use_shares)
    total = out.sum()
    if total <= 0:
        raise AllZeroError("imputed use shares are all zero")
    return out / total


def net_reduce(matrix: np.ndarray) -> np.ndarray:
    """Keep only the net direction of each bilateral pair of values."""
    matrix = np.asarray(matrix, dtype=float)
    return np.maximum(matrix - matrix.T, 0.0)


def net_tensor(stack: np.ndarray) -> np.ndarray:
    """Apply net_reduce to every category matrix of a (C, N, N) stack."""
    stack = np.asarray(stack, dtype=float)
    return np.maximum(stack - np.transpose(stack, (0, 2, 1)), 0.0)


def weighted_trade(net_stack: np.ndarray, weights) -> np.ndarray:
    """Weighted sum of per-category net matrices, netted once more.

    ``net_stack`` must already be net-reduced per category; the cross-category
    netting removes reciprocal flows that appear through different goods.
    ``weights`` may be an array of length C or anything with a ``weights``
    attribute holding one.
    """
    w = np.asarray(getattr(weights, "weights", weights), dtype=float)
    combined = np.tensordot(w, np.asarray(net_stack, dtype=float), axes=1)
    return net_reduce(combined)


def normalize_trade(matrix: np.ndarray) -> np.ndarray:
    """Scale a trade matrix to unit total."""
    matrix = np.asarray(matrix, dtype=float)
    total = matrix.sum()
    if total <= 0:
        raise AllZeroError("trade matrix has no positive entries")
    return matrix / total


def implied_local_use(
    mining: np.ndarray,
    use: np.ndarray,
    trade_norm: np.ndarray,
    gamma_tr: float = 0.6,
    im_convention: str = IM_COLUMN_SUM,
) -> tuple[np.ndarray, np.ndarray]:
    """Infer exported and locally retained shares per country.

    A country's implied exports are what it mines, minus what it uses, plus
    the share of trade it imports (scaled by ``gamma_tr``, the overall
    traded-versus-locally-used correction); what remains of its mining stays
    local.  Both vectors are clamped at zero.

    ``im_convention`` selects whether imports are read from column sums of
    the normalized trade matrix (the default) or from row sums.
    """
    mining = np.asarray(mining, dtype=float)
    use = np.asarray(use, dtype=float)
    trade_norm = np.asarray(trade_norm, dtype=float)
    if not 0.0 <= gamma_tr <= 1.0:
        raise ValueError(f"gamma_tr must be in [0, 1], got {gamma_tr}")
    if im_convention == IM_COLUMN_SUM:
        gross = trade_norm.sum(axis=0)
    elif im_convention == IM_ROW_SUM:
        gross = trade_norm.sum(axis=1)
    else:
        raise ValueError(f"unknown import convention: {im_convention!r}")
    imports = gamma_tr * gross
    exported = np.maximum(mining - use + imports, 0.0)
    local = np.maximum(mining - exported, 0.0)
    return exported, local


def assemble_m1(
    trade_norm: np.ndarray,
    local: np.ndarray,
    year: int = 0,
    stage: Stage = Stage.M1,
) -> FlowMatrix:
    """Combine normalized trade and local-use shares into a flow matrix.

    The trade part is scaled by one minus the total local share and the local
    shares go on the diagonal, so the result sums to one.
    """
    trade_norm = np.asarray(trade_norm, dtype=float)
    local = np.asarray(local, dtype=float)
    total_local = local.sum()
    if total_local > 1.0 + SHARE_ATOL:
        raise LocalUseExceedsTotalError(
            f"local-use shares sum to {total_local!r}, exceeding the global total"
        )
    scale = max(1.0 - total_local, 0.0)
    values = trade_norm * scale + np.diag(local)
    if abs(values.sum() - 1.0) > SHARE_ATOL:
        raise AllZeroError(
            "trade matrix carries no flow although local use does not cover the total"
        )
    return FlowMatrix(values, stage, year)
