"""Correction stages applied after weight optimization.

Three transformations refine the weighted-trade flow matrix:

    * origination: exports booked to countries that mine nothing are
      reattributed to the mining countries they import from (stage M3),
    * through-flow: part of what flows in and out of a mining country is
      rerouted past it, source to destination (stage M4),
    * mining anchoring: rows of mining countries are rescaled so their sums
      match the reported mining shares (stage M5, damped variant M6).

Each stage ends with the shared renormalization: the diagonal (local use) is
kept as it was before the stage and the off-diagonal trade part is rescaled
to the remaining share of the global total.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DroppedFlowWarning,
    NoMinerImportsWarning,
    NonPositiveExpectedOutflowWarning,
    PhosflowWarning,
    ZeroOffDiagonalError,
)
from .flows import SHARE_ATOL, FlowMatrix, Stage

REBAL_OFF_DIAGONAL = "off-diagonal"
REBAL_FULL = "full"

# additions below this size are treated as numerically zero
_EPS = 1e-15


@dataclass
class CorrectionParams:
    """Tuning constants of the correction stages, all in share units."""

    gamma_p: float = 0.4          # fraction of potential through-flow rerouted
    gamma_r: float = 1.0          # damping of the mining-anchoring factor
    miner_share_floor: float = 0.01   # minimum mining share for through-flow
    scale_m_floor: float = 0.005      # minimum mining share for row scaling
    scale_out_floor: float = 0.003    # minimum expected outflow for row scaling

    def __post_init__(self):
        for name in ("gamma_p", "gamma_r", "miner_share_floor", "scale_m_floor", "scale_out_floor"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")


@dataclass
class CorrectionAudit:
    """Log of per-country correction events, for optional CSV dumps."""

    rows: list = field(default_factory=list)

    def add(self, stage: Stage, slot: int, rule: str, amount: float) -> None:
        self.rows.append((stage.value, slot, rule, float(amount)))


def renormalize(
    star: np.ndarray,
    previous: FlowMatrix,
    stage: Stage | None = None,
    denominator: str = REBAL_OFF_DIAGONAL,
) -> FlowMatrix:
    """Rescale the trade part of a corrected matrix back to unit total.

    The diagonal of ``previous`` is restored unchanged (local use was derived
    from absolute data) and the off-diagonal part of ``star`` is scaled so
    its total equals one minus the restored trace.  ``denominator`` selects
    whether the scale divides by the off-diagonal sum (default; preserves the
    unit total) or by the full sum of ``star`` including its diagonal.
    """
    star = np.asarray(star, dtype=float)
    diag_prev = np.diag(previous.values).copy()
    trace_prev = diag_prev.sum()
    off = star.copy()
    np.fill_diagonal(off, 0.0)
    off_total = off.sum()
    target = 1.0 - trace_prev
    if off_total <= 0.0:
        if target > SHARE_ATOL:
            raise ZeroOffDiagonalError(
                "all trade was eliminated although local use does not cover the total"
            )
        values = np.diag(diag_prev)
    else:
        denom = off_total if denominator == REBAL_OFF_DIAGONAL else star.sum()
        if denominator not in (REBAL_OFF_DIAGONAL, REBAL_FULL):
            raise ValueError(f"unknown rebalance denominator: {denominator!r}")
        values = off * (target / denom) + np.diag(diag_prev)
    return FlowMatrix(values, stage if stage is not None else previous.stage, previous.year)


def _offdiag_row(work: np.ndarray, i: int) -> np.ndarray:
    row = work[i].copy()
    row[i] = 0.0
    return row


def _offdiag_col(work: np.ndarray, i: int) -> np.ndarray:
    col = work[:, i].copy()
    col[i] = 0.0
    return col


def correct_origination(
    flow: FlowMatrix,
    mining: np.ndarray,
    denominator: str = REBAL_OFF_DIAGONAL,
    audit: CorrectionAudit | None = None,
) -> FlowMatrix:
    """Reattribute exports of non-mining countries to their mining sources.

    For each country without mining, in descending order of exported share:
    its exports are re-booked as direct flows from the mining countries it
    imports from (proportional to import and export shares), its own row is
    cleared, and its imports from miners are scaled down to the amount it
    uses locally.  A non-miner without any imports from miners has its
    exports spread over all of its import sources instead (with a warning);
    if it has no import sources at all its exported mass is dropped (the
    final renormalization redistributes it).

    After this stage every country with zero mining share has a zero
    off-diagonal row.
    """
    mining = np.asarray(mining, dtype=float)
    work = flow.values.copy()
    n = work.shape[0]
    miner_mask = mining > 0.0

    initial_out = work.sum(axis=1) - np.diag(work)
    order = sorted(
        (i for i in range(n) if not miner_mask[i]),
        key=lambda i: (-initial_out[i], i),
    )

    for i in order:
        row = _offdiag_row(work, i)
        exported = row.sum()
        if exported <= _EPS:
            work[i, :] = np.where(np.arange(n) == i, work[i, :], 0.0)
            continue
        col = _offdiag_col(work, i)
        inflow = col.sum()
        local = max(0.0, inflow - exported)

        miner_imports = col[miner_mask].sum()
        if miner_imports > _EPS:
            source_shares = np.where(miner_mask, col, 0.0) / miner_imports
            rule = "origination"
        elif inflow > _EPS:
            warnings.warn(
                f"non-mining exporter at slot {i} has no imports from miners; "
                "reattributing over all import sources",
                NoMinerImportsWarning,
                stacklevel=2,
            )
            source_shares = col / inflow
            rule = "origination-all-sources"
        else:
            warnings.warn(
                f"non-mining exporter at slot {i} has no import sources; "
                f"dropping {exported:.3e} of flow",
                DroppedFlowWarning,
                stacklevel=2,
            )
            work[i, :] = 0.0
            if audit is not None:
                audit.add(Stage.M3, i, "dropped", exported)
            continue

        export_shares = row / exported
        work += exported * np.outer(source_shares, export_shares)
        work[i, :] = 0.0

        # keep only what the country uses locally of its (miner) imports
        if miner_imports > _EPS:
            ratio = min(1.0, local / miner_imports)
            work[miner_mask, i] *= ratio
        else:
            ratio = local / inflow
            work[:, i] *= ratio
        if audit is not None:
            audit.add(Stage.M3, i, rule, exported)
            audit.add(Stage.M3, i, "imports-scaled", ratio)

    return renormalize(work, flow, Stage.M3, denominator)


def correct_throughflow(
    flow: FlowMatrix,
    mining: np.ndarray,
    params: CorrectionParams,
    denominator: str = REBAL_OFF_DIAGONAL,
    audit: CorrectionAudit | None = None,
) -> FlowMatrix:
    """Reroute part of the flow passing through mining countries.

    For each country whose mining share is at least ``miner_share_floor``,
    the potential through-flow is the smaller of its off-diagonal in- and
    out-flow.  A fraction ``gamma_p`` of it is re-booked directly from the
    country's sources to its destinations (outer product of in- and out-flow
    shares) and removed from the country's own row and column.
    """
    mining = np.asarray(mining, dtype=float)
    work = flow.values.copy()
    n = work.shape[0]
    qualifying = [i for i in range(n) if mining[i] >= params.miner_share_floor]

    initial = flow.offdiagonal()
    p0 = np.minimum(initial.sum(axis=1), initial.sum(axis=0))
    order = sorted(qualifying, key=lambda i: (-p0[i], i))

    if params.gamma_p > 0.0:
        for i in order:
            row = _offdiag_row(work, i)
            col = _offdiag_col(work, i)
            outflow = row.sum()
            inflow = col.sum()
            p = min(outflow, inflow)
            if p <= _EPS:
                continue
            f_out = row / outflow
            f_in = col / inflow
            move = params.gamma_p * p
            work += move * np.outer(f_in, f_out)
            work[i, :] -= move * f_out
            work[:, i] -= move * f_in
            if audit is not None:
                audit.add(Stage.M4, i, "throughflow-rerouted", move)

    if work.min() < -1e-10:
        raise AssertionError(f"through-flow update produced negative entry {work.min():.3e}")
    np.clip(work, 0.0, None, out=work)
    return renormalize(work, flow, Stage.M4, denominator)


def scale_to_mining(
    flow: FlowMatrix,
    mining: np.ndarray,
    params: CorrectionParams,
    stage: Stage = Stage.M5,
    denominator: str = REBAL_OFF_DIAGONAL,
    audit: CorrectionAudit | None = None,
    return_prenorm: bool = False,
):
    """Rescale miners' rows so their sums match the mining shares.

    For each country with mining share above ``scale_m_floor`` and expected
    outflow (mining minus local use) above ``scale_out_floor``, the row's
    off-diagonal entries are divided by

        r = (observed outflow / expected outflow - 1) * gamma_r + 1

    so that with ``gamma_r`` = 1 the row sum equals the mining share exactly,
    before the final renormalization.  With ``return_prenorm`` the matrix as
    it stands before renormalization is returned alongside the result.
    """
    mining = np.asarray(mining, dtype=float)
    work = flow.values.copy()
    n = work.shape[0]
    local = np.diag(work)
    expected_out = mining - local
    observed_out = work.sum(axis=1) - local

    for i in range(n):
        if not (mining[i] > params.scale_m_floor and expected_out[i] > params.scale_out_floor):
            continue
        if expected_out[i] <= 0.0:
            warnings.warn(
                f"expected outflow of slot {i} is not positive; row left unscaled",
                NonPositiveExpectedOutflowWarning,
                stacklevel=2,
            )
            continue
        r = (observed_out[i] / expected_out[i] - 1.0) * params.gamma_r + 1.0
        if abs(r) < 1e-6:
            warnings.warn(
                f"scale factor for slot {i} is numerically zero; row left unscaled",
                PhosflowWarning,
                stacklevel=2,
            )
            continue
        keep = work[i, i]
        work[i, :] /= r
        work[i, i] = keep
        if audit is not None:
            audit.add(stage, i, "row-scaled", r)

    prenorm = work.copy()
    result = renormalize(work, flow, stage, denominator)
    if return_prenorm:
        return result, prenorm
    return result
