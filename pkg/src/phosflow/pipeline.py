"""Orchestration of the full per-year estimation chain.

For each requested year: ingest, stage-one assembly with equal weights,
weight optimization, the three corrections, fit reports for every stage,
then cross-year similarity analysis and a run summary.  All outputs are
written deterministically; two runs with the same config, inputs and seed
differ only in the manifest timestamp.

Output layout under the configured directory:

    manifest.json                  resolved config, input checksum, failures
    summary.csv / summary.json     per-year fit reports and per-stage stats
    <year>/<stage>.csv|.json       wide matrix and JSON envelope per stage
    <year>/<stage>_edges.csv       nonzero edge list
    weights/<year>_<stage>.json    estimated weights and category shares
    dynamics/*.csv                 similarity series, decay and raw pairs
"""

from __future__ import annotations

import datetime
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import serialize
from .corrections import (
    REBAL_OFF_DIAGONAL,
    CorrectionAudit,
    CorrectionParams,
    correct_origination,
    correct_throughflow,
    scale_to_mining,
)
from .errors import (
    NegativeTotalError,
    OverlappingGroupsError,
    PhosflowError,
    PhosflowWarning,
    PipelineError,
    UnknownCountryError,
)
from .fit import FitReport, fit_report
from .flows import (
    IM_COLUMN_SUM,
    FlowMatrix,
    Stage,
    impute_missing_use,
    net_tensor,
    normalize_shares,
    weighted_trade,
)
from .ingest import infer_registry, load_aliases, load_mining, load_trade, load_use
from .registry import EU27, CountryRegistry, GoodsCategoryTable
from .weights import OptimizerConfig, WeightVector, make_assembly_eval, optimize_weights

_STAGE_RANK = {stage: i for i, stage in enumerate(Stage)}


@dataclass
class RunConfig:
    """Declarative description of one pipeline run."""

    mining_path: str | None = None
    use_path: str | None = None
    trade_path: str | None = None
    countries_path: str | None = None
    aliases_path: str | None = None
    years: list[int] | None = None        # explicit years; overrides start/end
    year_start: int | None = None
    year_end: int | None = None
    stage: Stage = Stage.M5               # last stage to compute
    gamma_tr: float = 0.6
    gamma_p: float = 0.4
    gamma_r: float = 1.0
    gamma_r_m6: float = 0.9
    alpha_m: float = 2.0 / 3.0
    alpha_u: float = 1.0 / 3.0
    active_category_count: int = 11
    optimizer_max_evals: int = 2000
    optimizer_tol: float = 1e-6
    optimizer_restarts: int = 8
    im_convention: str = IM_COLUMN_SUM
    rebal_denominator: str = REBAL_OFF_DIAGONAL
    miner_share_floor: float = 0.01
    scale_m_floor: float = 0.005
    scale_out_floor: float = 0.003
    dynamics_stage: Stage = Stage.M4
    dynamics_max_lag: int | None = None
    global_tonnage: dict[int, float] | None = None
    out_dir: str | None = None
    strict: bool = False
    seed: int = 0
    workers: int = 1
    joint_weight_tuning: bool = False
    audit: bool = False

    def __post_init__(self):
        if isinstance(self.stage, str):
            self.stage = Stage(self.stage)
        if isinstance(self.dynamics_stage, str):
            self.dynamics_stage = Stage(self.dynamics_stage)
        for name in ("gamma_tr", "gamma_p", "gamma_r", "gamma_r_m6", "alpha_m", "alpha_u"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if abs(self.alpha_m + self.alpha_u - 1.0) > 1e-9:
            raise ValueError("alpha_m and alpha_u must sum to 1")
        if self.year_start is not None and self.year_end is not None:
            if self.year_end < self.year_start:
                raise ValueError("empty year range")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "global_tonnage" in raw and raw["global_tonnage"] is not None:
            raw["global_tonnage"] = {int(k): float(v) for k, v in raw["global_tonnage"].items()}
        return cls(**raw)

    def to_dict(self) -> dict:
        out = {}
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            if isinstance(value, Stage):
                value = value.value
            out[name] = value
        return out

    def resolved_out_dir(self) -> Path:
        base = self.out_dir or os.environ.get("PHOSFLOW_OUT") or "out"
        return Path(base)

    def correction_params(self, gamma_r: float | None = None) -> CorrectionParams:
        return CorrectionParams(
            gamma_p=self.gamma_p,
            gamma_r=self.gamma_r if gamma_r is None else gamma_r,
            miner_share_floor=self.miner_share_floor,
            scale_m_floor=self.scale_m_floor,
            scale_out_floor=self.scale_out_floor,
        )

    def optimizer_config(self, alpha_m: float | None = None, alpha_u: float | None = None) -> OptimizerConfig:
        return OptimizerConfig(
            active_category_count=self.active_category_count,
            max_iterations=self.optimizer_max_evals,
            convergence_tol=self.optimizer_tol,
            restarts=self.optimizer_restarts,
            seed=self.seed,
            alpha_m=self.alpha_m if alpha_m is None else alpha_m,
            alpha_u=self.alpha_u if alpha_u is None else alpha_u,
        )


@dataclass
class YearResult:
    """Stage matrices, reports and weights computed for one year."""

    year: int
    stages: dict[Stage, FlowMatrix]
    reports: dict[Stage, FitReport]
    weights: dict[Stage, WeightVector]
    mining: np.ndarray
    use: np.ndarray
    audit: CorrectionAudit | None = None


@dataclass
class RunSummary:
    """Everything a finished run produced, mirroring the written files."""

    years: list[int]
    reports: list[FitReport]
    stage_stats: dict[str, dict[str, tuple[float, float]]]
    weights: dict[int, dict[str, dict]]
    dynamics: dict
    tonnage_totals: dict[int, float]
    failures: list[tuple[int, str]]
    out_dir: str
    input_checksum: str | None = None


def compute_stages(
    tensor: np.ndarray,
    mining_raw: np.ndarray,
    use_raw: np.ndarray,
    use_missing: np.ndarray | None,
    cfg: RunConfig,
    year: int,
    dummy_slot: int | None = None,
    audit: CorrectionAudit | None = None,
) -> YearResult:
    """Run the stage chain for one year of in-memory data.

    Use shares of countries flagged in ``use_missing`` are imputed from their
    net-import shares under equal category weights, once, before any weight
    search; the imputed vector is the fit target for every stage.
    """
    tensor = np.asarray(tensor, dtype=float)
    n_cat = tensor.shape[0]
    nets = net_tensor(tensor)
    mining = normalize_shares(mining_raw)

    equal = WeightVector.equal(n_cat)
    trade_equal = weighted_trade(nets, equal)
    net_imports = np.maximum(trade_equal.sum(axis=0) - trade_equal.sum(axis=1), 0.0)
    import_total = net_imports.sum()
    import_shares = net_imports / import_total if import_total > 0 else net_imports

    use_raw = np.asarray(use_raw, dtype=float)
    if use_raw.sum() > 0:
        use_base = normalize_shares(use_raw)
    else:
        use_base = np.zeros_like(use_raw)
    if use_missing is None:
        use_missing = np.zeros(use_base.shape[0], dtype=bool)
    use = impute_missing_use(use_base, use_missing, import_shares)

    target = cfg.stage
    params = cfg.correction_params()
    stages: dict[Stage, FlowMatrix] = {}
    reports: dict[Stage, FitReport] = {}
    weight_vectors: dict[Stage, WeightVector] = {}

    assembly = make_assembly_eval(nets, mining, use, cfg.gamma_tr, cfg.im_convention)

    def chain_values(weights_full: np.ndarray, gamma_r: float) -> np.ndarray:
        flow = FlowMatrix(assembly(weights_full), Stage.M2, year)
        flow = correct_origination(flow, mining, cfg.rebal_denominator)
        flow = correct_throughflow(flow, mining, params, cfg.rebal_denominator)
        flow = scale_to_mining(
            flow, mining, replace(params, gamma_r=gamma_r), Stage.M5, cfg.rebal_denominator
        )
        return flow.values

    def add(stage: Stage, flow: FlowMatrix) -> FlowMatrix:
        flow.validate(dummy_slot=dummy_slot)
        stages[stage] = flow
        reports[stage] = fit_report(flow, mining, use, cfg.alpha_m, cfg.alpha_u)
        return flow

    def estimate(opt_cfg: OptimizerConfig, gamma_r: float) -> WeightVector:
        if cfg.joint_weight_tuning:
            def evaluator(w):
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", PhosflowWarning)
                    return chain_values(w, gamma_r)
        else:
            evaluator = assembly
        vector, _ = optimize_weights(
            tensor, mining, use, opt_cfg, pipeline_eval=evaluator, year=year
        )
        return vector

    flow = add(Stage.M1, FlowMatrix(assembly(equal.weights), Stage.M1, year))
    weight_vectors[Stage.M1] = equal

    if _STAGE_RANK[target] >= _STAGE_RANK[Stage.M2]:
        vector = estimate(cfg.optimizer_config(), cfg.gamma_r)
        weight_vectors[Stage.M2] = vector
        flow = add(Stage.M2, FlowMatrix(assembly(vector.weights), Stage.M2, year))
    if _STAGE_RANK[target] >= _STAGE_RANK[Stage.M3]:
        flow = add(Stage.M3, correct_origination(flow, mining, cfg.rebal_denominator, audit))
    if _STAGE_RANK[target] >= _STAGE_RANK[Stage.M4]:
        flow = add(Stage.M4, correct_throughflow(flow, mining, params, cfg.rebal_denominator, audit))
    if _STAGE_RANK[target] >= _STAGE_RANK[Stage.M5]:
        flow = add(
            Stage.M5,
            scale_to_mining(flow, mining, params, Stage.M5, cfg.rebal_denominator, audit),
        )

    if target is Stage.M6:
        run_stage6_variant(
            tensor, mining, use, cfg, year,
            stages=stages, reports=reports, weight_vectors=weight_vectors,
            dummy_slot=dummy_slot, audit=audit,
        )

    return YearResult(year, stages, reports, weight_vectors, mining, use, audit)


def run_stage6_variant(
    tensor: np.ndarray,
    mining: np.ndarray,
    use: np.ndarray,
    cfg: RunConfig,
    year: int,
    stages: dict,
    reports: dict,
    weight_vectors: dict,
    dummy_slot: int | None = None,
    audit: CorrectionAudit | None = None,
) -> FlowMatrix:
    """Mining-only estimation variant: weights fitted with the use term off.

    Re-runs the whole chain with weights optimized against mining data alone
    and a slightly damped row scaling; only the final matrix is kept, tagged
    M6.  Its report still uses the configured alphas so D is comparable
    across stages.
    """
    nets = net_tensor(np.asarray(tensor, dtype=float))
    assembly = make_assembly_eval(nets, mining, use, cfg.gamma_tr, cfg.im_convention)
    params = cfg.correction_params(gamma_r=cfg.gamma_r_m6)

    opt_cfg = cfg.optimizer_config(alpha_m=1.0, alpha_u=0.0)
    if cfg.joint_weight_tuning:
        def evaluator(w):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", PhosflowWarning)
                flow = FlowMatrix(assembly(w), Stage.M2, year)
                flow = correct_origination(flow, mining, cfg.rebal_denominator)
                flow = correct_throughflow(flow, mining, params, cfg.rebal_denominator)
                return scale_to_mining(flow, mining, params, Stage.M6, cfg.rebal_denominator).values
    else:
        evaluator = assembly
    vector, _ = optimize_weights(
        tensor, mining, use, opt_cfg, pipeline_eval=evaluator, year=year, stage=Stage.M6
    )

    flow = FlowMatrix(assembly(vector.weights), Stage.M2, year)
    flow = correct_origination(flow, mining, cfg.rebal_denominator, audit)
    flow = correct_throughflow(flow, mining, params, cfg.rebal_denominator, audit)
    flow = scale_to_mining(flow, mining, params, Stage.M6, cfg.rebal_denominator, audit)
    flow.validate(dummy_slot=dummy_slot)

    stages[Stage.M6] = flow
    reports[Stage.M6] = fit_report(flow, mining, use, cfg.alpha_m, cfg.alpha_u)
    weight_vectors[Stage.M6] = vector
    return flow


def scale_to_tonnage(flow: FlowMatrix, global_total: float) -> np.ndarray:
    """Convert shares to tonnes by multiplying with the year's global total."""
    if global_total < 0:
        raise NegativeTotalError(f"global tonnage must be >= 0, got {global_total}")
    return flow.values * float(global_total)


def country_report(
    flow: FlowMatrix,
    tensor: np.ndarray,
    registry: CountryRegistry,
    categories: GoodsCategoryTable,
    code: str,
) -> dict:
    """Trade and material-flow breakdown for one country.

    Includes per-category USD imports and exports (with shares of the
    country's totals) and material in/out-flow partners sorted by descending
    share, ties broken by code.
    """
    slot = registry.slot_of(code)
    tensor = np.asarray(tensor, dtype=float)
    exports = tensor[:, slot, :].sum(axis=1)
    imports = tensor[:, :, slot].sum(axis=1)
    exp_total = exports.sum()
    imp_total = imports.sum()
    codes = registry.codes

    def partners(vector: np.ndarray) -> list[dict]:
        pairs = [
            {"country": codes[j], "share": float(v)}
            for j, v in enumerate(vector)
            if j != slot and v > 0
        ]
        return sorted(pairs, key=lambda p: (-p["share"], p["country"]))

    return {
        "country": code.strip().upper(),
        "year": flow.year,
        "stage": flow.stage.value if flow.stage else None,
        "usd_exports": {c.hs6: float(v) for c, v in zip(categories.categories, exports)},
        "usd_imports": {c.hs6: float(v) for c, v in zip(categories.categories, imports)},
        "usd_export_shares": {
            c.hs6: float(v / exp_total) if exp_total > 0 else 0.0
            for c, v in zip(categories.categories, exports)
        },
        "usd_import_shares": {
            c.hs6: float(v / imp_total) if imp_total > 0 else 0.0
            for c, v in zip(categories.categories, imports)
        },
        "material_outflows": partners(flow.values[slot, :]),
        "material_inflows": partners(flow.values[:, slot]),
        "local_use": float(flow.values[slot, slot]),
    }


def emit_flow_diagram_data(
    flow: FlowMatrix,
    registry: CountryRegistry,
    groups: dict[str, list[str]],
    rest_name: str = "ROW",
) -> list[tuple[str, str, float]]:
    """Aggregate the flow matrix into groups and emit a chord-ready edge list.

    Countries not claimed by any group are collected under ``rest_name``.
    Every ordered group pair (including self-edges) appears exactly once;
    group totals equal the sums of their members' flows.
    """
    slot_group: dict[int, str] = {}
    order: list[str] = []
    for name, members in groups.items():
        order.append(name)
        for code in members:
            slot = registry.slot_of(code)
            if slot in slot_group:
                raise OverlappingGroupsError(
                    f"country {code!r} is in both {slot_group[slot]!r} and {name!r}"
                )
            slot_group[slot] = name
    uncovered = [i for i in range(registry.n) if i not in slot_group]
    if uncovered:
        if rest_name not in order:
            order.append(rest_name)
        for slot in uncovered:
            slot_group[slot] = rest_name

    index = {name: k for k, name in enumerate(order)}
    agg = np.zeros((len(order), len(order)))
    for i in range(registry.n):
        for j in range(registry.n):
            agg[index[slot_group[i]], index[slot_group[j]]] += flow.values[i, j]
    return [
        (origin, destination, float(agg[index[origin], index[destination]]))
        for origin in order
        for destination in order
    ]


def paper_style_grouping(
    flow: FlowMatrix,
    registry: CountryRegistry,
    top_n: int = 6,
    eu_block: bool = True,
) -> dict[str, list[str]]:
    """Top-N countries by total flow involvement, an EU27 block, rest as ROW."""
    eu_slots = {registry.slot_of(c) for c in EU27 if c in registry} if eu_block else set()
    involvement = flow.values.sum(axis=0) + flow.values.sum(axis=1)
    candidates = [
        i for i in range(registry.n)
        if i != registry.dummy_slot and i not in eu_slots
    ]
    candidates.sort(key=lambda i: (-involvement[i], registry.codes[i]))
    groups = {registry.codes[i]: [registry.codes[i]] for i in candidates[:top_n]}
    if eu_slots:
        groups["EU27"] = [registry.codes[i] for i in sorted(eu_slots)]
    return groups


def _resolve_years(cfg: RunConfig, available: list[int]) -> list[int]:
    if cfg.years:
        return sorted(set(int(y) for y in cfg.years))
    if cfg.year_start is not None and cfg.year_end is not None:
        return list(range(cfg.year_start, cfg.year_end + 1))
    return sorted(available)


def _stage_stats(reports: list[FitReport]) -> dict[str, dict[str, tuple[float, float]]]:
    by_stage: dict[str, list[FitReport]] = {}
    for report in reports:
        by_stage.setdefault(report.stage.value, []).append(report)
    stats = {}
    for stage, items in sorted(by_stage.items()):
        stats[stage] = {}
        for metric in ("d", "r2_min", "r2_use", "r2_pooled"):
            values = np.array([getattr(r, metric) for r in items])
            stats[stage][metric] = (float(values.mean()), float(values.std()))
    return stats


def _weight_payload(
    year: int,
    stage: Stage,
    vector: WeightVector,
    categories: GoodsCategoryTable,
    net_stack: np.ndarray,
) -> dict:
    volumes = np.asarray(net_stack, dtype=float).sum(axis=(1, 2))
    total = volumes.sum()
    weighted = vector.weights * volumes
    weighted_total = weighted.sum()
    return {
        "year": year,
        "stage": stage.value,
        "weights": vector.as_dict(categories),
        "active": {c.hs6: bool(a) for c, a in zip(categories.categories, vector.active)},
        "usd_net_share": {
            c.hs6: float(v / total) if total > 0 else 0.0
            for c, v in zip(categories.categories, volumes)
        },
        "weighted_share": {
            c.hs6: float(v / weighted_total) if weighted_total > 0 else 0.0
            for c, v in zip(categories.categories, weighted)
        },
    }


def _write_year(
    out_dir: Path,
    result: YearResult,
    registry: CountryRegistry,
    categories: GoodsCategoryTable,
    net_stack: np.ndarray,
    cfg: RunConfig,
    checksum: str,
) -> dict[str, dict]:
    year_dir = out_dir / str(result.year)
    year_dir.mkdir(parents=True, exist_ok=True)
    for stage in sorted(result.stages, key=_STAGE_RANK.get):
        flow = result.stages[stage]
        serialize.write_matrix_csv(year_dir / f"{stage.value}.csv", flow, registry)
        serialize.write_matrix_edges(year_dir / f"{stage.value}_edges.csv", flow, registry)
        serialize.write_flow_json(year_dir / f"{stage.value}.json", flow, registry, checksum)

    tonnage = (cfg.global_tonnage or {}).get(result.year)
    if tonnage is not None and cfg.stage in result.stages:
        scaled = scale_to_tonnage(result.stages[cfg.stage], tonnage)
        serialize.write_rows_csv(
            year_dir / f"{cfg.stage.value}_tonnage.csv",
            ["origin", "destination", "tonnes_p2o5"],
            (
                (registry.codes[i], registry.codes[j], float(scaled[i, j]))
                for i, j in zip(*np.nonzero(scaled))
            ),
        )

    if result.audit is not None:
        serialize.write_rows_csv(
            year_dir / "audit.csv",
            ["stage", "country", "rule", "amount"],
            (
                (stage, registry.codes[slot], rule, amount)
                for stage, slot, rule, amount in result.audit.rows
            ),
        )

    weights_dir = out_dir / "weights"
    weights_dir.mkdir(parents=True, exist_ok=True)
    payloads = {}
    for stage, vector in result.weights.items():
        payload = _weight_payload(result.year, stage, vector, categories, net_stack)
        serialize.write_json(weights_dir / f"{result.year}_{stage.value}.json", payload)
        payloads[stage.value] = payload
    return payloads


def run_pipeline(cfg: RunConfig) -> RunSummary:
    """Execute a full run as described by the config; returns the summary.

    Failures of individual years are recorded in the manifest and do not
    abort the remaining years; a run where every year fails raises.
    """
    out_dir = cfg.resolved_out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)

    aliases = load_aliases(cfg.aliases_path) if cfg.aliases_path else None
    if cfg.countries_path:
        registry = CountryRegistry.from_csv(cfg.countries_path)
    else:
        registry = infer_registry(cfg.mining_path, cfg.use_path, cfg.trade_path, aliases)
    categories = GoodsCategoryTable.default()

    mining_data = load_mining(cfg.mining_path, registry, cfg.strict, aliases)
    use_data = load_use(cfg.use_path, registry, cfg.strict, aliases)
    trade_data = load_trade(cfg.trade_path, registry, categories, cfg.strict, aliases)

    available = sorted(set(mining_data.values) & set(trade_data.values))
    years = _resolve_years(cfg, available)
    if not years:
        raise PipelineError("no years to process")

    checksum = serialize.file_checksum(
        cfg.mining_path, cfg.use_path, cfg.trade_path, cfg.countries_path, cfg.aliases_path
    )

    failures: list[tuple[int, str]] = []
    results: dict[int, YearResult] = {}

    def compute(year: int):
        if year not in mining_data.values:
            raise PipelineError(f"no mining data for {year}")
        if year not in trade_data.values:
            raise PipelineError(f"no trade data for {year}")
        use_raw = use_data.values.get(year, np.zeros(registry.n))
        missing = use_data.missing.get(year, np.ones(registry.n, dtype=bool))
        audit = CorrectionAudit() if cfg.audit else None
        return compute_stages(
            trade_data.values[year],
            mining_data.values[year],
            use_raw,
            missing,
            cfg,
            year,
            dummy_slot=registry.dummy_slot,
            audit=audit,
        )

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            futures = {year: pool.submit(compute, year) for year in years}
        outcomes = [(year, futures[year]) for year in years]
        for year, future in outcomes:
            try:
                results[year] = future.result()
            except PhosflowError as exc:
                failures.append((year, str(exc)))
    else:
        for year in years:
            try:
                results[year] = compute(year)
            except PhosflowError as exc:
                failures.append((year, str(exc)))

    all_weights: dict[int, dict[str, dict]] = {}
    reports: list[FitReport] = []
    tonnage_totals: dict[int, float] = {}
    for year in sorted(results):
        result = results[year]
        net_stack = net_tensor(trade_data.values[year])
        all_weights[year] = _write_year(out_dir, result, registry, categories, net_stack, cfg, checksum)
        for stage in sorted(result.reports, key=_STAGE_RANK.get):
            reports.append(result.reports[stage])
        tonnage = (cfg.global_tonnage or {}).get(year)
        if tonnage is not None:
            tonnage_totals[year] = float(tonnage)

    dynamics_payload: dict = {}
    dyn_matrices = {
        year: results[year].stages[cfg.dynamics_stage]
        for year in results
        if cfg.dynamics_stage in results[year].stages
    }
    if len(dyn_matrices) >= 2:
        from . import dynamics as dyn

        dyn_dir = out_dir / "dynamics"
        dyn_dir.mkdir(parents=True, exist_ok=True)
        series = dyn.similarity_series(dyn_matrices)
        span = max(dyn_matrices) - min(dyn_matrices)
        max_lag = min(cfg.dynamics_max_lag or span, span)
        decay = dyn.similarity_decay(dyn_matrices, max_lag)
        pairs = dyn.similarity_pairs(dyn_matrices, max_lag)
        serialize.write_rows_csv(dyn_dir / "similarity.csv", ["year", "jaccard"], series)
        serialize.write_rows_csv(dyn_dir / "decay.csv", ["lag", "mean_jaccard"], decay)
        serialize.write_rows_csv(dyn_dir / "decay_pairs.csv", ["year", "lag", "jaccard"], pairs)
        dynamics_payload = {
            "stage": cfg.dynamics_stage.value,
            "series": [(int(y), float(j)) for y, j in series],
            "decay": [(int(l), float(j)) for l, j in decay],
        }

    stats = _stage_stats(reports) if reports else {}
    serialize.write_fit_csv(out_dir / "summary.csv", reports)
    serialize.write_json(
        out_dir / "summary.json",
        {
            "years": sorted(results),
            "reports": [r.to_dict() for r in reports],
            "stage_stats": {
                stage: {metric: {"mean": mean, "sd": sd} for metric, (mean, sd) in metrics.items()}
                for stage, metrics in stats.items()
            },
            "dynamics": dynamics_payload,
            "tonnage_totals": {str(k): v for k, v in tonnage_totals.items()},
        },
    )

    manifest = {
        "config": cfg.to_dict(),
        "input_checksum": checksum,
        "ingest_warnings": {
            "mining": mining_data.warnings,
            "use": use_data.warnings,
            "trade": trade_data.warnings,
        },
        "failures": [{"year": year, "error": message} for year, message in failures],
        "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    serialize.write_json(out_dir / "manifest.json", manifest)

    if not results:
        raise PipelineError(f"all years failed: {failures}")

    return RunSummary(
        years=sorted(results),
        reports=reports,
        stage_stats=stats,
        weights=all_weights,
        dynamics=dynamics_payload,
        tonnage_totals=tonnage_totals,
        failures=failures,
        out_dir=str(out_dir),
        input_checksum=checksum,
    )
