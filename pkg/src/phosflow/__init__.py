"""phosflow: country-level phosphate flow matrices from trade, mining and use data."""

from .corrections import (
    CorrectionAudit,
    CorrectionParams,
    correct_origination,
    correct_throughflow,
    renormalize,
    scale_to_mining,
)
from .dynamics import similarity_decay, similarity_series, weighted_jaccard
from .fit import FitReport, fit_report, objective_d, predict_mining, predict_use, r_squared
from .flows import (
    FlowMatrix,
    Stage,
    assemble_m1,
    implied_local_use,
    impute_missing_use,
    net_reduce,
    net_tensor,
    normalize_shares,
    normalize_trade,
    weighted_trade,
)
from .ingest import infer_registry, load_aliases, load_mining, load_trade, load_use
from .pipeline import (
    RunConfig,
    RunSummary,
    YearResult,
    compute_stages,
    country_report,
    emit_flow_diagram_data,
    paper_style_grouping,
    run_pipeline,
    run_stage6_variant,
    scale_to_tonnage,
)
from .reference import brute_force_reference
from .registry import EU27, CountryRegistry, GoodsCategoryTable
from .synth import SynthWorld, SynthWorldConfig, generate_world, write_world
from .weights import (
    OptimizerConfig,
    WeightVector,
    make_assembly_eval,
    optimize_weights,
    select_active_categories,
)

__version__ = "0.1.0"

__all__ = [
    "CorrectionAudit",
    "CorrectionParams",
    "CountryRegistry",
    "EU27",
    "FitReport",
    "FlowMatrix",
    "GoodsCategoryTable",
    "OptimizerConfig",
    "RunConfig",
    "RunSummary",
    "Stage",
    "SynthWorld",
    "SynthWorldConfig",
    "WeightVector",
    "YearResult",
    "assemble_m1",
    "brute_force_reference",
    "compute_stages",
    "correct_origination",
    "correct_throughflow",
    "country_report",
    "emit_flow_diagram_data",
    "fit_report",
    "generate_world",
    "implied_local_use",
    "impute_missing_use",
    "infer_registry",
    "load_aliases",
    "load_mining",
    "load_trade",
    "load_use",
    "make_assembly_eval",
    "net_reduce",
    "net_tensor",
    "normalize_shares",
    "normalize_trade",
    "objective_d",
    "optimize_weights",
    "paper_style_grouping",
    "predict_mining",
    "predict_use",
    "r_squared",
    "renormalize",
    "run_pipeline",
    "run_stage6_variant",
    "scale_to_mining",
    "scale_to_tonnage",
    "select_active_categories",
    "similarity_decay",
    "similarity_series",
    "weighted_jaccard",
    "weighted_trade",
    "write_world",
]
