"""Command-line entry points.

Verbs:
    run       execute the full pipeline from a config file
    validate  ingest-only check of the input files
    report    per-country trade and flow breakdown from a previous run
    diagram   grouped edge list for flow diagrams from a previous run
    synth     generate a synthetic world and write its input CSVs

Exit codes: 0 success, 2 validation failure, 3 runtime failure with
partial results.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import PhosflowError, PipelineError
from .flows import Stage
from .ingest import infer_registry, load_aliases, load_mining, load_trade, load_use
from .pipeline import (
    RunConfig,
    country_report,
    emit_flow_diagram_data,
    paper_style_grouping,
    run_pipeline,
)
from .registry import CountryRegistry, GoodsCategoryTable
from .serialize import read_flow_json, write_rows_csv
from .synth import SynthWorldConfig, generate_world, write_world

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {}
    for name in (
        "mining_path", "use_path", "trade_path", "countries_path", "aliases_path",
        "out_dir", "seed", "strict", "workers", "stage", "year_start", "year_end",
        "gamma_tr", "gamma_p", "gamma_r", "alpha_m", "alpha_u",
        "active_category_count", "audit",
    ):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if overrides:
        data = cfg.to_dict()
        data.update(overrides)
        cfg = RunConfig(**data)
    return cfg


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-c", "--config", help="YAML run configuration")
    parser.add_argument("--mining-path", dest="mining_path")
    parser.add_argument("--use-path", dest="use_path")
    parser.add_argument("--trade-path", dest="trade_path")
    parser.add_argument("--countries-path", dest="countries_path")
    parser.add_argument("--aliases-path", dest="aliases_path")
    parser.add_argument("--out-dir", dest="out_dir")
    parser.add_argument("--stage", choices=[s.value for s in Stage])
    parser.add_argument("--year-start", dest="year_start", type=int)
    parser.add_argument("--year-end", dest="year_end", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--gamma-tr", dest="gamma_tr", type=float)
    parser.add_argument("--gamma-p", dest="gamma_p", type=float)
    parser.add_argument("--gamma-r", dest="gamma_r", type=float)
    parser.add_argument("--alpha-m", dest="alpha_m", type=float)
    parser.add_argument("--alpha-u", dest="alpha_u", type=float)
    parser.add_argument("--active-category-count", dest="active_category_count", type=int)
    parser.add_argument("--strict", action="store_const", const=True, default=None)
    parser.add_argument("--audit", action="store_const", const=True, default=None)


def _cmd_run(args) -> int:
    try:
        cfg = _load_config(args)
    except (PhosflowError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        summary = run_pipeline(cfg)
    except PipelineError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except PhosflowError as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"wrote {summary.out_dir} ({len(summary.years)} years)")
    for stage, metrics in summary.stage_stats.items():
        mean, sd = metrics["d"]
        print(f"  {stage}: mean D = {mean:.4f} (sd {sd:.4f})")
    if summary.failures:
        for year, message in summary.failures:
            print(f"  year {year} failed: {message}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_validate(args) -> int:
    try:
        cfg = _load_config(args)
        aliases = load_aliases(cfg.aliases_path) if cfg.aliases_path else None
        if cfg.countries_path:
            registry = CountryRegistry.from_csv(cfg.countries_path)
        else:
            registry = infer_registry(cfg.mining_path, cfg.use_path, cfg.trade_path, aliases)
        categories = GoodsCategoryTable.default()
        mining = load_mining(cfg.mining_path, registry, cfg.strict, aliases)
        use = load_use(cfg.use_path, registry, cfg.strict, aliases)
        trade = load_trade(cfg.trade_path, registry, categories, cfg.strict, aliases)
    except (PhosflowError, ValueError, OSError) as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"registry: {registry.n} slots (incl. dummy)")
    for year in mining.years:
        print(f"mining {year}: total {mining.values[year].sum():.1f} t")
    for year in use.years:
        print(f"use    {year}: total {use.values[year].sum():.1f} t")
    for year in trade.years:
        print(f"trade  {year}: total {trade.values[year].sum():.1f} USD")
    for name, data in (("mining", mining), ("use", use), ("trade", trade)):
        for message in data.warnings:
            print(f"warning [{name}]: {message}")
    return EXIT_OK


def _stage_file(cfg: RunConfig, year: int, stage: Stage) -> Path:
    return cfg.resolved_out_dir() / str(year) / f"{stage.value}.json"


def _registry_from_codes(codes: list[str]) -> CountryRegistry:
    # envelopes store the dummy as the last code
    return CountryRegistry.from_codes(codes[:-1], dummy_code=codes[-1])


def _cmd_report(args) -> int:
    try:
        cfg = _load_config(args)
        stage = Stage(args.report_stage) if args.report_stage else cfg.stage
        path = _stage_file(cfg, args.year, stage)
        if not path.exists():
            print(f"no matrix at {path}; run the pipeline first", file=sys.stderr)
            return EXIT_VALIDATION
        flow, codes, _ = read_flow_json(path)
        registry = _registry_from_codes(codes)
        aliases = load_aliases(cfg.aliases_path) if cfg.aliases_path else None
        categories = GoodsCategoryTable.default()
        trade = load_trade(cfg.trade_path, registry, categories, False, aliases)
        tensor = trade.values.get(args.year)
        if tensor is None:
            print(f"no trade data for {args.year}", file=sys.stderr)
            return EXIT_VALIDATION
        payload = country_report(flow, tensor, registry, categories, args.country)
    except (PhosflowError, ValueError, OSError) as exc:
        print(f"report failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {args.output}")
    else:
        print(text)
    return EXIT_OK


def _cmd_diagram(args) -> int:
    try:
        cfg = _load_config(args)
        stage = Stage(args.report_stage) if args.report_stage else cfg.stage
        path = _stage_file(cfg, args.year, stage)
        if not path.exists():
            print(f"no matrix at {path}; run the pipeline first", file=sys.stderr)
            return EXIT_VALIDATION
        flow, codes, _ = read_flow_json(path)
        registry = _registry_from_codes(codes)
        if args.groups:
            with open(args.groups, encoding="utf-8") as fh:
                groups = json.load(fh)
        else:
            groups = paper_style_grouping(flow, registry, args.top, not args.no_eu)
        edges = emit_flow_diagram_data(flow, registry, groups)
    except (PhosflowError, ValueError, OSError) as exc:
        print(f"diagram failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.output:
        write_rows_csv(args.output, ["origin", "destination", "share"], edges)
        print(f"wrote {args.output}")
    else:
        print("origin,destination,share")
        for origin, destination, share in edges:
            print(f"{origin},{destination},{share!r}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    try:
        cfg = SynthWorldConfig(
            n_countries=args.countries,
            n_categories=args.categories,
            miner_count=args.miners,
            hub_count=args.hubs,
            trade_noise_sd=args.trade_noise,
            use_noise_sd=args.use_noise,
            hub_routing_frac=args.hub_routing,
            miner_reexport_frac=args.miner_reexport,
            year=args.year,
            seed=args.seed,
        )
        world = generate_world(cfg)
        paths = write_world(world, args.out)
        meta = {
            "seed": cfg.seed,
            "year": cfg.year,
            "traded_share": world.traded_share,
            "true_weights": {
                c.hs6: float(w)
                for c, w in zip(world.categories.categories, world.true_weights)
            },
            "miners": [world.registry.codes[i] for i in world.miner_slots],
            "hubs": [world.registry.codes[i] for i in world.hub_slots],
        }
        meta_path = Path(args.out) / "world.json"
        meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        truth = Path(args.out) / "truth_edges.csv"
        write_rows_csv(
            truth,
            ["origin", "destination", "share"],
            (
                (world.registry.codes[i], world.registry.codes[j], float(world.flow.values[i, j]))
                for i, j in zip(*np.nonzero(world.flow.values))
            ),
        )
    except PhosflowError as exc:
        print(f"synth failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    for name, path in paths.items():
        print(f"wrote {path}")
    print(f"wrote {meta_path}")
    print(f"wrote {truth}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phosflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the full pipeline")
    _add_config_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", help="ingest-only input check")
    _add_config_flags(p_val)
    p_val.set_defaults(func=_cmd_validate)

    p_rep = sub.add_parser("report", help="country trade/flow breakdown")
    _add_config_flags(p_rep)
    p_rep.add_argument("--year", type=int, required=True)
    p_rep.add_argument("--country", required=True)
    p_rep.add_argument("--report-stage", choices=[s.value for s in Stage])
    p_rep.add_argument("--output")
    p_rep.set_defaults(func=_cmd_report)

    p_dia = sub.add_parser("diagram", help="grouped flow edge list")
    _add_config_flags(p_dia)
    p_dia.add_argument("--year", type=int, required=True)
    p_dia.add_argument("--report-stage", choices=[s.value for s in Stage])
    p_dia.add_argument("--top", type=int, default=6)
    p_dia.add_argument("--no-eu", action="store_true")
    p_dia.add_argument("--groups", help="JSON file mapping group name to country codes")
    p_dia.add_argument("--output")
    p_dia.set_defaults(func=_cmd_diagram)

    p_syn = sub.add_parser("synth", help="generate a synthetic world")
    p_syn.add_argument("--out", required=True)
    p_syn.add_argument("--countries", type=int, default=30)
    p_syn.add_argument("--categories", type=int, default=5)
    p_syn.add_argument("--miners", type=int, default=6)
    p_syn.add_argument("--hubs", type=int, default=0)
    p_syn.add_argument("--trade-noise", type=float, default=0.0)
    p_syn.add_argument("--use-noise", type=float, default=0.0)
    p_syn.add_argument("--hub-routing", type=float, default=0.5)
    p_syn.add_argument("--miner-reexport", type=float, default=0.0)
    p_syn.add_argument("--year", type=int, default=2020)
    p_syn.add_argument("--seed", type=int, default=0)
    p_syn.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
