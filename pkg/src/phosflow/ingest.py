"""Loaders that harmonize the three input datasets into the registry space.

All inputs are long-form UTF-8 CSV with a header row and '.' as the decimal
separator:

    mining.csv   country,year,tonnage_p2o5
    use.csv      country,year,tonnage_p2o5,source_flag
    trade.csv    year,exporter,importer,hs6,usd
    aliases.csv  raw_name,code          (optional name harmonization)

In lenient mode (the default) bad rows are skipped and reported in the
returned warning list; in strict mode the first problem raises.  Trade rows
whose importer is unknown are routed to the dummy slot in either mode, since
the dummy exists exactly for undeclared destinations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    MalformedRowError,
    MissingFileError,
    SelfLoopRowError,
    UnknownCategoryError,
    UnknownCountryError,
)
from .registry import CountryRegistry, GoodsCategoryTable


@dataclass
class LoadedVectors:
    """Per-year tonnage vectors plus missing-data masks (use data only)."""

    values: dict[int, np.ndarray] = field(default_factory=dict)
    missing: dict[int, np.ndarray] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def years(self) -> list[int]:
        return sorted(self.values)


@dataclass
class LoadedTrade:
    """Per-year (C, N, N) USD tensors."""

    values: dict[int, np.ndarray] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def years(self) -> list[int]:
        return sorted(self.values)


def load_aliases(path) -> dict[str, str]:
    """Read raw-name to canonical-code mappings (case-insensitive keys)."""
    rows = _open_rows(path, ("raw_name", "code"))
    aliases = {}
    for _, row in rows:
        raw = (row.get("raw_name") or "").strip()
        code = (row.get("code") or "").strip().upper()
        if raw and code:
            aliases[raw.upper()] = code
    return aliases


def _open_rows(path, required_columns):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise MissingFileError(f"input file not found: {path}") from None
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required_columns if c not in header]
        if missing:
            raise MalformedRowError(f"{path}: header lacks columns {missing}")
        return [(lineno, row) for lineno, row in enumerate(reader, start=2)]


def _parse_year(text, lineno) -> int:
    try:
        return int(str(text).strip())
    except (TypeError, ValueError):
        raise MalformedRowError(f"line {lineno}: bad year {text!r}") from None


def _parse_value(text, lineno, column) -> float:
    try:
        value = float(str(text).strip())
    except (TypeError, ValueError):
        raise MalformedRowError(f"line {lineno}: bad {column} {text!r}") from None
    if not math.isfinite(value) or value < 0:
        raise MalformedRowError(f"line {lineno}: {column} must be finite and >= 0, got {text!r}")
    return value


def _resolve(code: str, registry: CountryRegistry, aliases: dict[str, str] | None) -> int | None:
    key = code.strip().upper()
    if aliases and key in aliases:
        key = aliases[key]
    if key in registry:
        return registry.slot_of(key)
    return None


class _Collector:
    """Routes problems to a warning list or raises, depending on mode."""

    def __init__(self, strict: bool):
        self.strict = strict
        self.warnings: list[str] = []

    def problem(self, exc_type, message: str) -> None:
        if self.strict:
            raise exc_type(message)
        self.warnings.append(message)


def _load_tonnage_file(path, registry, strict, aliases, dummy_allowed=False):
    rows = _open_rows(path, ("country", "year", "tonnage_p2o5"))
    collector = _Collector(strict)
    values: dict[int, np.ndarray] = {}
    present: dict[int, set[int]] = {}
    seen: set[tuple[str, int]] = set()

    for lineno, row in rows:
        try:
            year = _parse_year(row["year"], lineno)
            tonnage = _parse_value(row["tonnage_p2o5"], lineno, "tonnage")
        except MalformedRowError as exc:
            collector.problem(MalformedRowError, str(exc))
            continue
        raw_code = (row["country"] or "").strip()
        slot = _resolve(raw_code, registry, aliases)
        if slot is None:
            collector.problem(UnknownCountryError, f"line {lineno}: unknown country {raw_code!r}")
            continue
        if slot == registry.dummy_slot and not dummy_allowed:
            collector.problem(
                MalformedRowError, f"line {lineno}: dummy slot cannot carry tonnage"
            )
            continue
        key = (raw_code.upper(), year)
        if key in seen:
            collector.problem(
                MalformedRowError,
                f"line {lineno}: duplicate row for {raw_code!r} in {year}; values summed",
            )
        seen.add(key)
        vec = values.setdefault(year, np.zeros(registry.n))
        vec[slot] += tonnage
        present.setdefault(year, set()).add(slot)
    return values, present, collector.warnings


def load_mining(
    path,
    registry: CountryRegistry,
    strict: bool = False,
    aliases: dict[str, str] | None = None,
) -> LoadedVectors:
    """Load per-year mining tonnage vectors; absent countries are zero."""
    values, _, warn = _load_tonnage_file(path, registry, strict, aliases)
    return LoadedVectors(values=values, warnings=warn)


def load_use(
    path,
    registry: CountryRegistry,
    strict: bool = False,
    aliases: dict[str, str] | None = None,
) -> LoadedVectors:
    """Load per-year fertilizer-use vectors and flag countries without data.

    Countries absent from a year's rows (and always the dummy) are marked in
    the missing mask for later imputation from net-import shares.  A file
    carrying a ``source_flag`` column keeps it purely informational.
    """
    values, present, warn = _load_tonnage_file(path, registry, strict, aliases)
    missing = {}
    for year, slots in present.items():
        mask = np.ones(registry.n, dtype=bool)
        mask[sorted(slots)] = False
        mask[registry.dummy_slot] = True
        missing[year] = mask
    return LoadedVectors(values=values, missing=missing, warnings=warn)


def empty_use(registry: CountryRegistry, years) -> LoadedVectors:
    """Degenerate use dataset: zero vectors, everything flagged missing."""
    values = {y: np.zeros(registry.n) for y in years}
    missing = {y: np.ones(registry.n, dtype=bool) for y in years}
    return LoadedVectors(values=values, missing=missing)


def load_trade(
    path,
    registry: CountryRegistry,
    categories: GoodsCategoryTable,
    strict: bool = False,
    aliases: dict[str, str] | None = None,
) -> LoadedTrade:
    """Load per-year bilateral trade tensors (C categories deep).

    Self-loops and unknown HS6 codes are rejected; unknown importers are
    accumulated into the dummy column; unknown exporters are rejected (the
    dummy never exports).
    """
    rows = _open_rows(path, ("year", "exporter", "importer", "hs6", "usd"))
    collector = _Collector(strict)
    values: dict[int, np.ndarray] = {}
    seen: set[tuple] = set()
    routed_to_dummy = 0

    for lineno, row in rows:
        try:
            year = _parse_year(row["year"], lineno)
            usd = _parse_value(row["usd"], lineno, "usd")
        except MalformedRowError as exc:
            collector.problem(MalformedRowError, str(exc))
            continue
        raw_exp = (row["exporter"] or "").strip()
        raw_imp = (row["importer"] or "").strip()
        hs6 = (row["hs6"] or "").strip()
        if hs6 not in categories:
            collector.problem(UnknownCategoryError, f"line {lineno}: unknown HS6 code {hs6!r}")
            continue
        if raw_exp.upper() == raw_imp.upper():
            collector.problem(
                SelfLoopRowError, f"line {lineno}: exporter equals importer ({raw_exp!r})"
            )
            continue
        exp_slot = _resolve(raw_exp, registry, aliases)
        if exp_slot is None or exp_slot == registry.dummy_slot:
            collector.problem(UnknownCountryError, f"line {lineno}: unknown exporter {raw_exp!r}")
            continue
        imp_slot = _resolve(raw_imp, registry, aliases)
        if imp_slot is None:
            imp_slot = registry.dummy_slot
            routed_to_dummy += 1
        if exp_slot == imp_slot:
            collector.problem(
                SelfLoopRowError, f"line {lineno}: exporter equals importer ({raw_exp!r})"
            )
            continue
        key = (year, exp_slot, imp_slot, hs6)
        if key in seen:
            collector.problem(
                MalformedRowError,
                f"line {lineno}: duplicate trade row {key}; values summed",
            )
        seen.add(key)
        tensor = values.setdefault(year, np.zeros((categories.n, registry.n, registry.n)))
        tensor[categories.index_of(hs6), exp_slot, imp_slot] += usd

    warnings = collector.warnings
    if routed_to_dummy:
        warnings = warnings + [
            f"{routed_to_dummy} rows with unknown importer routed to the dummy slot"
        ]
    return LoadedTrade(values=values, warnings=warnings)


def infer_registry(mining_path, use_path, trade_path, aliases: dict[str, str] | None = None) -> CountryRegistry:
    """Build a registry from the union of codes appearing in the input files.

    Importer codes that only ever appear on the importing side still become
    real slots; truly unknown names can be mapped via the alias table before
    falling back to a verbatim slot.  Codes are sorted for determinism.
    """
    codes: set[str] = set()

    def canon(raw: str) -> str:
        key = raw.strip().upper()
        if aliases and key in aliases:
            key = aliases[key]
        return key

    for path, column_sets in (
        (mining_path, [("country",)]),
        (use_path, [("country",)]),
        (trade_path, [("exporter", "importer")]),
    ):
        if path is None or not Path(path).exists():
            continue
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                for columns in column_sets:
                    for column in columns:
                        raw = (row.get(column) or "").strip()
                        if raw:
                            codes.add(canon(raw))
    if not codes:
        raise MalformedRowError("no country codes found in any input file")
    return CountryRegistry.from_codes(sorted(codes))
