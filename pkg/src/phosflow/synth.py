"""Synthetic worlds with known ground-truth flows.

A generated world consists of a ground-truth flow matrix (rows sum to the
mining shares, columns to the use shares), a trade tensor constructed so the
true category weights reproduce the off-diagonal flows exactly, and the two
observation vectors.  Distortions can be layered on top: hub countries that
re-export without mining, miners that re-export part of what they import,
multiplicative noise on trade values and on the use vector.

With no hubs and no noise the estimation pipeline recovers the ground truth
exactly, provided its trade correction factor equals the world's realized
traded share (stored on the world object).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InfeasibleConfigError
from .flows import FlowMatrix
from .registry import CountryRegistry, GoodsCategoryTable


@dataclass
class SynthWorldConfig:
    n_countries: int = 30          # real countries; a dummy slot is appended
    n_categories: int = 5
    miner_count: int = 6
    hub_count: int = 0
    true_weights: np.ndarray | None = None
    trade_noise_sd: float = 0.0    # sd of lognormal noise on USD values
    use_noise_sd: float = 0.0      # sd of lognormal noise on the use vector
    traded_share: float = 0.6      # target share of P crossing a border
    hub_routing_frac: float = 0.5  # share of each flow routed via a hub
    miner_reexport_frac: float = 0.0  # share of each flow routed via a miner
    dest_density: float = 0.6      # probability a candidate destination is used
    miner_dest_frac: float = 1.0   # scales how often miners import for own use
    year: int = 2020
    seed: int = 0
    usd_scale: float = 5e9
    tonnage_scale: float = 5e7     # converts shares to tonnes when serialized

    def validate(self) -> None:
        if self.n_countries < 2:
            raise InfeasibleConfigError("need at least two countries")
        if not 1 <= self.miner_count:
            raise InfeasibleConfigError("need at least one miner")
        if self.miner_count + self.hub_count > self.n_countries:
            raise InfeasibleConfigError("miners plus hubs exceed country count")
        if not 1 <= self.n_categories <= 25:
            raise InfeasibleConfigError("n_categories must be in [1, 25]")
        for name in (
            "traded_share",
            "hub_routing_frac",
            "miner_reexport_frac",
            "dest_density",
            "miner_dest_frac",
        ):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InfeasibleConfigError(f"{name} must be in [0, 1], got {v}")
        if self.trade_noise_sd < 0 or self.use_noise_sd < 0:
            raise InfeasibleConfigError("noise levels must be non-negative")


@dataclass
class SynthWorld:
    config: SynthWorldConfig
    registry: CountryRegistry
    categories: GoodsCategoryTable
    flow: FlowMatrix                  # ground truth
    tensor: np.ndarray                # (C, N, N) USD values
    mining: np.ndarray                # shares, length N
    use: np.ndarray                   # observed (possibly noisy) shares
    use_clean: np.ndarray             # column sums of the ground truth
    true_weights: np.ndarray          # length C, sums to 1
    traded_share: float               # realized off-diagonal total of the truth
    miner_slots: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    hub_slots: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))


def _nonzero_cells(matrix: np.ndarray) -> list[tuple[int, int]]:
    rows, cols = np.nonzero(matrix)
    return list(zip(rows.tolist(), cols.tolist()))  # row-major, deterministic


def generate_world(cfg: SynthWorldConfig) -> SynthWorld:
    """Build a seeded world; identical seeds give bitwise identical worlds."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n_real = cfg.n_countries
    n = n_real + 1
    dummy = n_real

    registry = CountryRegistry.from_codes([f"C{i:03d}" for i in range(n_real)])
    categories = GoodsCategoryTable.default().subset(cfg.n_categories)
    n_cat = cfg.n_categories

    miners = np.arange(cfg.miner_count)
    hubs = np.arange(cfg.miner_count, cfg.miner_count + cfg.hub_count)

    mining = np.zeros(n)
    mining[miners] = np.sort(rng.dirichlet(np.full(cfg.miner_count, 1.5)))[::-1]

    # exports per miner, steered toward the target traded share
    propensity = rng.uniform(0.3, 0.9, cfg.miner_count)
    exports = propensity * mining[miners]
    for _ in range(8):
        total = exports.sum()
        if total <= 0:
            break
        exports = np.minimum(exports * (cfg.traded_share / total), 0.98 * mining[miners])

    truth = np.zeros((n, n))
    for rank, i in enumerate(miners):
        truth[i, i] = mining[i] - exports[rank]
        if exports[rank] <= 0:
            continue
        # ship only toward strictly smaller miners or non-miners: keeps the
        # bilateral pattern one-sided, so per-category netting is lossless
        candidates = np.array(
            [j for j in range(n_real) if j != i and mining[j] < mining[i]]
        )
        density = np.where(
            mining[candidates] > 0,
            cfg.dest_density * cfg.miner_dest_frac,
            cfg.dest_density,
        )
        chosen = candidates[rng.random(candidates.size) < density]
        if chosen.size == 0:
            non_miner = candidates[mining[candidates] == 0]
            pool = non_miner if non_miner.size else candidates
            chosen = pool[[rng.integers(pool.size)]]
        shares = rng.dirichlet(np.ones(chosen.size))
        truth[i, chosen] += exports[rank] * shares

    use_clean = truth.sum(axis=0)
    if cfg.use_noise_sd > 0:
        noisy = use_clean * rng.lognormal(0.0, cfg.use_noise_sd, n)
        noisy[dummy] = 0.0
        use = noisy / noisy.sum()
    else:
        use = use_clean.copy()

    traded = float(truth.sum() - np.trace(truth))

    # trade-visible flows: route parts of each true flow through intermediaries
    visible = truth.copy()
    np.fill_diagonal(visible, 0.0)
    base_cells = _nonzero_cells(visible)

    if cfg.hub_count > 0 and cfg.hub_routing_frac > 0:
        for i, j in base_cells:
            options = hubs[hubs != j]
            if options.size == 0:
                continue
            h = int(options[rng.integers(options.size)])
            amount = cfg.hub_routing_frac * truth[i, j]
            visible[i, j] -= amount
            visible[i, h] += amount
            visible[h, j] += amount

    if cfg.miner_reexport_frac > 0:
        # the largest miner is kept out of the entrepot role: its own flows
        # dominate the matrix and would swamp the through-flow signal
        for i, j in base_cells:
            options = [
                int(k)
                for k in miners[1:]
                if k not in (i, j)
                and visible[k, i] == 0.0
                and visible[j, k] == 0.0
            ]
            if not options:
                continue
            k = options[rng.integers(len(options))]
            amount = cfg.miner_reexport_frac * truth[i, j]
            visible[i, j] -= amount
            visible[i, k] += amount
            visible[k, j] += amount

    if cfg.true_weights is not None:
        w_star = np.asarray(cfg.true_weights, dtype=float)
        if w_star.shape != (n_cat,) or w_star.min() <= 0:
            raise InfeasibleConfigError("true_weights must be positive with length n_categories")
        w_star = w_star / w_star.sum()
    else:
        w_star = np.maximum(rng.dirichlet(np.full(n_cat, 3.0)), 0.01)
        w_star = w_star / w_star.sum()

    tensor = np.zeros((n_cat, n, n))
    for i, j in _nonzero_cells(visible):
        mix = rng.dirichlet(np.full(n_cat, 0.8))
        tensor[:, i, j] = mix * visible[i, j] / w_star * cfg.usd_scale
    if cfg.trade_noise_sd > 0:
        tensor *= rng.lognormal(0.0, cfg.trade_noise_sd, tensor.shape)

    return SynthWorld(
        config=cfg,
        registry=registry,
        categories=categories,
        flow=FlowMatrix(truth, None, cfg.year),
        tensor=tensor,
        mining=mining,
        use=use,
        use_clean=use_clean,
        true_weights=w_star,
        traded_share=traded,
        miner_slots=miners,
        hub_slots=hubs,
    )


def write_world(world: SynthWorld, out_dir) -> dict[str, Path]:
    """Serialize a world to the loader CSV schemas; returns the file paths.

    Every real country gets a use row (zeros included), so nothing is flagged
    as missing on re-ingest; the dummy never appears in any file.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = world.config
    year = cfg.year
    codes = world.registry.codes
    dummy = world.registry.dummy_slot

    paths = {
        "countries": out / "countries.csv",
        "mining": out / "mining.csv",
        "use": out / "use.csv",
        "trade": out / "trade.csv",
    }

    with open(paths["countries"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["code", "name"])
        for entry in world.registry.entries:
            if not entry.is_dummy:
                writer.writerow([entry.code, entry.name])

    with open(paths["mining"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["country", "year", "tonnage_p2o5"])
        for slot, share in enumerate(world.mining):
            if slot != dummy and share > 0:
                writer.writerow([codes[slot], year, repr(float(share * cfg.tonnage_scale))])

    with open(paths["use"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["country", "year", "tonnage_p2o5", "source_flag"])
        for slot, share in enumerate(world.use):
            if slot != dummy:
                writer.writerow(
                    [codes[slot], year, repr(float(share * cfg.tonnage_scale)), "synthetic"]
                )

    with open(paths["trade"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["year", "exporter", "importer", "hs6", "usd"])
        hs6 = world.categories.codes
        for c in range(world.tensor.shape[0]):
            for i, j in _nonzero_cells(world.tensor[c]):
                writer.writerow([year, codes[i], codes[j], hs6[c], repr(float(world.tensor[c, i, j]))])

    return paths
