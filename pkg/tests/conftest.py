import numpy as np
import pytest

import phosflow as pf


@pytest.fixture(scope="session")
def noiseless_world():
    """No hubs, no noise: the pipeline can recover this world exactly."""
    cfg = pf.SynthWorldConfig(
        n_countries=30, n_categories=5, miner_count=6, hub_count=0, seed=1
    )
    return pf.generate_world(cfg)


@pytest.fixture(scope="session")
def hub_world():
    """Hubs plus use noise: the distortions the correction stages target."""
    cfg = pf.SynthWorldConfig(
        n_countries=40,
        n_categories=6,
        miner_count=8,
        hub_count=4,
        hub_routing_frac=0.5,
        use_noise_sd=0.3,
        trade_noise_sd=0.05,
        miner_dest_frac=0.0,
        seed=2,
    )
    return pf.generate_world(cfg)


@pytest.fixture
def registry3():
    return pf.CountryRegistry.from_codes(["AAA", "BBB", "CCC"])


def random_flow_matrix(rng, n, density=0.4, year=2000, stage=pf.Stage.M4):
    """Random valid flow matrix: non-negative, unit total, zero dummy row."""
    values = rng.random((n, n)) * (rng.random((n, n)) < density)
    values[-1, :] = 0.0
    if values.sum() == 0:
        values[0, 1] = 1.0
    values /= values.sum()
    return pf.FlowMatrix(values, stage, year)
