import json
import warnings

import numpy as np
import pytest

import phosflow as pf
from phosflow.errors import NegativeTotalError, OverlappingGroupsError, UnknownCountryError
from phosflow.serialize import read_flow_json


@pytest.fixture(scope="module")
def small_world():
    cfg = pf.SynthWorldConfig(
        n_countries=18, n_categories=4, miner_count=5, hub_count=2,
        hub_routing_frac=0.4, use_noise_sd=0.2, seed=11, year=2012,
    )
    return pf.generate_world(cfg)


@pytest.fixture(scope="module")
def small_run(tmp_path_factory, small_world):
    tmp = tmp_path_factory.mktemp("run")
    paths = pf.write_world(small_world, tmp / "world")
    cfg = pf.RunConfig(
        mining_path=str(paths["mining"]),
        use_path=str(paths["use"]),
        trade_path=str(paths["trade"]),
        countries_path=str(paths["countries"]),
        stage=pf.Stage.M5,
        gamma_tr=small_world.traded_share,
        active_category_count=4,
        optimizer_restarts=3,
        optimizer_max_evals=400,
        out_dir=str(tmp / "out"),
        seed=4,
        global_tonnage={2012: 75.4e6},
        audit=True,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        summary = pf.run_pipeline(cfg)
    return cfg, summary, small_world


class TestComputeStages:
    def test_target_m1_skips_optimizer(self, small_world):
        rc = pf.RunConfig(stage=pf.Stage.M1, gamma_tr=small_world.traded_share)
        res = pf.compute_stages(
            small_world.tensor, small_world.mining, small_world.use, None, rc, 2012
        )
        assert set(res.stages) == {pf.Stage.M1}
        vector = res.weights[pf.Stage.M1]
        np.testing.assert_allclose(vector.weights, 0.25)

    def test_stage_chain_complete_to_target(self, small_world):
        rc = pf.RunConfig(stage=pf.Stage.M3, gamma_tr=small_world.traded_share,
                          active_category_count=4, optimizer_restarts=2,
                          optimizer_max_evals=150)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = pf.compute_stages(
                small_world.tensor, small_world.mining, small_world.use, None, rc, 2012
            )
        assert set(res.stages) == {pf.Stage.M1, pf.Stage.M2, pf.Stage.M3}

    def test_m6_variant_ignores_use_term_in_estimation(self, small_world):
        rc = pf.RunConfig(stage=pf.Stage.M6, gamma_tr=small_world.traded_share,
                          active_category_count=4, optimizer_restarts=2,
                          optimizer_max_evals=200)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = pf.compute_stages(
                small_world.tensor, small_world.mining, small_world.use, None, rc, 2012
            )
        assert pf.Stage.M6 in res.stages
        # the M6 report stays comparable: configured alphas, not the
        # mining-only ones used during estimation
        assert res.reports[pf.Stage.M6].alpha_m == pytest.approx(2 / 3)
        res.stages[pf.Stage.M6].validate()


class TestScaleToTonnage:
    def test_zero_total(self):
        flow = pf.FlowMatrix(np.array([[0.4, 0.6], [0.0, 0.0]]), pf.Stage.M5, 2021)
        np.testing.assert_array_equal(pf.scale_to_tonnage(flow, 0.0), np.zeros((2, 2)))

    def test_share_times_total(self):
        flow = pf.FlowMatrix(np.array([[0.1, 0.9], [0.0, 0.0]]), pf.Stage.M5, 2021)
        scaled = pf.scale_to_tonnage(flow, 75.4e6)
        assert scaled[0, 0] == pytest.approx(7.54e6)

    def test_row_sums_scale_linearly(self):
        values = np.array([[0.25, 0.25], [0.1, 0.4]])
        flow = pf.FlowMatrix(values, pf.Stage.M5, 2021)
        scaled = pf.scale_to_tonnage(flow, 1000.0)
        np.testing.assert_allclose(scaled.sum(axis=1), values.sum(axis=1) * 1000.0)

    def test_negative_total(self):
        flow = pf.FlowMatrix(np.eye(2) / 2, pf.Stage.M5, 2021)
        with pytest.raises(NegativeTotalError):
            pf.scale_to_tonnage(flow, -1.0)


class TestCountryReport:
    def test_country_without_trade(self, small_world):
        registry = small_world.registry
        categories = small_world.categories
        flow = pf.FlowMatrix(
            np.diag(np.ones(registry.n) / registry.n), pf.Stage.M1, 2012
        )
        quiet = registry.codes[registry.dummy_slot - 1]
        tensor = np.zeros((categories.n, registry.n, registry.n))
        report = pf.country_report(flow, tensor, registry, categories, quiet)
        assert report["material_outflows"] == []
        assert sum(report["usd_exports"].values()) == 0.0

    def test_unknown_country(self, small_world):
        flow = pf.FlowMatrix(
            np.eye(small_world.registry.n) / small_world.registry.n, pf.Stage.M1, 2012
        )
        with pytest.raises(UnknownCountryError):
            pf.country_report(
                flow, small_world.tensor, small_world.registry,
                small_world.categories, "ZZZ",
            )

    def test_hub_has_usd_exports_but_no_material_outflow_after_m3(self, small_world):
        rc = pf.RunConfig(stage=pf.Stage.M3, gamma_tr=small_world.traded_share,
                          active_category_count=4, optimizer_restarts=2,
                          optimizer_max_evals=150)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = pf.compute_stages(
                small_world.tensor, small_world.mining, small_world.use, None, rc, 2012
            )
        hub_code = small_world.registry.codes[small_world.hub_slots[0]]
        report = pf.country_report(
            res.stages[pf.Stage.M3], small_world.tensor,
            small_world.registry, small_world.categories, hub_code,
        )
        assert sum(report["usd_exports"].values()) > 0.0
        assert report["material_outflows"] == []

    def test_partner_ordering(self, small_world):
        registry = small_world.registry
        n = registry.n
        values = np.zeros((n, n))
        values[0, 1] = 0.3
        values[0, 2] = 0.3
        values[0, 3] = 0.4
        flow = pf.FlowMatrix(values, pf.Stage.M5, 2012)
        tensor = np.zeros((small_world.categories.n, n, n))
        report = pf.country_report(
            flow, tensor, registry, small_world.categories, registry.codes[0]
        )
        partners = [p["country"] for p in report["material_outflows"]]
        # descending by share, ties broken by code
        assert partners == [registry.codes[3], registry.codes[1], registry.codes[2]]


class TestFlowDiagramData:
    def test_trivial_grouping_equals_matrix(self, small_world):
        registry = small_world.registry
        rng = np.random.default_rng(5)
        values = rng.random((registry.n, registry.n))
        values[registry.dummy_slot, :] = 0.0
        values /= values.sum()
        flow = pf.FlowMatrix(values, pf.Stage.M5, 2012)
        groups = {code: [code] for code in registry.codes}
        edges = pf.emit_flow_diagram_data(flow, registry, groups)
        assert len(edges) == registry.n ** 2
        lookup = {(a, b): v for a, b, v in edges}
        for i, ci in enumerate(registry.codes):
            for j, cj in enumerate(registry.codes):
                assert lookup[(ci, cj)] == pytest.approx(values[i, j], abs=1e-15)

    def test_single_group_is_unit_self_edge(self, small_world):
        registry = small_world.registry
        flow = pf.FlowMatrix(
            np.full((registry.n, registry.n), 1.0 / registry.n**2), pf.Stage.M5, 2012
        )
        edges = pf.emit_flow_diagram_data(flow, registry, {"ALL": registry.codes})
        assert edges == [("ALL", "ALL", pytest.approx(1.0))]

    def test_group_totals_equal_member_sums(self, small_world):
        registry = small_world.registry
        flow = small_world.flow
        block = registry.codes[:4]
        edges = pf.emit_flow_diagram_data(flow, registry, {"BLOCK": block})
        col_total = sum(v for a, b, v in edges if b == "BLOCK")
        slots = [registry.slot_of(c) for c in block]
        assert col_total == pytest.approx(flow.values[:, slots].sum(), abs=1e-12)

    def test_overlapping_groups_rejected(self, small_world):
        registry = small_world.registry
        flow = small_world.flow
        with pytest.raises(OverlappingGroupsError):
            pf.emit_flow_diagram_data(
                flow, registry,
                {"A": registry.codes[:2], "B": registry.codes[1:3]},
            )

    def test_paper_style_grouping_shape(self, small_world):
        groups = pf.paper_style_grouping(small_world.flow, small_world.registry, top_n=3)
        assert len(groups) == 3  # synthetic codes contain no EU members
        for name, members in groups.items():
            assert members == [name]


class TestRunPipeline:
    def test_outputs_written(self, small_run):
        cfg, summary, world = small_run
        out = cfg.resolved_out_dir()
        assert (out / "summary.csv").exists()
        assert (out / "summary.json").exists()
        assert (out / "manifest.json").exists()
        for stage in ("M1", "M2", "M3", "M4", "M5"):
            assert (out / "2012" / f"{stage}.csv").exists()
            assert (out / "2012" / f"{stage}.json").exists()
            assert (out / "2012" / f"{stage}_edges.csv").exists()
        assert (out / "2012" / "M5_tonnage.csv").exists()
        assert (out / "2012" / "audit.csv").exists()
        assert (out / "weights" / "2012_M1.json").exists()
        assert (out / "weights" / "2012_M2.json").exists()

    def test_matrices_valid_at_write_time(self, small_run):
        cfg, summary, world = small_run
        out = cfg.resolved_out_dir()
        for stage in ("M1", "M2", "M3", "M4", "M5"):
            flow, codes, checksum = read_flow_json(out / "2012" / f"{stage}.json")
            flow.validate(dummy_slot=len(codes) - 1)
            assert checksum == summary.input_checksum

    def test_summary_stats_match_recomputation(self, small_run):
        _, summary, _ = small_run
        for stage, metrics in summary.stage_stats.items():
            values = [r.d for r in summary.reports if r.stage.value == stage]
            mean, sd = metrics["d"]
            assert mean == pytest.approx(np.mean(values), abs=1e-12)
            assert sd == pytest.approx(np.std(values), abs=1e-12)

    def test_weights_payload_shares_sum_to_one(self, small_run):
        cfg, summary, _ = small_run
        payload = json.loads(
            (cfg.resolved_out_dir() / "weights" / "2012_M2.json").read_text()
        )
        assert sum(payload["weights"].values()) == pytest.approx(1.0, abs=1e-9)
        assert sum(payload["usd_net_share"].values()) == pytest.approx(1.0, abs=1e-9)
        assert sum(payload["weighted_share"].values()) == pytest.approx(1.0, abs=1e-9)

    def test_missing_year_recorded_as_failure(self, small_run, tmp_path):
        cfg, _, world = small_run
        bad = pf.RunConfig(**{**cfg.to_dict(), "years": [2012, 2013],
                              "out_dir": str(tmp_path / "out2")})
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            summary = pf.run_pipeline(bad)
        assert summary.years == [2012]
        assert summary.failures and summary.failures[0][0] == 2013
        manifest = json.loads((tmp_path / "out2" / "manifest.json").read_text())
        assert manifest["failures"][0]["year"] == 2013

    def test_config_roundtrip_through_yaml(self, small_run, tmp_path):
        import yaml

        cfg, _, _ = small_run
        path = tmp_path / "cfg.yaml"
        path.write_text(yaml.safe_dump(cfg.to_dict()), encoding="utf-8")
        loaded = pf.RunConfig.from_file(path)
        assert loaded.to_dict() == cfg.to_dict()

    def test_unknown_config_key_rejected(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("no_such_option: 1\n", encoding="utf-8")
        with pytest.raises(ValueError):
            pf.RunConfig.from_file(path)


def test_multi_year_dynamics_outputs(tmp_path):
    # two close years: reuse one world and a slightly perturbed sibling
    base = pf.SynthWorldConfig(n_countries=14, n_categories=3, miner_count=4,
                               seed=9, year=2001)
    w1 = pf.generate_world(base)
    w2 = pf.generate_world(
        pf.SynthWorldConfig(n_countries=14, n_categories=3, miner_count=4,
                            seed=9, year=2002, trade_noise_sd=0.1)
    )
    world_dir = tmp_path / "world"
    paths1 = pf.write_world(w1, world_dir)
    import csv

    # append the second year's rows to the same files
    for name, world in (("mining", w2), ("use", w2), ("trade", w2)):
        rows = []
        second = pf.write_world(world, tmp_path / "w2")
        with open(second[name], newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))[1:]
        with open(paths1[name], "a", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerows(rows)

    cfg = pf.RunConfig(
        mining_path=str(paths1["mining"]), use_path=str(paths1["use"]),
        trade_path=str(paths1["trade"]), countries_path=str(paths1["countries"]),
        stage=pf.Stage.M4, gamma_tr=0.6, active_category_count=3,
        optimizer_restarts=2, optimizer_max_evals=150,
        out_dir=str(tmp_path / "out"), seed=0,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        summary = pf.run_pipeline(cfg)
    assert summary.years == [2001, 2002]
    assert (tmp_path / "out" / "dynamics" / "similarity.csv").exists()
    assert (tmp_path / "out" / "dynamics" / "decay.csv").exists()
    series = summary.dynamics["series"]
    assert len(series) == 1 and series[0][0] == 2002
    assert 0.0 <= series[0][1] <= 1.0
