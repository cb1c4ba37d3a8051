import numpy as np
import pytest

import phosflow as pf
from phosflow.corrections import CorrectionAudit, CorrectionParams
from phosflow.errors import (
    DroppedFlowWarning,
    NoMinerImportsWarning,
    ZeroOffDiagonalError,
)


def flow_of(values, stage=pf.Stage.M2, year=2000):
    return pf.FlowMatrix(np.asarray(values, dtype=float), stage, year)


class TestRenormalize:
    def test_fixed_point(self):
        values = np.array([[0.3, 0.3], [0.4, 0.0]])
        prev = flow_of(values)
        out = pf.renormalize(values.copy(), prev)
        np.testing.assert_allclose(out.values, values)

    def test_scale_invariance_of_offdiagonal(self):
        values = np.array([[0.3, 0.3], [0.4, 0.0]])
        prev = flow_of(values)
        doubled = values.copy()
        doubled[0, 1] *= 2
        doubled[1, 0] *= 2
        once = pf.renormalize(values.copy(), prev)
        twice = pf.renormalize(doubled, prev)
        np.testing.assert_allclose(once.values, twice.values)

    def test_target_scaling(self):
        # trace 0.5, star off-diagonal sums to 0.25 -> entries doubled
        prev = flow_of([[0.5, 0.5], [0.0, 0.0]])
        star = np.array([[0.0, 0.15], [0.1, 0.0]])
        out = pf.renormalize(star, prev)
        np.testing.assert_allclose(out.values, [[0.5, 0.3], [0.2, 0.0]])
        assert out.values.sum() == pytest.approx(1.0, abs=1e-12)

    def test_zero_offdiagonal_raises(self):
        prev = flow_of([[0.5, 0.5], [0.0, 0.0]])
        with pytest.raises(ZeroOffDiagonalError):
            pf.renormalize(np.diag([0.5, 0.0]), prev)

    def test_pure_autarky_allowed(self):
        prev = flow_of(np.diag([0.4, 0.6]))
        out = pf.renormalize(np.diag([0.4, 0.6]), prev)
        np.testing.assert_array_equal(out.values, np.diag([0.4, 0.6]))

    def test_full_denominator_mode(self):
        prev = flow_of([[0.5, 0.5], [0.0, 0.0]])
        star = np.array([[0.1, 0.15], [0.1, 0.0]])
        out = pf.renormalize(star, prev, denominator="full")
        # literal reading divides by the full sum including the diagonal
        scale = (1 - 0.5) / star.sum()
        np.testing.assert_allclose(out.values[0, 1], 0.15 * scale)


class TestCorrectOrigination:
    def test_no_op_without_nonmining_exporters(self):
        values = np.array(
            [[0.3, 0.2, 0.2], [0.1, 0.1, 0.0], [0.0, 0.0, 0.1]]
        )
        flow = flow_of(values)
        mining = np.array([0.5, 0.3, 0.2])
        out = pf.correct_origination(flow, mining)
        np.testing.assert_allclose(out.values, values)
        assert out.stage is pf.Stage.M3

    def test_three_country_hub(self):
        # A mines; hub B receives 0.4 from A, sends 0.3 on to C, uses 0.1
        values = np.array(
            [[0.3, 0.4, 0.0], [0.0, 0.0, 0.3], [0.0, 0.0, 0.0]]
        )
        flow = flow_of(values)
        mining = np.array([1.0, 0.0, 0.0])
        audit = CorrectionAudit()
        out = pf.correct_origination(flow, mining, audit=audit)
        # hand evaluation: B's 0.3 moves to A->C, A->B drops to the 0.1 B
        # uses, then the off-diagonal part is rescaled by (1-0.3)/0.4
        scale = 0.7 / 0.4
        expected = np.array(
            [[0.3, 0.1 * scale, 0.3 * scale], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]
        )
        np.testing.assert_allclose(out.values, expected, atol=1e-15)
        assert out.values.sum() == pytest.approx(1.0, abs=1e-12)
        assert audit.rows  # events were recorded

    def test_nonminer_rows_zero_afterwards(self, hub_world):
        rc = pf.RunConfig(stage=pf.Stage.M2, gamma_tr=hub_world.traded_share,
                          active_category_count=6, optimizer_restarts=2,
                          optimizer_max_evals=200, seed=0)
        res = pf.compute_stages(
            hub_world.tensor, hub_world.mining, hub_world.use, None, rc,
            hub_world.config.year,
        )
        out = pf.correct_origination(res.stages[pf.Stage.M2], hub_world.mining)
        off = out.offdiagonal()
        assert off[hub_world.mining == 0.0].sum() <= 1e-12
        assert out.values.sum() == pytest.approx(1.0, abs=1e-9)

    def test_no_miner_imports_falls_back_to_all_sources(self):
        # B exports to D but imports only from non-mining C
        values = np.array(
            [
                [0.4, 0.0, 0.0, 0.1],
                [0.0, 0.0, 0.0, 0.3],
                [0.0, 0.2, 0.0, 0.0],
                [0.0, 0.0, 0.0, 0.0],
            ]
        )
        flow = flow_of(values)
        mining = np.array([1.0, 0.0, 0.0, 0.0])
        with pytest.warns(NoMinerImportsWarning):
            out = pf.correct_origination(flow, mining)
        off = out.offdiagonal()
        assert off[[1, 2, 3]].sum() <= 1e-12
        assert out.values.sum() == pytest.approx(1.0, abs=1e-12)

    def test_exports_without_any_imports_are_dropped(self):
        values = np.array(
            [[0.4, 0.3, 0.0], [0.0, 0.0, 0.3], [0.0, 0.0, 0.0]]
        )
        # B has exports to C but no imports at all once A->B is removed
        values[0, 1] = 0.0
        values[0, 2] = 0.3
        flow = flow_of(values)
        mining = np.array([1.0, 0.0, 0.0])
        with pytest.warns(DroppedFlowWarning):
            out = pf.correct_origination(flow, mining)
        assert out.offdiagonal()[1].sum() == 0.0
        assert out.values.sum() == pytest.approx(1.0, abs=1e-12)


class TestCorrectThroughflow:
    def test_gamma_zero_is_identity(self):
        values = np.array(
            [[0.3, 0.2, 0.0], [0.0, 0.3, 0.2], [0.0, 0.0, 0.0]]
        )
        flow = flow_of(values, stage=pf.Stage.M3)
        out = pf.correct_throughflow(
            flow, np.array([0.5, 0.5, 0.0]), CorrectionParams(gamma_p=0.0)
        )
        np.testing.assert_allclose(out.values, values, atol=1e-15)

    def test_chain_reroutes_fully_at_gamma_one(self):
        # A -> B -> C with B mining and equal in/out: everything reroutes
        values = np.array(
            [[0.3, 0.2, 0.0], [0.0, 0.3, 0.2], [0.0, 0.0, 0.0]]
        )
        flow = flow_of(values, stage=pf.Stage.M3)
        mining = np.array([0.5, 0.5, 0.0])
        out = pf.correct_throughflow(flow, mining, CorrectionParams(gamma_p=1.0))
        # B's legs vanish; renormalization rescales A->C to the 0.4 trade total
        expected = np.array(
            [[0.3, 0.0, 0.4], [0.0, 0.3, 0.0], [0.0, 0.0, 0.0]]
        )
        np.testing.assert_allclose(out.values, expected, atol=1e-12)

    def test_conserves_nonparticipant_margins_up_to_scale(self):
        rng = np.random.default_rng(8)
        n = 8
        values = rng.random((n, n)) * 0.1
        np.fill_diagonal(values, 0.0)
        values /= values.sum() * 2
        np.fill_diagonal(values, 0.5 / n)
        flow = flow_of(values, stage=pf.Stage.M3)
        mining = np.zeros(n)
        mining[0] = 0.6
        mining[1] = 0.4  # both qualify; the rest must keep their margins
        params = CorrectionParams(gamma_p=0.4)
        out = pf.correct_throughflow(flow, mining, params)
        before_off = flow.offdiagonal()
        after_off = out.offdiagonal()
        scale = after_off.sum() / before_off.sum()
        for i in range(2, n):
            row_b = before_off[i].copy()
            row_a = after_off[i].copy()
            row_b[[0, 1]] = 0.0  # entries toward participants move by design
            row_a[[0, 1]] = 0.0
            assert row_a.sum() == pytest.approx(row_b.sum() * scale, rel=1e-9)

    def test_optimum_gamma_default(self):
        assert CorrectionParams().gamma_p == pytest.approx(0.4)


class TestScaleToMining:
    def test_fixed_point_when_row_matches(self):
        values = np.array([[0.2, 0.3, 0.0], [0.0, 0.2, 0.3], [0.0, 0.0, 0.0]])
        flow = flow_of(values, stage=pf.Stage.M4)
        mining = np.array([0.5, 0.5, 0.0])
        out, pre = pf.scale_to_mining(
            flow, mining, CorrectionParams(gamma_r=1.0), return_prenorm=True
        )
        np.testing.assert_allclose(pre, values, atol=1e-15)
        np.testing.assert_allclose(out.values, values, atol=1e-12)

    def test_ratio_from_worked_example(self):
        # observed outflow 0.30 vs expected 0.20 -> divide the row by 1.5
        values = np.array([[0.1, 0.2, 0.1], [0.0, 0.3, 0.3], [0.0, 0.0, 0.0]])
        flow = flow_of(values, stage=pf.Stage.M4)
        mining = np.array([0.3, 0.7, 0.0])
        out, pre = pf.scale_to_mining(
            flow, mining, CorrectionParams(gamma_r=1.0), return_prenorm=True
        )
        np.testing.assert_allclose(pre[0, 1], 0.2 / 1.5)
        np.testing.assert_allclose(pre[0, 2], 0.1 / 1.5)
        assert pre[0].sum() == pytest.approx(mining[0], abs=1e-12)

    def test_gamma_zero_is_noop(self):
        values = np.array([[0.1, 0.2, 0.1], [0.0, 0.3, 0.3], [0.0, 0.0, 0.0]])
        flow = flow_of(values, stage=pf.Stage.M4)
        mining = np.array([0.3, 0.7, 0.0])
        out = pf.scale_to_mining(flow, mining, CorrectionParams(gamma_r=0.0))
        np.testing.assert_allclose(out.values, values, atol=1e-15)

    def test_floors_exclude_small_miners(self):
        values = np.array([[0.002, 0.004, 0.0], [0.0, 0.5, 0.494], [0.0, 0.0, 0.0]])
        flow = flow_of(values, stage=pf.Stage.M4)
        mining = np.array([0.004, 0.996, 0.0])
        out, pre = pf.scale_to_mining(
            flow, mining, CorrectionParams(gamma_r=1.0), return_prenorm=True
        )
        # slot 0 is below both floors and must be left alone before renorm
        np.testing.assert_array_equal(pre[0], values[0])

    def test_anchoring_invariant_on_random_matrices(self):
        rng = np.random.default_rng(9)
        params = CorrectionParams(gamma_r=1.0)
        for _ in range(20):
            n = 10
            values = rng.random((n, n)) * 0.05
            np.fill_diagonal(values, 0.0)
            values /= values.sum() * 2
            diag = rng.random(n)
            diag = diag / diag.sum() * 0.5
            values += np.diag(diag)
            flow = flow_of(values, stage=pf.Stage.M4)
            mining = rng.random(n)
            mining /= mining.sum()
            out, pre = pf.scale_to_mining(flow, mining, params, return_prenorm=True)
            expected_out = mining - np.diag(values)
            qualifying = (mining > params.scale_m_floor) & (expected_out > params.scale_out_floor)
            row_sums = pre.sum(axis=1)
            assert np.all(np.abs(row_sums[qualifying] - mining[qualifying]) <= 1e-9)
            out.validate()


def test_stage_outputs_are_valid_flow_matrices(hub_world):
    rc = pf.RunConfig(stage=pf.Stage.M5, gamma_tr=hub_world.traded_share,
                      active_category_count=6, optimizer_restarts=2,
                      optimizer_max_evals=300, seed=0)
    res = pf.compute_stages(
        hub_world.tensor, hub_world.mining, hub_world.use, None, rc,
        hub_world.config.year, dummy_slot=hub_world.registry.dummy_slot,
    )
    for stage, flow in res.stages.items():
        flow.validate(dummy_slot=hub_world.registry.dummy_slot)
