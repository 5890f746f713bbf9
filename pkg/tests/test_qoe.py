import numpy as np
import pytest

from vrsim import qoe
from vrsim.qoe import LagrangianState, QoeAccumulator


def accumulate(qs, stalls=None):
    acc = QoeAccumulator()
    stalls = stalls if stalls is not None else [0.0] * len(qs)
    for q, s in zip(qs, stalls):
        acc.add_gop(q, s)
    return acc


class TestMetrics:
    def test_average_quality(self):
        assert qoe.average_quality(accumulate([50.0] * 5)) == 50.0
        assert qoe.average_quality(accumulate([40.0, 50.0, 60.0])) == pytest.approx(50.0)
        assert qoe.average_quality(accumulate([37.5])) == 37.5

    def test_quality_variation(self):
        assert qoe.quality_variation(accumulate([42.0] * 4)) == 0.0
        assert qoe.quality_variation(accumulate([40.0, 50.0, 40.0])) == pytest.approx(10.0)
        assert qoe.quality_variation(accumulate([40.0, 45.0])) == pytest.approx(5.0)

    def test_preconditions(self):
        with pytest.raises(ValueError):
            qoe.average_quality(QoeAccumulator())
        with pytest.raises(ValueError):
            qoe.quality_variation(accumulate([40.0]))


class TestWeightedAndLagrangian:
    def test_weights_zero_reduce_to_quality(self):
        acc = accumulate([40.0, 50.0, 60.0], [1.0, 0.0, 0.5])
        assert qoe.weighted_qoe(acc, 0.0, 0.0) == pytest.approx(50.0)

    def test_weighted_substitution(self):
        # Q=50, S=2, V=1
        acc = accumulate([49.0, 50.0, 51.0], [2.0, 0.0, 0.0])
        assert qoe.weighted_qoe(acc, 1.0, 0.5) == pytest.approx(47.5)

    def test_lagrangian_zero_multipliers(self):
        acc = accumulate([49.0, 50.0, 51.0], [2.0, 0.0, 0.0])
        lag = LagrangianState(mu0=0.0, mu1=0.0)
        assert qoe.lagrangian_qoe(acc, lag) == pytest.approx(50.0)

    def test_lagrangian_slack_vanishes_at_target(self):
        acc = accumulate([50.0, 50.0], [2.0, 0.0])
        lag = LagrangianState(mu0=1.0, mu1=0.0, stall_target_s=2.0)
        assert qoe.lagrangian_qoe(acc, lag) == pytest.approx(50.0)

    def test_lagrangian_substitution(self):
        # Q=50, S=1, H0=2, mu0=1, V = H1 -> 50 + 1*(2-1) = 51
        acc = accumulate([50.0, 50.0], [1.0, 0.0])
        lag = LagrangianState(mu0=1.0, mu1=3.0, stall_target_s=2.0, variation_target_db=0.0)
        assert qoe.lagrangian_qoe(acc, lag) == pytest.approx(51.0)

    def test_decomposition_identity(self, rng):
        for _ in range(50):
            qs = rng.uniform(30, 60, size=int(rng.integers(2, 20)))
            stalls = rng.uniform(0, 1, size=len(qs))
            acc = accumulate(list(qs), list(stalls))
            lag = LagrangianState(
                mu0=float(rng.uniform(0, 5)),
                mu1=float(rng.uniform(0, 5)),
                stall_target_s=float(rng.uniform(0, 2)),
                variation_target_db=float(rng.uniform(0, 4)),
            )
            diff = qoe.lagrangian_qoe(acc, lag) - qoe.weighted_qoe(acc, lag.mu0, lag.mu1)
            assert diff == pytest.approx(
                lag.mu0 * lag.stall_target_s + lag.mu1 * lag.variation_target_db, rel=1e-9
            )


class TestStepReward:
    def test_no_stall_constant_quality(self):
        lag = LagrangianState(mu0=1.0, mu1=2.0)
        acc = accumulate([50.0])
        before = acc.copy()
        acc.add_gop(50.0, 0.0)
        assert qoe.step_reward(before, acc, lag) == pytest.approx(50.0)

    def test_stall_penalty(self):
        lag = LagrangianState(mu0=1.0, mu1=0.0)
        acc = accumulate([50.0])
        before = acc.copy()
        acc.add_gop(50.0, 1.0)
        assert qoe.step_reward(before, acc, lag) == pytest.approx(49.0)

    def test_telescoping_to_unnormalized_sum(self, rng):
        for _ in range(50):
            lag = LagrangianState(mu0=float(rng.uniform(0, 3)), mu1=float(rng.uniform(0, 3)))
            acc = QoeAccumulator()
            total = 0.0
            for _ in range(int(rng.integers(2, 30))):
                before = acc.copy()
                acc.add_gop(float(rng.uniform(30, 60)), float(rng.uniform(0, 0.5)))
                total += qoe.step_reward(before, acc, lag)
            assert total == pytest.approx(qoe.unnormalized_lagrangian_sum(acc, lag), rel=1e-9)

    def test_requires_single_gop_delta(self):
        lag = LagrangianState()
        acc = accumulate([50.0, 50.0])
        with pytest.raises(ValueError):
            qoe.step_reward(acc, acc, lag)


class TestMultiplierUpdate:
    def test_zero_gradient_at_target(self):
        lag = LagrangianState(mu0=1.0, mu1=1.0, stall_target_s=0.5, variation_target_db=2.0)
        out = qoe.update_multipliers(lag, 0.5, 2.0)
        assert out.mu0 == 1.0 and out.mu1 == 1.0

    def test_step_up_when_above_target(self):
        lag = LagrangianState(mu0=1.0, stall_target_s=0.5, step_size=0.1)
        out = qoe.update_multipliers(lag, 1.5, lag.variation_target_db)
        assert out.mu0 == pytest.approx(1.1)

    def test_projection_at_zero(self):
        lag = LagrangianState(mu0=0.0, stall_target_s=5.0, step_size=0.1)
        out = qoe.update_multipliers(lag, 0.0, lag.variation_target_db)
        assert out.mu0 == 0.0

    def test_cap(self):
        lag = LagrangianState(mu0=99.95, stall_target_s=0.0, step_size=0.1, mu_max=100.0)
        out = qoe.update_multipliers(lag, 10.0, lag.variation_target_db)
        assert out.mu0 == 100.0

    def test_direction_nondecreasing_under_persistent_violation(self):
        lag = LagrangianState(mu0=0.0, stall_target_s=0.5, step_size=0.05)
        prev = lag.mu0
        for _ in range(100):
            lag = qoe.update_multipliers(lag, 2.0, lag.variation_target_db)
            assert lag.mu0 >= prev
            prev = lag.mu0
        assert lag.mu0 == pytest.approx(0.05 * 1.5 * 100)

    def test_user_permutation_invariance(self, rng):
        qs = rng.uniform(30, 60, size=(4, 10))
        stalls = rng.uniform(0, 1, size=(4, 10))
        lag = LagrangianState(mu0=1.0, mu1=1.0)

        def totals(order):
            vals = []
            for u in order:
                acc = accumulate(list(qs[u]), list(stalls[u]))
                vals.append(qoe.lagrangian_qoe(acc, lag))
            return sorted(vals)

        assert totals([0, 1, 2, 3]) == pytest.approx(totals([3, 1, 0, 2]))
