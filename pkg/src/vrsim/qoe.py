"""QoE metrics, the dualized objective, and self-tuning multipliers.

Per user: Q is the mean per-GoP PSNR, V the mean absolute PSNR change
between consecutive GoPs, S the total rebuffering time. The weighted
score is Q - mu0*S - mu1*V; the dualized score is
Q + mu0*(H0 - S) + mu1*(H1 - V), whose multipliers are adjusted by a
projected gradient step after each epoch so the stall and variation
targets H0, H1 are met.

The per-step reward uses unnormalized running sums, so summing rewards
over an episode telescopes to sum(q) - mu0*S - mu1*sum(|dq|).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

DEFAULT_STALL_TARGET_S = 0.5
DEFAULT_VARIATION_TARGET_DB = 2.0
DEFAULT_MULTIPLIER_STEP = 0.01
DEFAULT_MULTIPLIER_CAP = 100.0


@dataclass
class QoeAccumulator:
    quality_sum_db: float = 0.0
    variation_sum_db: float = 0.0
    stall_sum_s: float = 0.0
    gop_count: int = 0
    last_quality_db: float = 0.0

    def add_gop(self, quality_db: float, stall_s: float) -> None:
        if self.gop_count > 0:
            self.variation_sum_db += abs(quality_db - self.last_quality_db)
        self.quality_sum_db += quality_db
        self.stall_sum_s += stall_s
        self.gop_count += 1
        self.last_quality_db = quality_db

    def copy(self) -> "QoeAccumulator":
        return replace(self)


@dataclass(frozen=True)
class LagrangianState:
    mu0: float = 0.0
    mu1: float = 0.0
    stall_target_s: float = DEFAULT_STALL_TARGET_S
    variation_target_db: float = DEFAULT_VARIATION_TARGET_DB
    step_size: float = DEFAULT_MULTIPLIER_STEP
    mu_max: float = DEFAULT_MULTIPLIER_CAP

    def __post_init__(self) -> None:
        if not 0 <= self.mu0 <= self.mu_max or not 0 <= self.mu1 <= self.mu_max:
            raise ValueError("multipliers must lie in [0, mu_max]")
        if self.step_size < 0:
            raise ValueError("step_size must be nonnegative")


def average_quality(acc: QoeAccumulator) -> float:
    """Mean per-GoP PSNR in dB."""
    if acc.gop_count == 0:
        raise ValueError("no GoPs accumulated")
    return acc.quality_sum_db / acc.gop_count


def quality_variation(acc: QoeAccumulator) -> float:
    """Mean absolute PSNR change between consecutive GoPs, in dB."""
    if acc.gop_count < 2:
        raise ValueError("quality variation needs at least two GoPs")
    return acc.variation_sum_db / (acc.gop_count - 1)


def weighted_qoe(acc: QoeAccumulator, mu0: float, mu1: float) -> float:
    """Classic weighted score: Q - mu0*S - mu1*V."""
    return average_quality(acc) - mu0 * acc.stall_sum_s - mu1 * quality_variation(acc)


def lagrangian_qoe(acc: QoeAccumulator, lag: LagrangianState) -> float:
    """Dualized score: Q + mu0*(H0 - S) + mu1*(H1 - V)."""
    return (
        average_quality(acc)
        + lag.mu0 * (lag.stall_target_s - acc.stall_sum_s)
        + lag.mu1 * (lag.variation_target_db - quality_variation(acc))
    )


def unnormalized_lagrangian_sum(acc: QoeAccumulator, lag: LagrangianState) -> float:
    """sum(q) - mu0*S - mu1*sum(|dq|): what the step rewards telescope to."""
    return acc.quality_sum_db - lag.mu0 * acc.stall_sum_s - lag.mu1 * acc.variation_sum_db


def step_reward(
    acc_before: QoeAccumulator,
    acc_after: QoeAccumulator,
    lag: LagrangianState,
) -> float:
    """Reward for the one GoP consumed between the two accumulator
    snapshots: q - mu0*stall - mu1*|q - q_prev| in running-sum form."""
    if acc_after.gop_count != acc_before.gop_count + 1:
        raise ValueError("accumulators must differ by exactly one GoP")
    return (
        (acc_after.quality_sum_db - acc_before.quality_sum_db)
        - lag.mu0 * (acc_after.stall_sum_s - acc_before.stall_sum_s)
        - lag.mu1 * (acc_after.variation_sum_db - acc_before.variation_sum_db)
    )


def update_multipliers(
    lag: LagrangianState,
    rebuffer_s: float,
    variation_db: float,
) -> LagrangianState:
    """Projected gradient step on mu0*(H0 - S) + mu1*(H1 - V).

    A stall total above its target raises mu0 (and symmetrically for
    quality variation); both multipliers stay within [0, mu_max].
    """
    mu0 = min(lag.mu_max, max(0.0, lag.mu0 - lag.step_size * (lag.stall_target_s - rebuffer_s)))
    mu1 = min(
        lag.mu_max, max(0.0, lag.mu1 - lag.step_size * (lag.variation_target_db - variation_db))
    )
    return replace(lag, mu0=mu0, mu1=mu1)


def update_multipliers_from(lag: LagrangianState, acc: QoeAccumulator) -> LagrangianState:
    return update_multipliers(lag, acc.stall_sum_s, quality_variation(acc))
