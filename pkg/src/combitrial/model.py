"""Domain types, design constants, priors and simulation scenarios.

Every type here is a frozen dataclass; sequences are stored as tuples so
values can be shared between worker processes without copying concerns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np


class DesignError(ValueError):
    """Raised when a design or one of its components violates an invariant."""


def logit(p: float) -> float:
    return math.log(p / (1.0 - p))


@dataclass(frozen=True)
class DoseCombination:
    ketamine_dose: float
    dexmedetomidine_dose: float
    label: str = ""

    def __post_init__(self):
        if not (self.ketamine_dose > 0 and self.dexmedetomidine_dose > 0):
            raise DesignError(f"dose {self.label!r}: both doses must be strictly positive")


@dataclass(frozen=True)
class ArmTruth:
    p_under: float
    p_adequate: float
    p_over: float

    def __post_init__(self):
        ps = (self.p_under, self.p_adequate, self.p_over)
        if any(not (0.0 <= p <= 1.0) for p in ps):
            raise DesignError(f"arm probabilities {ps} outside [0, 1]")
        if abs(sum(ps) - 1.0) > 1e-12:
            raise DesignError(f"arm probabilities {ps} do not sum to 1")

    @classmethod
    def from_adequate(cls, p_adequate: float, over_fraction: float) -> "ArmTruth":
        """Split the inadequately sedated mass into over- and under-sedation."""
        inadequate = 1.0 - p_adequate
        p_over = over_fraction * inadequate
        return cls(p_under=1.0 - p_adequate - p_over, p_adequate=p_adequate, p_over=p_over)

    def as_array(self) -> np.ndarray:
        return np.array([self.p_under, self.p_adequate, self.p_over])


@dataclass(frozen=True)
class Scenario:
    arm_truths: tuple[ArmTruth, ...]
    p_comparator: float
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "arm_truths", tuple(self.arm_truths))
        if not 0.0 <= self.p_comparator <= 1.0:
            raise DesignError("p_comparator outside [0, 1]")

    @property
    def adequate(self) -> np.ndarray:
        return np.array([t.p_adequate for t in self.arm_truths])

    def best_arm(self) -> int:
        return int(np.argmax(self.adequate))

    def n_noninferior(self, ni_margin: float) -> int:
        # 1e-9 absorbs float noise in p_C - eta (0.97 - 0.178 is not exactly 0.792)
        bound = self.p_comparator - ni_margin + 1e-9
        return int(np.sum(self.adequate > bound))


@dataclass(frozen=True)
class BetaPrior:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise DesignError(f"Beta({self.alpha}, {self.beta}): parameters must be positive")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


@dataclass(frozen=True)
class CoefficientPrior:
    """Student-t prior on one regression coefficient."""

    location: float
    scale: float
    degrees_of_freedom: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise DesignError("coefficient prior scale must be positive")
        if not self.degrees_of_freedom > 0:
            raise DesignError("coefficient prior degrees_of_freedom must be positive")

    @classmethod
    def from_precision(cls, location: float, precision: float, df: float = 1.0):
        return cls(location, 1.0 / math.sqrt(precision), df)


COEFFICIENT_NAMES = ("b0", "b1", "b2", "ba", "bb", "bc")


@dataclass(frozen=True)
class PriorSet:
    comparator: BetaPrior
    novel_direct: BetaPrior
    interim_arm: BetaPrior
    under_intercept: CoefficientPrior
    under_slope_a: CoefficientPrior
    under_slope_b: CoefficientPrior
    over_intercept: CoefficientPrior
    over_slope_a: CoefficientPrior
    over_slope_b: CoefficientPrior

    def coefficient_priors(self) -> tuple[CoefficientPrior, ...]:
        """Priors in coefficient order (b0, b1, b2, ba, bb, bc)."""
        return (
            self.under_intercept,
            self.under_slope_a,
            self.under_slope_b,
            self.over_intercept,
            self.over_slope_a,
            self.over_slope_b,
        )

    def coefficient_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        cps = self.coefficient_priors()
        return (
            np.array([c.location for c in cps], dtype=float),
            np.array([c.scale for c in cps], dtype=float),
            np.array([c.degrees_of_freedom for c in cps], dtype=float),
        )


# 2 of 27 inadequately sedated in the pilot, discounted to effective sample size 6.5
NOVEL_PRIOR = BetaPrior(6.5 * 25 / 27, 6.5 * 2 / 27)
# the rounded form quoted alongside it; its mean (0.96) disagrees with the pilot's 25/27
NOVEL_PRIOR_QUOTED = BetaPrior(6.25, 0.25)
COMPARATOR_PRIOR = BetaPrior(15.6, 0.44)


def default_priors(novel: BetaPrior = NOVEL_PRIOR) -> PriorSet:
    """Reference priors; ``novel`` is used both for p_D directly and at interims."""
    slope = CoefficientPrior.from_precision(0.0, 0.001, 1.0)
    return PriorSet(
        comparator=COMPARATOR_PRIOR,
        novel_direct=novel,
        interim_arm=novel,
        under_intercept=replace(slope, location=logit(0.05)),
        under_slope_a=slope,
        under_slope_b=slope,
        over_intercept=replace(slope, location=logit(0.02)),
        over_slope_a=slope,
        over_slope_b=slope,
    )


@dataclass(frozen=True)
class InterimSchedule:
    analysis_points: tuple[int, ...]
    total_n: int

    def __post_init__(self):
        object.__setattr__(self, "analysis_points", tuple(int(a) for a in self.analysis_points))
        pts = self.analysis_points
        if any(a <= 0 for a in pts):
            raise DesignError("analysis points must be positive integers")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise DesignError("analysis points must be strictly increasing")
        if pts and pts[-1] >= self.total_n:
            raise DesignError("last analysis point must be below total_n")
        if self.total_n <= 0:
            raise DesignError("total_n must be positive")

    @property
    def period_sizes(self) -> tuple[int, ...]:
        bounds = (0,) + self.analysis_points + (self.total_n,)
        return tuple(b - a for a, b in zip(bounds, bounds[1:]))

    @property
    def n_periods(self) -> int:
        return len(self.analysis_points) + 1


@dataclass(frozen=True)
class SamplerConfig:
    n_draws: int = 2000
    n_burnin: int = 2000
    n_chains: int = 1
    thin: int = 5
    proposal_scale: float = 0.5
    adapt: bool = True
    seed: int = 20201

    def __post_init__(self):
        for name in ("n_draws", "n_burnin", "n_chains", "thin"):
            if int(getattr(self, name)) <= 0:
                raise DesignError(f"sampler {name} must be positive")
        if not self.proposal_scale > 0:
            raise DesignError("sampler proposal_scale must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise DesignError("sampler seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class OutcomeTable:
    """Accumulated counts: per dose arm (under, adequate, over), plus comparator."""

    arm_counts: tuple[tuple[int, int, int], ...]
    comparator_successes: int = 0
    comparator_failures: int = 0

    def __post_init__(self):
        counts = tuple(tuple(int(c) for c in row) for row in self.arm_counts)
        if any(len(row) != 3 for row in counts):
            raise DesignError("each arm needs an (under, adequate, over) count triple")
        if any(c < 0 for row in counts for c in row):
            raise DesignError("counts must be non-negative")
        if self.comparator_successes < 0 or self.comparator_failures < 0:
            raise DesignError("comparator counts must be non-negative")
        object.__setattr__(self, "arm_counts", counts)

    @classmethod
    def empty(cls, n_arms: int) -> "OutcomeTable":
        return cls(((0, 0, 0),) * n_arms)

    @classmethod
    def from_arrays(cls, arms: np.ndarray, comparator: Sequence[int]) -> "OutcomeTable":
        return cls(tuple(map(tuple, np.asarray(arms, dtype=int).tolist())), int(comparator[0]), int(comparator[1]))

    @property
    def arm_totals(self) -> tuple[int, ...]:
        return tuple(sum(row) for row in self.arm_counts)

    def as_array(self) -> np.ndarray:
        return np.array(self.arm_counts, dtype=np.int64).reshape(-1, 3)


@dataclass(frozen=True)
class TrialDesign:
    doses: tuple[DoseCombination, ...]
    comparator_fraction: float
    drop_threshold: float
    ni_margin: float
    lambda1: float
    lambda2: float
    schedule: InterimSchedule
    priors: PriorSet = field(default_factory=default_priors)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)

    def __post_init__(self):
        object.__setattr__(self, "doses", tuple(self.doses))

    @property
    def n_arms(self) -> int:
        return len(self.doses)

    def log_doses(self) -> tuple[np.ndarray, np.ndarray]:
        log_a = np.log([d.ketamine_dose for d in self.doses])
        log_b = np.log([d.dexmedetomidine_dose for d in self.doses])
        return log_a, log_b


def validate_design(design: TrialDesign) -> TrialDesign:
    """Return `design` unchanged if every invariant holds, else raise DesignError."""
    k = design.n_arms
    if k < 2:
        raise DesignError("at least two dose combinations are required")
    if not 0 < design.comparator_fraction < 1:
        raise DesignError("comparator_fraction (R0) must lie in (0, 1)")
    if not 0 <= design.drop_threshold <= 1.0 / k:
        raise DesignError(f"drop_threshold (gamma) must lie in [0, 1/{k}]")
    if not 0 < design.ni_margin < 1:
        raise DesignError("ni_margin (eta) must lie in (0, 1)")
    for name in ("lambda1", "lambda2"):
        if not 0 <= getattr(design, name) <= 1:
            raise DesignError(f"{name} must lie in [0, 1]")
    if not design.lambda1 + design.lambda2 < 1:
        raise DesignError("lambda1 + lambda2 must be below 1")
    if not isinstance(design.schedule, InterimSchedule):
        raise DesignError("schedule must be an InterimSchedule")
    return design


KETODEX_DOSES = (
    DoseCombination(2.0, 4.0, "2-4"),
    DoseCombination(3.0, 3.0, "3-3"),
    DoseCombination(4.0, 2.0, "4-2"),
)

# share of inadequately sedated patients who are over-sedated, in dose order 2-4, 3-3, 4-2
KETODEX_OVER_FRACTIONS = (0.2, 0.1, 0.01)
# adequate-sedation offsets from the 3-3 arm, same order
KETODEX_OFFSETS = (-0.1, 0.0, -0.05)

TABLE1_P_OPTIMAL = (0.93, 0.90, 0.87, 0.85, 0.83, 0.792, 0.78, 0.75)


def default_design(**overrides) -> TrialDesign:
    design = TrialDesign(
        doses=KETODEX_DOSES,
        comparator_fraction=0.4,
        drop_threshold=0.05,
        ni_margin=0.178,
        lambda1=0.037,
        lambda2=0.608,
        schedule=InterimSchedule((150, 200, 250, 300, 350), 410),
    )
    return validate_design(replace(design, **overrides))


def ketodex_scenario(p_optimal: float, p_comparator: float = 0.97, description: str = "") -> Scenario:
    """Three-arm scenario with 3-3 at `p_optimal`, 4-2 five and 2-4 ten points lower."""
    truths = tuple(
        ArmTruth.from_adequate(round(p_optimal + off, 10), frac)
        for off, frac in zip(KETODEX_OFFSETS, KETODEX_OVER_FRACTIONS)
    )
    return Scenario(truths, p_comparator, description or f"p_D={p_optimal}")


def table1_scenarios(p_comparator: float = 0.97) -> list[Scenario]:
    return [
        ketodex_scenario(p, p_comparator, f"scenario {i}: p_D={p}")
        for i, p in enumerate(TABLE1_P_OPTIMAL, start=1)
    ]


@dataclass(frozen=True)
class RrScenario:
    """Prior-predictive scenario: per-arm relative risks on a prior draw of p_D."""

    relative_risks: tuple[float, ...]
    over_fractions: tuple[float, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "relative_risks", tuple(self.relative_risks))
        object.__setattr__(self, "over_fractions", tuple(self.over_fractions))
        if any(r <= 0 for r in self.relative_risks):
            raise DesignError("relative risks must be positive")
        if any(not 0 <= f <= 1 for f in self.over_fractions):
            raise DesignError("over fractions must lie in [0, 1]")
        if len(self.relative_risks) != len(self.over_fractions):
            raise DesignError("relative_risks and over_fractions differ in length")

    def realise(self, p_comparator: float, p_direct: float) -> Scenario:
        truths = tuple(
            ArmTruth.from_adequate(min(max(rr * p_direct, 0.0), 1.0), frac)
            for rr, frac in zip(self.relative_risks, self.over_fractions)
        )
        return Scenario(truths, p_comparator, self.name)


def table2_scenarios() -> list[RrScenario]:
    # dose order 2-4, 3-3, 4-2
    return [
        RrScenario((0.95, 1.0, 0.9), KETODEX_OVER_FRACTIONS, "A"),
        RrScenario((0.98, 1.0, 0.95), KETODEX_OVER_FRACTIONS, "B"),
        RrScenario((1.0, 1.05, 0.95), KETODEX_OVER_FRACTIONS, "C"),
    ]
