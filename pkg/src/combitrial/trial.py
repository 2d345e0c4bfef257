"""Simulation of a single seamless trial."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .adaptive import (
    PeriodAllocation,
    RandomisationState,
    allocate_period,
    initial_probs,
    interim_update,
)
from .inference import (
    PosteriorDraws,
    beta_posterior,
    hpd_interval,
    noninferiority_stat,
    sample_dose_response,
)
from .model import ArmTruth, OutcomeTable, Scenario, TrialDesign


class Decision(str, enum.Enum):
    NON_INFERIOR = "NonInferior"
    INCONCLUSIVE = "Inconclusive"
    COMPARATOR_SUPERIOR = "ComparatorSuperior"


@dataclass(frozen=True)
class PosteriorSummary:
    mean_adequate: tuple[float, ...]
    mean_comparator: float
    hpd_difference: tuple[float, float]


@dataclass(frozen=True)
class Enrolment:
    """The adaptive part of a trial: allocations, counts and randomisation history."""

    allocations: tuple[PeriodAllocation, ...]
    final_counts: OutcomeTable
    rand_history: tuple[RandomisationState, ...]

    @property
    def arm_totals(self) -> np.ndarray:
        return np.sum([a.arm_ns for a in self.allocations], axis=0)


@dataclass(frozen=True)
class TrialResult:
    allocations: tuple[PeriodAllocation, ...]
    final_counts: OutcomeTable
    rand_history: tuple[RandomisationState, ...]
    selected_arm: int
    y_stat: float
    decision: Decision
    posterior_summary: PosteriorSummary
    acceptance_rate: float = float("nan")


def generate_outcomes(truth, n: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial (under, adequate, over) counts for an ArmTruth, or
    (successes, failures) for a bare comparator probability."""
    if isinstance(truth, ArmTruth):
        p = truth.as_array()
        return rng.multinomial(n, p / p.sum())
    successes = rng.binomial(n, float(truth))
    return np.array([successes, n - successes])


def select_optimal(draws: PosteriorDraws) -> int:
    """Arm with the largest posterior mean adequate-sedation probability (lowest index on ties)."""
    return int(np.argmax(draws.adequate.mean(axis=0)))


def decide(y: float, lambda1: float, lambda2: float) -> Decision:
    if y <= lambda1:
        return Decision.NON_INFERIOR
    if y >= lambda2:
        return Decision.COMPARATOR_SUPERIOR
    return Decision.INCONCLUSIVE


def run_enrolment(design: TrialDesign, scenario: Scenario, rng: np.random.Generator) -> Enrolment:
    """Enrol every period, updating randomisation probabilities at each analysis point."""
    k = design.n_arms
    if len(scenario.arm_truths) != k:
        raise ValueError("scenario and design disagree on the number of arms")
    arms = np.zeros((k, 3), dtype=np.int64)
    comparator = np.zeros(2, dtype=np.int64)
    probs = initial_probs(k)
    dropped = (False,) * k
    allocations, history = [], []
    sizes = design.schedule.period_sizes
    for j, n_j in enumerate(sizes, start=1):
        history.append(RandomisationState(j, tuple(float(p) for p in probs), dropped))
        alloc = allocate_period(n_j, probs, design.comparator_fraction, rng)
        allocations.append(alloc)
        for i, truth in enumerate(scenario.arm_truths):
            arms[i] += generate_outcomes(truth, alloc.arm_ns[i], rng)
        comparator += generate_outcomes(scenario.p_comparator, alloc.comparator_n, rng)
        if j < len(sizes):
            _, probs, dropped = interim_update(arms, design.priors.interim_arm, design.drop_threshold)
    return Enrolment(tuple(allocations), OutcomeTable.from_arrays(arms, comparator), tuple(history))


def analyse(design: TrialDesign, counts: OutcomeTable, rng: np.random.Generator):
    """Final analysis: dose-response fit, comparator posterior, optimal arm and y."""
    draws = sample_dose_response(counts, design.doses, design.priors, design.sampler, rng)
    post_c = beta_posterior(design.priors.comparator, counts.comparator_successes, counts.comparator_failures)
    p_c = rng.beta(post_c.alpha, post_c.beta, size=draws.n_draws)
    draws = replace(draws, comparator_probs=p_c)
    best = select_optimal(draws)
    p_d = draws.adequate[:, best]
    y = noninferiority_stat(p_c, p_d, design.ni_margin)
    hpd = hpd_interval(p_c - p_d)
    summary = PosteriorSummary(
        tuple(float(m) for m in draws.adequate.mean(axis=0)), float(p_c.mean()), (hpd.low, hpd.high)
    )
    return draws, best, y, summary


def simulate_trial(design: TrialDesign, scenario: Scenario, rng: np.random.Generator) -> TrialResult:
    enrol = run_enrolment(design, scenario, rng)
    draws, best, y, summary = analyse(design, enrol.final_counts, rng)
    return TrialResult(
        allocations=enrol.allocations,
        final_counts=enrol.final_counts,
        rand_history=enrol.rand_history,
        selected_arm=best,
        y_stat=y,
        decision=decide(y, design.lambda1, design.lambda2),
        posterior_summary=summary,
        acceptance_rate=draws.meta["acceptance_rate"],
    )
