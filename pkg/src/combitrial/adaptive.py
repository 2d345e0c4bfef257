"""Response-adaptive randomisation between the dose combinations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .inference import beta_posterior, prob_best_beta
from .model import BetaPrior


@dataclass(frozen=True)
class RandomisationState:
    period_index: int
    active_probs: tuple[float, ...]
    dropped: tuple[bool, ...]


@dataclass(frozen=True)
class PeriodAllocation:
    comparator_n: int
    arm_ns: tuple[int, ...]

    @property
    def period_n(self) -> int:
        return self.comparator_n + sum(self.arm_ns)


def initial_probs(n_arms: int) -> np.ndarray:
    if n_arms < 2:
        raise ValueError("adaptive randomisation needs at least two arms")
    return np.full(n_arms, 1.0 / n_arms)


def apply_drop_rule(raw_probs, gamma: float) -> np.ndarray:
    """Zero every probability at or below ``gamma`` and renormalise the rest."""
    p = np.asarray(raw_probs, dtype=float)
    kept = np.where(p <= gamma, 0.0, p)
    if kept.sum() <= 0:
        # every arm at or below gamma, e.g. all tied at exactly 1/k; keep the leaders
        kept = np.where(p == p.max(), p, 0.0)
    return kept / kept.sum()


def interim_update(arm_counts, prior: BetaPrior, gamma: float):
    """Conjugate interim analysis on adequate vs inadequate counts.

    Returns (raw prob-best vector, post-drop probabilities, dropped flags).
    """
    counts = np.asarray(arm_counts, dtype=float).reshape(-1, 3)
    successes = counts[:, 1]
    failures = counts[:, 0] + counts[:, 2]
    posts = [beta_posterior(prior, s, f) for s, f in zip(successes, failures)]
    raw = prob_best_beta([p.alpha for p in posts], [p.beta for p in posts])
    post = apply_drop_rule(raw, gamma)
    return raw, post, tuple(bool(x) for x in post == 0)


def allocate_period(period_n: int, probs, r0: float, rng: np.random.Generator) -> PeriodAllocation:
    """Two-stage randomisation of one period's participants.

    Every participant draws a dose combination from ``probs``, then receives
    it with probability 1 - r0 (comparator otherwise), the two draws being
    independent.
    """
    p = np.asarray(probs, dtype=float)
    by_combination = rng.multinomial(period_n, p / p.sum())
    arm_ns = rng.binomial(by_combination, 1.0 - r0)
    return PeriodAllocation(int(period_n - arm_ns.sum()), tuple(int(n) for n in arm_ns))


def reinstatement_check(history: Sequence[RandomisationState]) -> tuple[bool, ...]:
    """Flag arms that were zeroed in some period and randomised again later."""
    if not history:
        raise ValueError("empty randomisation history")
    probs = np.array([h.active_probs for h in history])
    out = []
    for col in probs.T:
        zero = np.flatnonzero(col == 0)
        out.append(bool(zero.size and np.any(col[zero[0] + 1:] > 0)))
    return tuple(out)
