"""Monte Carlo design calibration.

Each replicate ``k`` draws all of its randomness from ``stream(root, k)``, so
results do not depend on how replicates are spread over worker processes.
Different scenarios reuse the same replicate streams (common random numbers),
which keeps comparisons across scenarios and grid points smooth.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable, Sequence

import numpy as np

from .inference import hpd_lengths
from .model import (
    PriorSet,
    RrScenario,
    Scenario,
    TrialDesign,
    ketodex_scenario,
)
from .rng import stream
from .trial import Decision, TrialResult, run_enrolment, simulate_trial


def map_replicates(fn: Callable[[int], object], n: int, threads: int | None = 1) -> list:
    """Evaluate ``fn(k)`` for k = 0..n-1, in order, optionally across processes."""
    if threads is None:
        threads = os.cpu_count() or 1
    if threads <= 1 or n < 2:
        return [fn(k) for k in range(n)]
    chunk = max(1, n // (threads * 8))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n), chunksize=chunk))


def order_statistic(values, q: float) -> float:
    """Value at 1-based rank ceil(q * n) of the sorted sample."""
    x = np.sort(np.asarray(values, dtype=float))
    rank = max(1, math.ceil(q * x.size - 1e-9))
    return float(x[rank - 1])


def _se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n)


# --- sample size and allocation ---------------------------------------------

@dataclass(frozen=True)
class AlcConfig:
    zeta: float = 0.07
    n_grid: tuple[int, ...] = tuple(range(350, 501, 10))
    r0_grid: tuple[float, ...] = (0.2, 0.3, 0.4, 0.5)
    replicates: int = 2000
    posterior_draws: int = 2000
    mass: float = 0.95
    # share of the novel-arm participants whose outcomes inform p_D
    novel_share: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "r0_grid", tuple(float(r) for r in self.r0_grid))
        if not self.zeta > 0:
            raise ValueError("zeta must be positive")
        for name in ("n_grid", "r0_grid"):
            grid = getattr(self, name)
            if not grid or list(grid) != sorted(grid):
                raise ValueError(f"{name} must be non-empty and sorted")
        if not all(0 < r < 1 for r in self.r0_grid):
            raise ValueError("r0_grid values must lie in (0, 1)")
        if self.replicates < 1 or self.posterior_draws < 10:
            raise ValueError("need replicates >= 1 and posterior_draws >= 10")
        if not 0 < self.novel_share <= 1:
            raise ValueError("novel_share must lie in (0, 1]")

    def arm_sizes(self) -> tuple[np.ndarray, np.ndarray]:
        """Comparator and novel sizes for every (n, r0) grid point, n-major order."""
        n = np.repeat(np.array(self.n_grid), len(self.r0_grid))
        r0 = np.tile(np.array(self.r0_grid), len(self.n_grid))
        n_c = np.rint(n * r0).astype(np.int64)
        n_d = np.rint((n - n_c) * self.novel_share).astype(np.int64)
        return n_c, n_d


@dataclass(frozen=True)
class AlcRow:
    n: int
    r0: float
    avg_hpd_length: float
    mc_stderr: float


@dataclass(frozen=True)
class AlcResult:
    rows: tuple[AlcRow, ...]
    selected: tuple[int, float] | None
    zeta: float

    def length(self, n: int, r0: float) -> float:
        for row in self.rows:
            if row.n == n and math.isclose(row.r0, r0):
                return row.avg_hpd_length
        raise KeyError((n, r0))


def _alc_replicate(cfg: AlcConfig, priors: PriorSet, root: int, k: int) -> np.ndarray:
    rng = stream(root, k)
    p_c = rng.beta(priors.comparator.alpha, priors.comparator.beta)
    p_d = rng.beta(priors.novel_direct.alpha, priors.novel_direct.beta)
    n_c, n_d = cfg.arm_sizes()
    x_c = rng.binomial(n_c, p_c)
    x_d = rng.binomial(n_d, p_d)
    m = cfg.posterior_draws
    draws_c = rng.beta((priors.comparator.alpha + x_c)[:, None], (priors.comparator.beta + n_c - x_c)[:, None], (n_c.size, m))
    draws_d = rng.beta((priors.novel_direct.alpha + x_d)[:, None], (priors.novel_direct.beta + n_d - x_d)[:, None], (n_d.size, m))
    return hpd_lengths(draws_c - draws_d, cfg.mass)


def select_alc(rows: Sequence[AlcRow], zeta: float) -> tuple[int, float] | None:
    """Smallest n with a qualifying r0; among those r0, the one nearest 1:1."""
    for n in sorted({r.n for r in rows}):
        ok = [r for r in rows if r.n == n and r.avg_hpd_length < zeta]
        if ok:
            best = min(ok, key=lambda r: (abs(r.r0 - 0.5), r.avg_hpd_length))
            return n, best.r0
    return None


def alc_search(cfg: AlcConfig, priors: PriorSet, root: int, threads: int | None = 1) -> AlcResult:
    lengths = np.array(map_replicates(partial(_alc_replicate, cfg, priors, root), cfg.replicates, threads))
    mean = lengths.mean(axis=0)
    se = lengths.std(axis=0, ddof=1) / math.sqrt(cfg.replicates) if cfg.replicates > 1 else np.full(mean.size, np.nan)
    n = np.repeat(np.array(cfg.n_grid), len(cfg.r0_grid))
    r0 = np.tile(np.array(cfg.r0_grid), len(cfg.n_grid))
    rows = tuple(AlcRow(int(a), float(b), float(c), float(d)) for a, b, c, d in zip(n, r0, mean, se))
    return AlcResult(rows, select_alc(rows, cfg.zeta), cfg.zeta)


# --- drop threshold ------------------------------------------------------------

@dataclass(frozen=True)
class GammaRow:
    gamma: float
    p_plurality: float
    mc_stderr: float
    mean_best_n: float
    best_n_q025: float
    best_n_q975: float


@dataclass(frozen=True)
class GammaResult:
    rows: tuple[GammaRow, ...]
    selected: float
    best_arm: int


GAMMA_GRID = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3)


def _enrolment_replicate(design: TrialDesign, scenario: Scenario, root: int, k: int) -> np.ndarray:
    return run_enrolment(design, scenario, stream(root, k)).arm_totals


def plurality(totals: np.ndarray, arm: int) -> np.ndarray:
    """Whether ``arm`` received strictly more participants than every other arm."""
    others = np.delete(totals, arm, axis=1)
    return totals[:, arm] > others.max(axis=1)


def gamma_search(
    design: TrialDesign,
    scenario: Scenario | None = None,
    gamma_grid: Sequence[float] = GAMMA_GRID,
    replicates: int = 7000,
    root: int = 0,
    threads: int | None = 1,
    decimals: int = 2,
) -> GammaResult:
    """Probability that the truly best arm enrols the most participants, per gamma.

    The smallest gamma whose probability, rounded to ``decimals``, equals the
    rounded maximum is selected.
    """
    scenario = scenario or ketodex_scenario(0.93)
    best = scenario.best_arm()
    rows = []
    for g in gamma_grid:
        d = replace(design, drop_threshold=float(g))
        totals = np.array(map_replicates(partial(_enrolment_replicate, d, scenario, root), replicates, threads))
        hit = plurality(totals, best)
        p = float(hit.mean())
        q = np.quantile(totals[:, best], [0.025, 0.975])
        rows.append(GammaRow(float(g), p, _se(p, replicates), float(totals[:, best].mean()), float(q[0]), float(q[1])))
    top = max(round(r.p_plurality, decimals) for r in rows)
    selected = min(r.gamma for r in rows if round(r.p_plurality, decimals) == top)
    return GammaResult(tuple(rows), selected, best)


# --- decision thresholds ------------------------------------------------------

def _trial_replicate(design: TrialDesign, scenario: Scenario, root: int, k: int) -> TrialResult:
    return simulate_trial(design, scenario, stream(root, k))


def simulate_many(design, scenario, replicates, root, threads=1) -> list[TrialResult]:
    return map_replicates(partial(_trial_replicate, design, scenario, root), replicates, threads)


@dataclass(frozen=True)
class LambdaResult:
    value: float
    quantile: float
    scenario: Scenario
    y_values: np.ndarray = field(repr=False)


def null_scenario(design: TrialDesign, p_comparator: float = 0.97, offset: float = 0.0) -> Scenario:
    """Calibration scenario with the optimal arm at p_C - eta + offset."""
    p_d = round(p_comparator - design.ni_margin + offset, 10)
    return ketodex_scenario(p_d, p_comparator, f"p_D={p_d}")


def calibrate_lambda(design, scenario, q, replicates=7000, root=0, threads=1) -> LambdaResult:
    ys = np.array([r.y_stat for r in simulate_many(design, scenario, replicates, root, threads)])
    return LambdaResult(order_statistic(ys, q), q, scenario, ys)


def calibrate_lambda1(design, replicates=7000, root=0, threads=1, scenario=None) -> LambdaResult:
    """5th percentile of y when the optimal arm sits exactly on the margin."""
    return calibrate_lambda(design, scenario or null_scenario(design), 0.05, replicates, root, threads)


def calibrate_lambda2(design, replicates=7000, root=0, threads=1, scenario=None) -> LambdaResult:
    """Median of y when the optimal arm has p_D = 0.78."""
    scenario = scenario or ketodex_scenario(0.78, 0.97, "p_D=0.78")
    return calibrate_lambda(design, scenario, 0.5, replicates, root, threads)


# --- operating characteristics and predictive power --------------------------

@dataclass(frozen=True)
class OcRow:
    scenario: str
    p_noninferior: float
    p_inconclusive: float
    p_superior: float
    p_noninferior_and_correct: float | None
    se_noninferior: float
    se_inconclusive: float
    se_superior: float
    se_noninferior_and_correct: float | None
    replicates: int


def summarise_decisions(results: Sequence[TrialResult], scenario: Scenario, ni_margin: float) -> OcRow:
    n = len(results)
    decisions = [r.decision for r in results]
    p_ni = decisions.count(Decision.NON_INFERIOR) / n
    p_inc = decisions.count(Decision.INCONCLUSIVE) / n
    p_sup = decisions.count(Decision.COMPARATOR_SUPERIOR) / n
    joint = se_joint = None
    if scenario.n_noninferior(ni_margin) > 0:
        best = scenario.best_arm()
        joint = sum(r.decision is Decision.NON_INFERIOR and r.selected_arm == best for r in results) / n
        se_joint = _se(joint, n)
    return OcRow(
        scenario.description, p_ni, p_inc, p_sup, joint,
        _se(p_ni, n), _se(p_inc, n), _se(p_sup, n), se_joint, n,
    )


def operating_characteristics(
    design: TrialDesign,
    scenarios: Sequence[Scenario],
    replicates: int = 7000,
    root: int = 0,
    threads: int | None = 1,
) -> list[OcRow]:
    return [
        summarise_decisions(simulate_many(design, sc, replicates, root, threads), sc, design.ni_margin)
        for sc in scenarios
    ]


@dataclass(frozen=True)
class PowerRow:
    scenario: str
    p_conclusive: float
    p_noninferior: float
    se_conclusive: float
    se_noninferior: float
    replicates: int


def _power_replicate(design: TrialDesign, rr: RrScenario, root: int, k: int) -> Decision:
    rng = stream(root, k)
    p_c = rng.beta(design.priors.comparator.alpha, design.priors.comparator.beta)
    p_d = rng.beta(design.priors.novel_direct.alpha, design.priors.novel_direct.beta)
    return simulate_trial(design, rr.realise(p_c, p_d), rng).decision


def predictive_power(
    design: TrialDesign,
    rr_scenarios: Sequence[RrScenario],
    replicates: int = 2000,
    root: int = 0,
    threads: int | None = 1,
) -> list[PowerRow]:
    rows = []
    for rr in rr_scenarios:
        decisions = map_replicates(partial(_power_replicate, design, rr, root), replicates, threads)
        p_inc = decisions.count(Decision.INCONCLUSIVE) / replicates
        p_ni = decisions.count(Decision.NON_INFERIOR) / replicates
        rows.append(PowerRow(rr.name, 1 - p_inc, p_ni, _se(p_inc, replicates), _se(p_ni, replicates), replicates))
    return rows
