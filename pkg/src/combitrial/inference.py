"""Posterior computation.

The dose-response model has two logistic regressions on log-dose, one for
under-sedation and one for over-sedation; adequate sedation takes the
remaining probability mass. Its posterior is sampled with an adaptive
random-walk Metropolis chain restricted to coefficient vectors whose implied
probabilities lie strictly inside the simplex for every arm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from . import _kernel
from .model import (
    COEFFICIENT_NAMES,
    ArmTruth,
    BetaPrior,
    DoseCombination,
    OutcomeTable,
    PriorSet,
    SamplerConfig,
)


class SimplexViolation(ValueError):
    """Implied probabilities leave the open probability simplex."""


class SamplerError(RuntimeError):
    """The Metropolis chain never moved during burn-in."""


@dataclass(frozen=True)
class BetaVector:
    b0: float
    b1: float
    b2: float
    ba: float
    bb: float
    bc: float

    def as_array(self) -> np.ndarray:
        return np.array([self.b0, self.b1, self.b2, self.ba, self.bb, self.bc])

    @classmethod
    def from_array(cls, arr) -> "BetaVector":
        return cls(*(float(a) for a in arr))


@dataclass(frozen=True)
class Interval:
    low: float
    high: float
    mass: float

    @property
    def length(self) -> float:
        return self.high - self.low


@dataclass(frozen=True)
class PosteriorDraws:
    """Posterior sample.

    ``betas`` has shape (n_draws, 6) in coefficient order b0, b1, b2, ba, bb,
    bc; ``arm_probs`` has shape (n_draws, n_arms, 3) with columns under,
    adequate, over.
    """

    betas: np.ndarray
    arm_probs: np.ndarray
    comparator_probs: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return self.betas.shape[0]

    def beta_vectors(self) -> list[BetaVector]:
        return [BetaVector.from_array(row) for row in self.betas]

    @property
    def adequate(self) -> np.ndarray:
        return self.arm_probs[:, :, 1]


def expit(x):
    # same formula as the compiled kernel so both agree on simplex membership
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


def dose_response_probs(beta: BetaVector, dose: DoseCombination) -> ArmTruth:
    la, lb = math.log(dose.ketamine_dose), math.log(dose.dexmedetomidine_dose)
    p_under = float(expit(beta.b0 + beta.b1 * la + beta.b2 * lb))
    p_over = float(expit(beta.ba + beta.bb * la + beta.bc * lb))
    p_adequate = 1.0 - p_under - p_over
    if not (0 < p_adequate < 1 and 0 < p_under < 1 and 0 < p_over < 1):
        raise SimplexViolation(f"p_under={p_under}, p_over={p_over} leave no adequate mass")
    return ArmTruth(p_under, p_adequate, p_over)


def arm_probabilities(betas: np.ndarray, log_a: np.ndarray, log_b: np.ndarray) -> np.ndarray:
    """Vectorised dose-response map: (n, 6) coefficients to (n, arms, 3) probabilities."""
    betas = np.atleast_2d(betas)
    p_under = expit(betas[:, [0]] + betas[:, [1]] * log_a + betas[:, [2]] * log_b)
    p_over = expit(betas[:, [3]] + betas[:, [4]] * log_a + betas[:, [5]] * log_b)
    return np.stack([p_under, 1.0 - p_under - p_over, p_over], axis=-1)


def check_simplex(arm_probs: np.ndarray, atol: float = 1e-12) -> None:
    """Raise SimplexViolation unless every 3-vector is strictly inside the simplex."""
    if not np.all((arm_probs > 0) & (arm_probs < 1)):
        raise SimplexViolation("posterior draw on or outside the simplex boundary")
    if np.max(np.abs(arm_probs.sum(axis=-1) - 1.0), initial=0.0) > atol:
        raise SimplexViolation("posterior draw does not sum to one")


def multinomial_loglik(counts: Sequence[int], probs: ArmTruth) -> float:
    # multinomial coefficient dropped: it does not depend on the coefficients
    p = (probs.p_under, probs.p_adequate, probs.p_over)
    return float(sum(c * math.log(q) for c, q in zip(counts, p) if c))


def _chain(rng, beta0, counts, log_a, log_b, loc, scale, df, free, n_burnin, n_keep, cfg):
    d_free = int(free.sum())
    base = np.diag(np.where(free, cfg.proposal_scale, 0.0))
    chol = base
    using_cov = False
    log_s = 0.0
    beta = beta0.copy()
    lp = _kernel.log_posterior(beta, log_a, log_b, counts, loc, scale, df)

    burn = np.empty((n_burnin, 6))
    burn_accepted = 0
    done = 0
    batch = 100
    while done < n_burnin:
        m = min(batch, n_burnin - done)
        z = rng.standard_normal((m, 6))
        log_u = np.log(rng.random(m))
        beta, lp, acc = _kernel.rwm_segment(
            beta, lp, math.exp(log_s) * chol, z, log_u, log_a, log_b, counts, loc, scale, df,
            burn[done:done + m],
        )
        done += m
        burn_accepted += acc
        if not cfg.adapt:
            continue
        log_s += 2.0 * (acc / m - 0.3)
        window = burn[done // 2:done][:, free]
        if done >= 4 * batch and len(window) > 2 * d_free:
            cov = np.atleast_2d(np.cov(window, rowvar=False))
            cov += 1e-10 * np.eye(d_free)
            try:
                lower = np.linalg.cholesky(cov * 2.38**2 / d_free)
            except np.linalg.LinAlgError:
                continue
            if not using_cov:
                log_s, using_cov = 0.0, True
            chol = np.zeros((6, 6))
            chol[np.ix_(free, free)] = lower

    if burn_accepted == 0:
        raise SamplerError("no proposal accepted during burn-in")

    n_iter = n_keep * cfg.thin
    out = np.empty((n_iter, 6))
    z = rng.standard_normal((n_iter, 6))
    log_u = np.log(rng.random(n_iter))
    _, _, accepted = _kernel.rwm_segment(
        beta, lp, math.exp(log_s) * chol, z, log_u, log_a, log_b, counts, loc, scale, df, out
    )
    return out[cfg.thin - 1::cfg.thin], accepted / n_iter, burn_accepted / n_burnin


def sample_dose_response(
    data: OutcomeTable,
    doses: Sequence[DoseCombination],
    priors: PriorSet,
    cfg: SamplerConfig,
    rng: np.random.Generator,
    fixed: Sequence[bool] | None = None,
) -> PosteriorDraws:
    """Draw from the posterior of the six dose-response coefficients.

    Chains start at the prior location vector. ``fixed`` optionally holds
    selected coefficients at that location (a boolean mask in coefficient
    order).
    """
    counts = data.as_array()
    if counts.shape[0] != len(doses):
        raise ValueError(f"{counts.shape[0]} count rows for {len(doses)} doses")
    log_a = np.log([d.ketamine_dose for d in doses])
    log_b = np.log([d.dexmedetomidine_dose for d in doses])
    loc, scale, df = priors.coefficient_arrays()
    free = np.ones(6, dtype=bool) if fixed is None else ~np.asarray(fixed, dtype=bool)
    if not free.any():
        raise ValueError("every coefficient is fixed")

    if not np.isfinite(_kernel.log_posterior(loc, log_a, log_b, counts, loc, scale, df)):
        raise SamplerError("prior location lies outside the simplex for some arm")

    per_chain = [cfg.n_draws // cfg.n_chains] * cfg.n_chains
    for c in range(cfg.n_draws % cfg.n_chains):
        per_chain[c] += 1
    chains, accept_rates, burn_rates = [], [], []
    for chain_rng, n_keep in zip(rng.spawn(cfg.n_chains), per_chain):
        draws, acc, burn_rate = _chain(
            chain_rng, loc, counts, log_a, log_b, loc, scale, df, free, cfg.n_burnin, n_keep, cfg
        )
        chains.append(draws)
        accept_rates.append(acc)
        burn_rates.append(burn_rate)

    betas = np.concatenate(chains)
    arm_probs = arm_probabilities(betas, log_a, log_b)
    check_simplex(arm_probs)
    meta = {
        "n_draws": betas.shape[0],
        "n_chains": cfg.n_chains,
        "acceptance_rate": float(np.mean(accept_rates)),
        "burnin_acceptance_rate": float(np.mean(burn_rates)),
    }
    if cfg.n_chains > 1 and min(per_chain) >= 4:
        split = [arm_probabilities(c, log_a, log_b)[:, :, 1] for c in chains]
        n = min(per_chain)
        meta["rhat_adequate"] = [split_rhat([s[:n, i] for s in split]) for i in range(len(doses))]
    return PosteriorDraws(betas, arm_probs, None, meta)


def beta_posterior(prior: BetaPrior, successes: int, failures: int) -> BetaPrior:
    if successes < 0 or failures < 0:
        raise ValueError("counts must be non-negative")
    return BetaPrior(prior.alpha + successes, prior.beta + failures)


def prob_best(adequate_draws) -> np.ndarray:
    """Share of draws in which each arm is the strict maximum; ties split evenly.

    ``adequate_draws`` is either an (n_draws, n_arms) array or a sequence of
    per-arm draw vectors of equal length.
    """
    if isinstance(adequate_draws, np.ndarray) and adequate_draws.ndim == 2:
        x = adequate_draws
    else:
        x = np.column_stack([np.asarray(a, dtype=float) for a in adequate_draws])
    if x.shape[1] < 2 or x.shape[0] < 1:
        raise ValueError("need at least two arms and one draw")
    is_max = x == x.max(axis=1, keepdims=True)
    share = is_max / is_max.sum(axis=1, keepdims=True)
    out = share.mean(axis=0)
    return out / out.sum()


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(128)
_GL_U = 0.5 * (_GL_NODES + 1.0)
_GL_W = 0.5 * _GL_WEIGHTS


def prob_best_beta(alphas: Sequence[float], betas: Sequence[float]) -> np.ndarray:
    """Probability that each independent Beta variable is the largest.

    Integrates prod_{k != i} F_k(F_i^{-1}(u)) over u in (0, 1) by Gauss-Legendre
    quadrature, which stays bounded even for Beta densities with a pole at 1.
    """
    a = np.asarray(alphas, dtype=float)
    b = np.asarray(betas, dtype=float)
    k = len(a)
    if k < 2:
        raise ValueError("need at least two arms")
    x = special.betaincinv(a[:, None], b[:, None], _GL_U[None, :])  # (k, nodes)
    out = np.empty(k)
    for i in range(k):
        cdf = special.betainc(a[:, None], b[:, None], x[i][None, :])
        cdf[i] = 1.0
        out[i] = np.dot(np.prod(cdf, axis=0), _GL_W)
    return out / out.sum()


def noninferiority_stat(comparator_draws, novel_draws, eta: float) -> float:
    """Posterior probability that comparator minus novel is at least ``eta``."""
    c = np.asarray(comparator_draws, dtype=float)
    n = np.asarray(novel_draws, dtype=float)
    if c.shape != n.shape:
        raise ValueError("draw vectors differ in length")
    return float(np.mean((c - n) >= eta))


def _window(n: int, mass: float) -> int:
    if not 0 < mass < 1:
        raise ValueError("mass must lie in (0, 1)")
    return min(n, max(1, math.ceil(mass * n - 1e-9)))


def hpd_interval(draws, mass: float = 0.95) -> Interval:
    """Shortest window of sorted draws holding ``ceil(mass * n)`` of them."""
    x = np.sort(np.asarray(draws, dtype=float).ravel())
    n = x.size
    if n < 10:
        raise ValueError("need at least 10 draws")
    k = _window(n, mass)
    widths = x[k - 1:] - x[: n - k + 1]
    i = int(np.argmin(widths))  # first minimum wins ties
    return Interval(float(x[i]), float(x[i + k - 1]), mass)


def hpd_lengths(draws: np.ndarray, mass: float = 0.95) -> np.ndarray:
    """Row-wise HPD lengths for a (replicates, draws) matrix."""
    x = np.sort(draws, axis=1)
    k = _window(x.shape[1], mass)
    return (x[:, k - 1:] - x[:, : x.shape[1] - k + 1]).min(axis=1)


def effective_sample_size(x) -> float:
    """Geyer initial-positive-sequence ESS of a single chain."""
    x = np.asarray(x, dtype=float)
    n = x.size
    xc = x - x.mean()
    var = np.dot(xc, xc) / n
    if var == 0:
        return float(n)
    f = np.fft.rfft(xc, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n] / (n * var)
    tau = -1.0
    for t in range(0, n - 1, 2):
        pair = acf[t] + acf[t + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    return float(n / max(tau, 1e-12))


def split_rhat(chains: Sequence[np.ndarray]) -> float:
    halves = []
    for c in chains:
        h = len(c) // 2
        halves += [np.asarray(c[:h]), np.asarray(c[h:2 * h])]
    m = np.stack(halves)
    n = m.shape[1]
    w = m.var(axis=1, ddof=1).mean()
    b = n * m.mean(axis=1).var(ddof=1)
    if w == 0:
        return 1.0
    return float(np.sqrt(((n - 1) / n * w + b / n) / w))


__all__ = [
    "COEFFICIENT_NAMES",
    "BetaVector",
    "Interval",
    "PosteriorDraws",
    "SamplerError",
    "SimplexViolation",
    "arm_probabilities",
    "beta_posterior",
    "check_simplex",
    "dose_response_probs",
    "effective_sample_size",
    "hpd_interval",
    "hpd_lengths",
    "multinomial_loglik",
    "noninferiority_stat",
    "prob_best",
    "prob_best_beta",
    "sample_dose_response",
    "split_rhat",
]
