import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from combitrial.inference import (
    BetaVector,
    SamplerError,
    SimplexViolation,
    arm_probabilities,
    beta_posterior,
    check_simplex,
    dose_response_probs,
    effective_sample_size,
    expit,
    hpd_interval,
    hpd_lengths,
    multinomial_loglik,
    noninferiority_stat,
    prob_best,
    prob_best_beta,
    sample_dose_response,
    split_rhat,
)
from combitrial.model import (
    KETODEX_DOSES,
    ArmTruth,
    BetaPrior,
    CoefficientPrior,
    DoseCombination,
    OutcomeTable,
    SamplerConfig,
    default_priors,
    logit,
)
from combitrial.rng import stream

PRIOR_MEAN_BETA = BetaVector(logit(0.05), 0.0, 0.0, logit(0.02), 0.0, 0.0)
P093 = ArmTruth(0.05, 0.93, 0.02)


# --- dose-response map and likelihood ---------------------------------------

@pytest.mark.parametrize("dose", KETODEX_DOSES + (DoseCombination(1.0, 1.0),))
def test_prior_location_gives_093_at_any_dose(dose):
    p = dose_response_probs(PRIOR_MEAN_BETA, dose)
    assert (p.p_under, p.p_adequate, p.p_over) == pytest.approx((0.05, 0.93, 0.02), abs=1e-12)


def test_zero_coefficients_hit_simplex_boundary():
    with pytest.raises(SimplexViolation):
        dose_response_probs(BetaVector(0, 0, 0, 0, 0, 0), DoseCombination(1.0, 1.0))


def test_slope_on_ketamine():
    beta = replace(PRIOR_MEAN_BETA, b1=1.0)
    p = dose_response_probs(beta, DoseCombination(2.0, 4.0))
    # expit(logit(0.05) + ln 2) = 2/21 exactly; expit(-2.2513) from a 30-digit evaluation
    assert p.p_under == pytest.approx(2 / 21, abs=1e-14)
    assert float(expit(-2.2513)) == pytest.approx(0.0952373885444022, abs=1e-15)


def test_vectorised_map_matches_scalar():
    rng = np.random.default_rng(3)
    betas = PRIOR_MEAN_BETA.as_array() + rng.normal(0, 0.3, (50, 6))
    la = np.log([d.ketamine_dose for d in KETODEX_DOSES])
    lb = np.log([d.dexmedetomidine_dose for d in KETODEX_DOSES])
    probs = arm_probabilities(betas, la, lb)
    for row, b in zip(probs, betas):
        for i, dose in enumerate(KETODEX_DOSES):
            p = dose_response_probs(BetaVector.from_array(b), dose)
            np.testing.assert_allclose(row[i], p.as_array(), atol=1e-15)


def test_loglik_examples():
    assert multinomial_loglik((0, 0, 0), P093) == 0.0
    assert multinomial_loglik((1, 0, 0), P093) == pytest.approx(math.log(0.05), abs=1e-15)
    # 2 ln 0.05 + 27 ln 0.93 + ln 0.02, evaluated at 30 digits
    assert multinomial_loglik((2, 27, 1), P093) == pytest.approx(-11.8628962590767, abs=1e-12)


def test_check_simplex_rejects_boundary():
    good = np.array([[[0.1, 0.8, 0.1]]])
    check_simplex(good)
    with pytest.raises(SimplexViolation):
        check_simplex(np.array([[[0.0, 1.0, 0.0]]]))
    with pytest.raises(SimplexViolation):
        check_simplex(np.array([[[0.2, 0.8, 0.1]]]))


# --- conjugate pieces --------------------------------------------------------

def test_beta_posterior_examples():
    c = BetaPrior(15.6, 0.44)
    assert beta_posterior(c, 0, 0) == c
    assert beta_posterior(c, 10, 2) == BetaPrior(25.6, 2.44)
    assert beta_posterior(BetaPrior(6.25, 0.25), 25, 2) == BetaPrior(31.25, 2.25)
    with pytest.raises(ValueError):
        beta_posterior(c, -1, 0)


def test_prob_best_examples():
    dominant = np.array([[0.1, 0.9, 0.2], [0.3, 0.8, 0.5]])
    np.testing.assert_array_equal(prob_best(dominant), [0, 1, 0])
    ties = np.tile([[0.5], [0.7]], (1, 3))
    np.testing.assert_allclose(prob_best(ties), [1 / 3] * 3)
    # arm draws {0.9, 0.5}, {0.8, 0.8}, {0.1, 0.2}: draw 1 -> arm 0, draw 2 -> arm 1
    draws = np.array([[0.9, 0.8, 0.1], [0.5, 0.8, 0.2]])
    np.testing.assert_allclose(prob_best(draws), [0.5, 0.5, 0.0])


@given(st.lists(st.lists(st.floats(0, 1), min_size=3, max_size=3), min_size=1, max_size=30))
@settings(max_examples=200, deadline=None)
def test_prob_best_is_a_distribution(rows):
    p = prob_best(np.array(rows))
    assert p.sum() == pytest.approx(1.0)
    assert np.all(p >= 0)


# reference values from adaptive 25-digit quadrature of f_i(x) prod_k F_k(x)
PB_CASES = [
    (
        (13 / 2 * 25 / 27 + 40, 13 / 2 * 25 / 27 + 52, 13 / 2 * 25 / 27 + 44),
        (13 / 2 * 2 / 27 + 15, 13 / 2 * 2 / 27 + 3, 13 / 2 * 2 / 27 + 4),
        (7.588991852685843e-05, 0.7119935112569652, 0.2879305988245079),
    ),
    ((3, 5, 4), (2, 1, 3), (1 / 7, 10 / 13, 8 / 91)),
]


@pytest.mark.parametrize("alphas, betas, expected", PB_CASES)
def test_prob_best_beta_against_reference(alphas, betas, expected):
    np.testing.assert_allclose(prob_best_beta(alphas, betas), expected, atol=2e-5)


def test_prob_best_beta_symmetry_and_mc():
    np.testing.assert_allclose(prob_best_beta([7, 7, 7], [2, 2, 2]), [1 / 3] * 3, atol=1e-9)
    rng = np.random.default_rng(11)
    a, b = np.array([20.0, 24.0, 18.0]), np.array([3.0, 2.5, 1.0])
    draws = rng.beta(a, b, size=(200_000, 3))
    mc = prob_best(draws)
    np.testing.assert_allclose(prob_best_beta(a, b), mc, atol=4 * np.sqrt(0.25 / 200_000))


def test_prob_best_beta_handles_pole_at_one():
    p = prob_best_beta([6.0, 6.0, 100.0], [0.48, 0.48, 2.0])
    assert np.all(np.isfinite(p)) and p.sum() == pytest.approx(1.0)


def test_noninferiority_examples():
    same = np.full(10, 0.9)
    assert noninferiority_stat(same, same, 0.178) == 0.0
    assert noninferiority_stat(np.ones(10), np.full(10, 0.5), 0.178) == 1.0
    c = np.array([0.9, 0.9, 0.9, 0.9])
    n = c - np.array([0.1, 0.2, 0.3, 0.0])
    assert noninferiority_stat(c, n, 0.178) == 0.5
    with pytest.raises(ValueError):
        noninferiority_stat(c, n[:3], 0.178)


# --- HPD ---------------------------------------------------------------------

def test_hpd_integer_ladder_first_window_wins():
    iv = hpd_interval(np.arange(1, 101), 0.95)
    assert (iv.low, iv.high, iv.length) == (1, 95, 94)


def test_hpd_preconditions():
    with pytest.raises(ValueError):
        hpd_interval(np.arange(9.0))
    with pytest.raises(ValueError):
        hpd_interval(np.arange(20.0), mass=1.0)


def test_hpd_degenerate():
    iv = hpd_interval(np.full(20, 0.3))
    assert (iv.low, iv.high) == (0.3, 0.3)


def test_hpd_standard_normal_length():
    x = np.random.default_rng(0).standard_normal(200_000)
    # 2 * 1.959964 from the normal quantile table
    assert hpd_interval(x).length == pytest.approx(3.919928, rel=0.05)


def test_hpd_skewed_is_shorter_than_central():
    x = np.random.default_rng(1).exponential(size=50_000)
    iv = hpd_interval(x)
    central = np.quantile(x, 0.975) - np.quantile(x, 0.025)
    assert iv.length < central
    assert iv.low < 0.01


@given(st.lists(st.floats(-1e3, 1e3), min_size=10, max_size=60), st.floats(0.05, 0.999))
@settings(max_examples=300, deadline=None)
def test_hpd_is_shortest_covering_window(xs, mass):
    x = np.sort(np.array(xs))
    iv = hpd_interval(x, mass)
    k = min(len(x), max(1, math.ceil(mass * len(x) - 1e-9)))
    assert np.sum((x >= iv.low) & (x <= iv.high)) >= k
    brute = min(x[i + k - 1] - x[i] for i in range(len(x) - k + 1))
    assert iv.length == pytest.approx(brute)
    assert hpd_lengths(x[None, :], mass)[0] == pytest.approx(brute)


# --- diagnostics -------------------------------------------------------------

def test_ess_of_iid_and_ar1():
    rng = np.random.default_rng(2)
    iid = rng.standard_normal(20_000)
    assert effective_sample_size(iid) == pytest.approx(20_000, rel=0.1)
    phi = 0.9
    ar = np.empty(20_000)
    ar[0] = 0
    e = rng.standard_normal(20_000)
    for t in range(1, len(ar)):
        ar[t] = phi * ar[t - 1] + e[t]
    # integrated autocorrelation time (1 + phi) / (1 - phi) = 19
    assert effective_sample_size(ar) == pytest.approx(20_000 / 19, rel=0.25)


def test_split_rhat_detects_disagreement():
    rng = np.random.default_rng(4)
    same = [rng.standard_normal(1000) for _ in range(4)]
    assert split_rhat(same) == pytest.approx(1.0, abs=0.02)
    shifted = [rng.standard_normal(1000) + 3 * i for i in range(4)]
    assert split_rhat(shifted) > 1.5


# --- sampler -----------------------------------------------------------------

FAST = SamplerConfig(n_draws=1000, n_burnin=1000)


def _conjugate_priors():
    # flat-ish intercept on logit(p_under) and a pinned, negligible over-sedation
    # probability: the posterior of p_adequate is then Beta(adequate, under)
    return replace(
        default_priors(),
        under_intercept=CoefficientPrior(0.0, 1e4, 1.0),
        over_intercept=CoefficientPrior(-40.0, 1.0, 1.0),
    )


def conjugacy_check(counts, seed, n_draws=2000):
    """Return (ok, details) comparing MCMC with the analytic Beta posterior."""
    data = OutcomeTable((counts,), 0, 0)
    cfg = SamplerConfig(n_draws=n_draws, n_burnin=2000)
    fixed = [False, True, True, True, True, True]
    d = sample_dose_response(data, (DoseCombination(3.0, 3.0),), _conjugate_priors(), cfg, stream(seed), fixed)
    x = d.adequate[:, 0]
    ess = effective_sample_size(x)
    exact = stats.beta(counts[1], counts[0])
    checks = {"mean": (x.mean(), exact.mean(), exact.std() / math.sqrt(ess))}
    for q in (0.025, 0.975):
        xq = exact.ppf(q)
        checks[f"q{q}"] = (np.quantile(x, q), xq, math.sqrt(q * (1 - q) / ess) / exact.pdf(xq))
    ok = all(abs(est - ref) < 3 * se for est, ref, se in checks.values())
    return ok, checks, ess


@pytest.mark.parametrize("counts, seed", [((4, 36, 0), 1), ((10, 90, 0), 2), ((2, 25, 0), 3)])
def test_conjugacy_oracle(counts, seed):
    ok, checks, ess = conjugacy_check(counts, seed)
    assert ok, (checks, ess)


def _truncated_prior_mean(priors, doses, n=1_000_000, seed=1):
    """Prior mean of p_adequate per arm, by rejection sampling from the priors."""
    loc, scale, df = priors.coefficient_arrays()
    rng = np.random.default_rng(seed)
    la = np.log([d.ketamine_dose for d in doses])
    lb = np.log([d.dexmedetomidine_dose for d in doses])
    b = loc + scale * rng.standard_t(df, (n, 6))
    p = arm_probabilities(b, la, lb)
    keep = np.all((p > 0) & (p < 1), axis=(1, 2))
    return p[keep][:, :, 1].mean(axis=0)


def test_zero_data_recovers_truncated_prior():
    priors = default_priors()
    ref = _truncated_prior_mean(priors, KETODEX_DOSES)
    cfg = SamplerConfig(n_draws=4000, n_burnin=2000)
    means, ses = [], []
    for seed in range(4):
        d = sample_dose_response(OutcomeTable.empty(3), KETODEX_DOSES, priors, cfg, stream(seed))
        x = d.adequate
        means.append(x.mean(axis=0))
        ses.append(x.std(axis=0) / np.sqrt([effective_sample_size(x[:, i]) for i in range(3)]))
    pooled = np.mean(means, axis=0)
    se = np.sqrt(np.sum(np.square(ses), axis=0)) / len(means)
    assert np.all(np.abs(pooled - ref) < 4 * se), (pooled, ref, se)


def test_overwhelming_adequate_data():
    data = OutcomeTable(((0, 1000, 0),) * 3, 0, 0)
    d = sample_dose_response(data, KETODEX_DOSES, default_priors(), FAST, stream(5))
    assert np.all(d.adequate.mean(axis=0) > 0.99)


def test_sampler_is_deterministic():
    data = OutcomeTable(((5, 40, 3), (2, 50, 1), (4, 44, 0)), 0, 0)
    a = sample_dose_response(data, KETODEX_DOSES, default_priors(), FAST, stream(9))
    b = sample_dose_response(data, KETODEX_DOSES, default_priors(), FAST, stream(9))
    np.testing.assert_array_equal(a.betas, b.betas)
    c = sample_dose_response(data, KETODEX_DOSES, default_priors(), FAST, stream(10))
    assert not np.array_equal(a.betas, c.betas)


def test_sampler_output_shape_and_meta():
    data = OutcomeTable(((5, 40, 3), (2, 50, 1), (4, 44, 0)), 0, 0)
    cfg = replace(FAST, n_chains=3, n_draws=999)
    d = sample_dose_response(data, KETODEX_DOSES, default_priors(), cfg, stream(1))
    assert d.betas.shape == (999, 6)
    assert d.arm_probs.shape == (999, 3, 3)
    assert 0.1 < d.meta["acceptance_rate"] < 0.6
    assert len(d.meta["rhat_adequate"]) == 3
    assert len(d.beta_vectors()) == 999
    # arm probabilities are re-derivable from the coefficients
    la = np.log([x.ketamine_dose for x in KETODEX_DOSES])
    lb = np.log([x.dexmedetomidine_dose for x in KETODEX_DOSES])
    np.testing.assert_array_equal(arm_probabilities(d.betas, la, lb), d.arm_probs)


def test_sampler_failure_when_start_is_invalid():
    bad = replace(default_priors(), under_intercept=CoefficientPrior(0.0, 1.0), over_intercept=CoefficientPrior(0.0, 1.0))
    with pytest.raises(SamplerError):
        sample_dose_response(OutcomeTable.empty(3), KETODEX_DOSES, bad, FAST, stream(0))


def test_count_rows_must_match_doses():
    with pytest.raises(ValueError):
        sample_dose_response(OutcomeTable.empty(2), KETODEX_DOSES, default_priors(), FAST, stream(0))
