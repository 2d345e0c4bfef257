import numpy as np
import pytest

from combitrial.calibration import (
    AlcConfig,
    AlcRow,
    alc_search,
    calibrate_lambda2,
    gamma_search,
    map_replicates,
    null_scenario,
    operating_characteristics,
    order_statistic,
    plurality,
    predictive_power,
    select_alc,
    simulate_many,
    summarise_decisions,
)
from combitrial.model import (
    ArmTruth,
    SamplerConfig,
    Scenario,
    default_design,
    default_priors,
    ketodex_scenario,
    table2_scenarios,
)

QUICK = default_design(sampler=SamplerConfig(n_draws=300, n_burnin=600))


def _square(k):
    return k * k


def test_map_replicates_order_and_thread_invariance():
    serial = map_replicates(_square, 37, threads=1)
    assert serial == [k * k for k in range(37)]
    assert map_replicates(_square, 37, threads=3) == serial


def test_order_statistic_rank():
    x = np.arange(100, 0, -1)
    assert order_statistic(x, 0.05) == 5
    assert order_statistic(x, 0.5) == 50
    assert order_statistic(x, 0.0) == 1
    assert order_statistic([3.0], 0.5) == 3.0


def test_select_alc_rules():
    rows = [
        AlcRow(350, 0.3, 0.08, 0), AlcRow(350, 0.4, 0.075, 0),
        AlcRow(360, 0.3, 0.069, 0), AlcRow(360, 0.4, 0.068, 0), AlcRow(360, 0.5, 0.0695, 0),
    ]
    assert select_alc(rows, 0.07) == (360, 0.5)
    assert select_alc(rows, 0.0685) == (360, 0.4)
    assert select_alc(rows, 0.01) is None


def test_alc_threshold_that_never_binds():
    cfg = AlcConfig(zeta=1.0, n_grid=(350, 400), replicates=20, posterior_draws=200)
    res = alc_search(cfg, default_priors(), root=1)
    assert res.selected == (350, 0.5)
    assert len(res.rows) == 8
    assert res.length(400, 0.4) == next(r.avg_hpd_length for r in res.rows if (r.n, r.r0) == (400, 0.4))


def test_alc_stderr_shrinks_with_replicates():
    small = alc_search(AlcConfig(n_grid=(400,), replicates=50, posterior_draws=500), default_priors(), 3)
    large = alc_search(AlcConfig(n_grid=(400,), replicates=800, posterior_draws=500), default_priors(), 3)
    assert all(s.mc_stderr > l.mc_stderr for s, l in zip(small.rows, large.rows))


def test_alc_config_validation():
    with pytest.raises(ValueError):
        AlcConfig(zeta=0)
    with pytest.raises(ValueError):
        AlcConfig(r0_grid=(0.5, 0.3))


def test_plurality_is_strict():
    totals = np.array([[10, 20, 5], [20, 20, 5], [1, 2, 30]])
    np.testing.assert_array_equal(plurality(totals, 1), [True, False, False])


def test_gamma_search_exchangeable_arms():
    truth = ArmTruth.from_adequate(0.9, 0.1)
    sc = Scenario((truth,) * 3, 0.97)
    res = gamma_search(QUICK, sc, gamma_grid=(0.0,), replicates=600, root=2)
    # strict plurality: ties at the top make this slightly below 1/3
    assert res.rows[0].p_plurality == pytest.approx(1 / 3, abs=0.05)


def test_gamma_selection_prefers_smallest_on_ties():
    res = gamma_search(QUICK, ketodex_scenario(0.93), gamma_grid=(0.05, 0.1), replicates=200, root=4)
    top = max(round(r.p_plurality, 2) for r in res.rows)
    assert res.selected == min(r.gamma for r in res.rows if round(r.p_plurality, 2) == top)
    assert res.best_arm == 1


def test_decision_fractions_partition():
    sc = ketodex_scenario(0.85)
    (row,) = operating_characteristics(QUICK, [sc], replicates=30, root=5)
    counts = [row.p_noninferior * 30, row.p_inconclusive * 30, row.p_superior * 30]
    assert all(c == pytest.approx(round(c)) for c in counts)
    assert sum(round(c) for c in counts) == 30
    assert row.replicates == 30


def test_joint_not_reported_without_noninferior_arm():
    results = simulate_many(QUICK, ketodex_scenario(0.78), 5, root=6)
    assert summarise_decisions(results, ketodex_scenario(0.78), 0.178).p_noninferior_and_correct is None


def test_null_scenario_sits_on_margin():
    sc = null_scenario(QUICK)
    assert sc.adequate.max() == pytest.approx(0.792)
    assert sc.n_noninferior(0.178) == 0


def test_lambda2_degenerate_when_novel_equals_comparator():
    sc = ketodex_scenario(0.97, 0.97)
    res = calibrate_lambda2(QUICK, replicates=20, root=7, scenario=sc)
    assert res.value < 0.01


def test_simulate_many_thread_invariant():
    sc = ketodex_scenario(0.9)
    a = simulate_many(QUICK, sc, 6, root=8, threads=1)
    b = simulate_many(QUICK, sc, 6, root=8, threads=2)
    assert [r.y_stat for r in a] == [r.y_stat for r in b]
    assert [r.final_counts for r in a] == [r.final_counts for r in b]


def test_predictive_power_rows():
    rows = predictive_power(QUICK, table2_scenarios()[:1], replicates=20, root=9)
    (row,) = rows
    assert row.scenario == "A"
    assert 0 <= row.p_noninferior <= row.p_conclusive <= 1
