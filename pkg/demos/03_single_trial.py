"""Run complete trials, from enrolment to the final non-inferiority decision."""

from combitrial.model import default_design, table1_scenarios
from combitrial.rng import stream
from combitrial.trial import simulate_trial

design = default_design()

for scenario in table1_scenarios()[::2]:
    result = simulate_trial(design, scenario, stream(7))
    s = result.posterior_summary
    print(
        f"{scenario.description:>10}: selected arm {result.selected_arm}, y = {result.y_stat:.3f} "
        f"-> {result.decision.value}; p_C - p_D 95% HPD ({s.hpd_difference[0]:.3f}, {s.hpd_difference[1]:.3f})"
    )
