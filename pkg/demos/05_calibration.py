"""Desk-scale calibration: drop threshold, decision thresholds, operating characteristics.

Replicate counts are far below the defaults so the script finishes in a few
minutes; expect Monte Carlo noise of a few percentage points.
"""

from dataclasses import replace

from combitrial.calibration import (
    calibrate_lambda1,
    calibrate_lambda2,
    gamma_search,
    operating_characteristics,
)
from combitrial.model import default_design, table1_scenarios

design = default_design()
reps = 300

g = gamma_search(design, gamma_grid=(0.05, 0.1, 0.2), replicates=reps, root=1, threads=None)
for row in g.rows:
    print(f"gamma {row.gamma:.2f}: P(best arm enrols most) {row.p_plurality:.3f}, mean enrolment {row.mean_best_n:.0f}")
print("chosen gamma:", g.selected)

design = replace(design, drop_threshold=g.selected)
l1 = calibrate_lambda1(design, reps, root=2, threads=None)
l2 = calibrate_lambda2(design, reps, root=2, threads=None)
print(f"lambda1 = {l1.value:.3f}, lambda2 = {l2.value:.3f}")

design = replace(design, lambda1=l1.value, lambda2=l2.value)
for row in operating_characteristics(design, table1_scenarios(), reps, root=3, threads=None):
    joint = "  -  " if row.p_noninferior_and_correct is None else f"{row.p_noninferior_and_correct:.3f}"
    print(f"{row.scenario:>10}: NI {row.p_noninferior:.3f}  inconclusive {row.p_inconclusive:.3f}  "
          f"superior {row.p_superior:.3f}  joint {joint}")
