"""Follow the randomisation probabilities through one simulated enrolment."""

from combitrial.adaptive import interim_update, reinstatement_check
from combitrial.model import NOVEL_PRIOR, default_design, ketodex_scenario
from combitrial.rng import stream
from combitrial.trial import run_enrolment

design = default_design()
scenario = ketodex_scenario(0.93)  # 3-3 is best: (0.83, 0.93, 0.88)

enrol = run_enrolment(design, scenario, stream(2024))
print("period  probs (2-4, 3-3, 4-2)      comparator  arms")
for state, alloc in zip(enrol.rand_history, enrol.allocations):
    probs = ", ".join(f"{p:.3f}" for p in state.active_probs)
    print(f"{state.period_index:>6}  ({probs})  {alloc.comparator_n:>10}  {alloc.arm_ns}")

print("participants per arm:", enrol.arm_totals.tolist())
print("reinstated after a drop:", reinstatement_check(enrol.rand_history))

# an interim by hand: one arm falls behind and is dropped
raw, post, dropped = interim_update([[12, 28, 5], [2, 48, 0], [4, 40, 1]], NOVEL_PRIOR, design.drop_threshold)
print("raw prob-best", raw.round(4), "-> after drop rule", post.round(4), dropped)
