"""Fit the dose-response model to one set of counts and read off the posterior."""

import numpy as np

from combitrial.inference import hpd_interval, sample_dose_response
from combitrial.model import KETODEX_DOSES, COEFFICIENT_NAMES, OutcomeTable, SamplerConfig, default_priors
from combitrial.rng import stream

# (under, adequate, over) per dose combination, in the order 2-4, 3-3, 4-2
counts = OutcomeTable(((8, 60, 4), (3, 75, 2), (6, 66, 0)), 0, 0)

draws = sample_dose_response(counts, KETODEX_DOSES, default_priors(), SamplerConfig(), stream(1))
print(f"{draws.n_draws} draws, acceptance rate {draws.meta['acceptance_rate']:.2f}")

for name, col in zip(COEFFICIENT_NAMES, draws.betas.T):
    print(f"  {name:>2}: mean {col.mean():7.3f}  sd {col.std():6.3f}")

# posterior of p_adequate next to the raw proportions
for dose, row, p in zip(KETODEX_DOSES, counts.arm_counts, draws.adequate.T):
    iv = hpd_interval(p)
    raw = row[1] / sum(row)
    print(f"{dose.label}: observed {raw:.3f}  posterior mean {p.mean():.3f}  95% HPD ({iv.low:.3f}, {iv.high:.3f})")

# every retained draw is strictly inside the simplex for every arm
assert np.all((draws.arm_probs > 0) & (draws.arm_probs < 1))
