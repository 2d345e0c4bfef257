"""Average HPD length over the (N, R0) grid, the data behind a sample-size curve.

Writes alc_curves.csv next to this script for plotting with any tool.
"""

import csv
from pathlib import Path

from combitrial.calibration import AlcConfig, alc_search
from combitrial.model import default_priors

cfg = AlcConfig(replicates=300)
res = alc_search(cfg, default_priors(), root=20201, threads=None)

print("  N  " + "  ".join(f"R0={r:.1f}" for r in cfg.r0_grid))
for n in cfg.n_grid:
    print(f"{n}  " + "  ".join(f"{res.length(n, r):.4f}" for r in cfg.r0_grid))
print("selected (N, R0):", res.selected, "for zeta", cfg.zeta)

out = Path(__file__).with_name("alc_curves.csv")
with out.open("w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["n", "r0", "avg_hpd_length", "mc_stderr"])
    w.writerows((r.n, r.r0, r.avg_hpd_length, r.mc_stderr) for r in res.rows)
