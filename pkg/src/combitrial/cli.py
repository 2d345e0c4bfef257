"""Command-line front end.

Every subcommand reads one JSON config, writes CSV tables (plus a JSON
summary where useful) into ``--out`` and finishes with ``manifest.json``.
Tables lead with ``schema``, ``seed`` and ``config_digest`` columns so any
file can be traced back to the inputs that produced it.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import calibration as cal
from .adaptive import interim_update
from .config import (
    TOOL_VERSION,
    ConfigError,
    RunManifest,
    design_to_dict,
    digest,
    load_document,
    parse_alc,
    parse_design,
    parse_gamma_grid,
    parse_interim,
    parse_rr_scenarios,
    parse_run,
    parse_scenario,
    parse_scenarios,
    scenario_to_dict,
)
from .inference import SamplerError, SimplexViolation
from .model import DesignError, ketodex_scenario
from .rng import entropy_seed

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 2, 3, 4
TABLE_SCHEMA = "combitrial-table/1"

DEFAULT_REPLICATES = {
    "alc": 2000,
    "gamma": 7000,
    "calibrate-lambda": 7000,
    "oc": 7000,
    "power": 2000,
    "simulate": 7000,
}


class Run:
    """Resolved inputs shared by all table-writing subcommands."""

    def __init__(self, args, doc: dict):
        settings = parse_run(doc)
        self.command = args.command
        self.doc = doc
        self.out = Path(args.out)
        self.seed = entropy_seed() if args.entropy else (args.seed if args.seed is not None else settings.seed)
        self.flag_replicates = args.replicates
        self.run_replicates = settings.replicates
        self.replicates = args.replicates or settings.replicates or DEFAULT_REPLICATES.get(args.command)
        self.threads = args.threads if args.threads is not None else settings.threads
        self.draws = args.draws
        self.design = parse_design(doc)
        if self.draws:
            self.design = replace(self.design, sampler=replace(self.design.sampler, n_draws=self.draws))
        self.started = time.perf_counter()

    @property
    def digest(self) -> str:
        # threads are left out: results do not depend on them
        return input_digest(self.doc, self.command, self.seed, self.replicates, self.draws)

    def write_table(self, name: str, header: list[str], rows) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(["schema", "seed", "config_digest"] + header)
            for row in rows:
                w.writerow([TABLE_SCHEMA, self.seed, self.digest] + [_fmt(v) for v in row])
        return path

    def write_json(self, name: str, obj: dict) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        payload = {"schema": TABLE_SCHEMA, "seed": self.seed, "config_digest": self.digest, **obj}
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return path

    def finish(self) -> None:
        RunManifest(
            self.command, self.digest, self.seed, self.replicates,
            round(time.perf_counter() - self.started, 3), TOOL_VERSION, self.draws,
        ).write(self.out / "manifest.json")


def input_digest(doc: dict, command: str, seed: int, replicates, draws) -> str:
    """Content hash of everything that determines a run's outputs."""
    return digest({"config": doc, "command": command, "seed": seed, "replicates": replicates, "draws": draws})


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def cmd_alc(run: Run) -> None:
    cfg = parse_alc(run.doc)
    overrides = {}
    # flag, then alc.replicates, then run.replicates
    if run.flag_replicates:
        overrides["replicates"] = run.flag_replicates
    elif "replicates" not in run.doc["alc"] and run.run_replicates:
        overrides["replicates"] = run.run_replicates
    if run.draws:
        overrides["posterior_draws"] = run.draws
    cfg = replace(cfg, **overrides)
    run.replicates = cfg.replicates
    res = cal.alc_search(cfg, run.design.priors, run.seed, run.threads)
    run.write_table(
        "alc_table.csv",
        ["n", "r0", "avg_hpd_length", "mc_stderr"],
        [(r.n, r.r0, r.avg_hpd_length, r.mc_stderr) for r in res.rows],
    )
    run.write_json("alc_summary.json", {
        "zeta": cfg.zeta,
        "replicates": cfg.replicates,
        "posterior_draws": cfg.posterior_draws,
        "status": "selected" if res.selected else "no-qualifying-design",
        "selected_n": res.selected[0] if res.selected else None,
        "selected_r0": res.selected[1] if res.selected else None,
    })


def cmd_gamma(run: Run) -> None:
    scenario = parse_scenario(run.doc["scenario"], n_arms=run.design.n_arms) if "scenario" in run.doc else ketodex_scenario(0.93)
    res = cal.gamma_search(run.design, scenario, parse_gamma_grid(run.doc), run.replicates, run.seed, run.threads)
    run.write_table(
        "gamma_table.csv",
        ["gamma", "p_plurality", "mc_stderr", "mean_best_n", "best_n_q025", "best_n_q975", "replicates"],
        [(r.gamma, r.p_plurality, r.mc_stderr, r.mean_best_n, r.best_n_q025, r.best_n_q975, run.replicates) for r in res.rows],
    )
    run.write_json("gamma_summary.json", {"selected_gamma": res.selected, "best_arm": res.best_arm})


def cmd_calibrate(run: Run) -> None:
    sec = run.doc.get("lambda", {})
    p_c = float(sec.get("p_comparator", 0.97))
    l2_p = float(sec.get("lambda2_p_optimal", 0.78))
    l1 = cal.calibrate_lambda1(run.design, run.replicates, run.seed, run.threads, cal.null_scenario(run.design, p_c))
    l2 = cal.calibrate_lambda2(run.design, run.replicates, run.seed, run.threads, ketodex_scenario(l2_p, p_c, f"p_D={l2_p}"))
    type1 = float((l1.y_values <= l1.value).mean())
    p_sup = float((l2.y_values >= l2.value).mean())
    run.write_table(
        "lambda_table.csv",
        ["threshold", "value", "quantile", "scenario", "achieved_rate", "replicates"],
        [
            ("lambda1", l1.value, l1.quantile, l1.scenario.description, type1, run.replicates),
            ("lambda2", l2.value, l2.quantile, l2.scenario.description, p_sup, run.replicates),
        ],
    )
    run.write_table(
        "lambda_y.csv",
        ["replicate", "y_lambda1_scenario", "y_lambda2_scenario"],
        [(k, float(a), float(b)) for k, (a, b) in enumerate(zip(l1.y_values, l2.y_values))],
    )


def cmd_oc(run: Run) -> None:
    design_sec = run.doc.get("design", {})
    for key in ("lambda1", "lambda2"):
        if key not in design_sec:
            raise ConfigError(f"design: missing required field '{key}' (oc needs calibrated thresholds)")
    scenarios = parse_scenarios(run.doc, run.design.n_arms)
    rows = cal.operating_characteristics(run.design, scenarios, run.replicates, run.seed, run.threads)
    run.write_table(
        "oc_table.csv",
        ["scenario", "p_optimal", "p_noninferior", "se_noninferior", "p_inconclusive", "se_inconclusive",
         "p_superior", "se_superior", "p_noninferior_and_correct", "se_noninferior_and_correct", "replicates"],
        [
            (r.scenario, float(sc.adequate.max()), r.p_noninferior, r.se_noninferior, r.p_inconclusive,
             r.se_inconclusive, r.p_superior, r.se_superior, r.p_noninferior_and_correct,
             r.se_noninferior_and_correct, r.replicates)
            for r, sc in zip(rows, scenarios)
        ],
    )


def cmd_power(run: Run) -> None:
    rows = cal.predictive_power(run.design, parse_rr_scenarios(run.doc), run.replicates, run.seed, run.threads)
    run.write_table(
        "power_table.csv",
        ["scenario", "p_conclusive", "se_conclusive", "p_noninferior", "se_noninferior", "replicates"],
        [(r.scenario, r.p_conclusive, r.se_conclusive, r.p_noninferior, r.se_noninferior, r.replicates) for r in rows],
    )


def cmd_simulate(run: Run) -> None:
    if "scenario" not in run.doc:
        raise ConfigError("scenario: missing required section 'scenario'")
    scenario = parse_scenario(run.doc["scenario"], n_arms=run.design.n_arms)
    results = cal.simulate_many(run.design, scenario, run.replicates, run.seed, run.threads)
    k = run.design.n_arms
    run.write_table(
        "replicates.csv",
        ["replicate", "decision", "selected_arm", "y"] + [f"n_arm{i}" for i in range(k)] + ["n_comparator"],
        [
            (i, r.decision.value, r.selected_arm, r.y_stat, *r.final_counts.arm_totals,
             r.final_counts.comparator_successes + r.final_counts.comparator_failures)
            for i, r in enumerate(results)
        ],
    )
    row = cal.summarise_decisions(results, scenario, run.design.ni_margin)
    run.write_table(
        "summary.csv",
        ["scenario", "p_noninferior", "p_inconclusive", "p_superior", "p_noninferior_and_correct", "replicates"],
        [(row.scenario, row.p_noninferior, row.p_inconclusive, row.p_superior, row.p_noninferior_and_correct, row.replicates)],
    )


def cmd_interim(args, doc: dict) -> None:
    design, counts, period = parse_interim(doc)
    raw, post, dropped = interim_update(counts.as_array(), design.priors.interim_arm, design.drop_threshold)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    record = {
        "schema": TABLE_SCHEMA,
        "config_digest": digest(doc),
        "period": period,
        "next_period": period + 1,
        "raw_probs": [float(x) for x in raw],
        "post_drop_probs": [float(x) for x in post],
        "dropped_flags": list(dropped),
    }
    (out / "interim.json").write_text(json.dumps(record, indent=2) + "\n")


def cmd_validate(args, doc: dict) -> None:
    design = parse_design(doc)
    echo = design_to_dict(design)
    if "scenario" in doc:
        echo["scenario"] = scenario_to_dict(parse_scenario(doc["scenario"], n_arms=design.n_arms))
    if "alc" in doc:
        parse_alc(doc)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config_echo.json").write_text(json.dumps(echo, indent=2, sort_keys=True) + "\n")
    print(f"config OK: {design.n_arms} arms, N={design.schedule.total_n}, digest {digest(doc)[:12]}")


TABLE_COMMANDS = {
    "alc": cmd_alc,
    "gamma": cmd_gamma,
    "calibrate-lambda": cmd_calibrate,
    "oc": cmd_oc,
    "power": cmd_power,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="combitrial", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in [*TABLE_COMMANDS, "interim", "validate"]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config (interim: request file)")
        p.add_argument("--out", required=name != "validate", help="output directory")
        p.add_argument("--seed", type=int, help="root seed (default: run.seed or 20201)")
        p.add_argument("--entropy", action="store_true", help="seed from OS entropy")
        p.add_argument("--replicates", type=int)
        p.add_argument("--threads", type=int, help="worker processes (default: all cores)")
        p.add_argument("--draws", type=int, help="posterior draws per analysis")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = load_document(args.config)
        if args.command == "interim":
            cmd_interim(args, doc)
        elif args.command == "validate":
            cmd_validate(args, doc)
        else:
            run = Run(args, doc)
            TABLE_COMMANDS[args.command](run)
            run.finish()
    except (ConfigError, DesignError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SamplerError, SimplexViolation) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
