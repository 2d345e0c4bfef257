"""JSON configuration documents and run manifests.

A config is one JSON object with optional sections ``design``, ``schedule``,
``priors``, ``sampler``, ``scenario``, ``scenarios``, ``rr_scenarios``,
``alc``, ``gamma`` and ``run``. Omitted sections fall back to the reference
design. See ``docs/config.md`` for the full schema.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

from .calibration import GAMMA_GRID, AlcConfig
from .model import (
    KETODEX_DOSES,
    ArmTruth,
    BetaPrior,
    CoefficientPrior,
    DesignError,
    DoseCombination,
    InterimSchedule,
    OutcomeTable,
    PriorSet,
    RrScenario,
    SamplerConfig,
    Scenario,
    TrialDesign,
    default_design,
    default_priors,
    ketodex_scenario,
    table1_scenarios,
    table2_scenarios,
    validate_design,
)
from .rng import DEFAULT_SEED

CONFIG_SCHEMA = "combitrial-config/1"
TOOL_VERSION = "0.1.0"


class ConfigError(ValueError):
    """A config document is malformed; the message names the offending field."""


def load_document(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return doc


def digest(doc: Any) -> str:
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _get(section: dict, key: str, where: str, kind=float, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError(f"{where}: missing required field '{key}'")
        return default
    value = section[key]
    try:
        if kind is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind is int and (isinstance(value, bool) or float(value) != int(value)):
            raise TypeError
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key}: expected {kind.__name__}, got {value!r}") from None


def _section(doc: dict, name: str) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"{name}: expected an object")
    return sec


def _wrap(where: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (DesignError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from None


def parse_priors(sec: dict) -> PriorSet:
    base = default_priors()
    if not sec:
        return base
    fields = {}
    for name, value in asdict(base).items():
        where = f"priors.{name}"
        if name not in sec:
            fields[name] = getattr(base, name)
            continue
        item = sec[name]
        if not isinstance(item, dict):
            raise ConfigError(f"{where}: expected an object")
        if "alpha" in value:
            fields[name] = _wrap(where, BetaPrior, _get(item, "alpha", where, required=True), _get(item, "beta", where, required=True))
        else:
            fields[name] = _wrap(
                where,
                CoefficientPrior,
                _get(item, "location", where, required=True),
                _get(item, "scale", where, required=True),
                _get(item, "degrees_of_freedom", where, default=1.0),
            )
    return PriorSet(**fields)


def parse_sampler(sec: dict) -> SamplerConfig:
    base = SamplerConfig()
    kw = {}
    for name, value in asdict(base).items():
        kind = type(value)
        kw[name] = _get(sec, name, "sampler", kind=kind, default=value)
    return _wrap("sampler", SamplerConfig, **kw)


def parse_design(doc: dict) -> TrialDesign:
    sec = _section(doc, "design")
    sch = _section(doc, "schedule")
    base = default_design()
    if "doses" in sec:
        doses = []
        for i, d in enumerate(sec["doses"]):
            where = f"design.doses[{i}]"
            if not isinstance(d, dict):
                raise ConfigError(f"{where}: expected an object")
            doses.append(_wrap(where, DoseCombination, _get(d, "ketamine", where, required=True),
                               _get(d, "dexmedetomidine", where, required=True), str(d.get("label", ""))))
    else:
        doses = list(KETODEX_DOSES)
    points = sch.get("analysis_points", list(base.schedule.analysis_points))
    if not isinstance(points, list):
        raise ConfigError("schedule.analysis_points: expected a list")
    schedule = _wrap("schedule", InterimSchedule, tuple(points), _get(sch, "total_n", "schedule", int, base.schedule.total_n))
    design = TrialDesign(
        doses=tuple(doses),
        comparator_fraction=_get(sec, "comparator_fraction", "design", default=base.comparator_fraction),
        drop_threshold=_get(sec, "drop_threshold", "design", default=base.drop_threshold),
        ni_margin=_get(sec, "ni_margin", "design", default=base.ni_margin),
        lambda1=_get(sec, "lambda1", "design", default=base.lambda1),
        lambda2=_get(sec, "lambda2", "design", default=base.lambda2),
        schedule=schedule,
        priors=parse_priors(_section(doc, "priors")),
        sampler=parse_sampler(_section(doc, "sampler")),
    )
    return _wrap("design", validate_design, design)


def parse_scenario(item: dict, where: str = "scenario", n_arms: int = 3) -> Scenario:
    if not isinstance(item, dict):
        raise ConfigError(f"{where}: expected an object")
    p_c = _get(item, "p_comparator", where, default=0.97)
    desc = str(item.get("description", ""))
    if "p_optimal" in item:
        return _wrap(where, ketodex_scenario, _get(item, "p_optimal", where), p_c, desc)
    if "arm_truths" in item:
        truths = [_wrap(f"{where}.arm_truths[{i}]", ArmTruth, *map(float, t)) for i, t in enumerate(item["arm_truths"])]
    elif "adequate" in item:
        fracs = item.get("over_fractions")
        if fracs is None:
            raise ConfigError(f"{where}: missing required field 'over_fractions'")
        truths = [_wrap(where, ArmTruth.from_adequate, float(a), float(f)) for a, f in zip(item["adequate"], fracs)]
    else:
        raise ConfigError(f"{where}: needs one of 'p_optimal', 'arm_truths' or 'adequate'")
    if len(truths) != n_arms:
        raise ConfigError(f"{where}: {len(truths)} arm truths for {n_arms} doses")
    return _wrap(where, Scenario, tuple(truths), p_c, desc)


def parse_scenarios(doc: dict, n_arms: int) -> list[Scenario]:
    if "scenarios" not in doc:
        return table1_scenarios()
    items = doc["scenarios"]
    if not isinstance(items, list) or not items:
        raise ConfigError("scenarios: expected a non-empty list")
    return [parse_scenario(s, f"scenarios[{i}]", n_arms) for i, s in enumerate(items)]


def parse_rr_scenarios(doc: dict) -> list[RrScenario]:
    if "rr_scenarios" not in doc:
        return table2_scenarios()
    out = []
    for i, item in enumerate(doc["rr_scenarios"]):
        where = f"rr_scenarios[{i}]"
        if not isinstance(item, dict):
            raise ConfigError(f"{where}: expected an object")
        for key in ("relative_risks", "over_fractions"):
            if key not in item:
                raise ConfigError(f"{where}: missing required field '{key}'")
        out.append(_wrap(where, RrScenario, tuple(item["relative_risks"]), tuple(item["over_fractions"]), str(item.get("name", i))))
    return out


def parse_alc(doc: dict) -> AlcConfig:
    if "alc" not in doc:
        raise ConfigError("alc: missing required section 'alc'")
    sec = _section(doc, "alc")
    base = AlcConfig()
    return _wrap(
        "alc",
        AlcConfig,
        zeta=_get(sec, "zeta", "alc", required=True),
        n_grid=tuple(sec.get("n_grid", base.n_grid)),
        r0_grid=tuple(sec.get("r0_grid", base.r0_grid)),
        replicates=_get(sec, "replicates", "alc", int, base.replicates),
        posterior_draws=_get(sec, "posterior_draws", "alc", int, base.posterior_draws),
        mass=_get(sec, "mass", "alc", default=base.mass),
        novel_share=_get(sec, "novel_share", "alc", default=base.novel_share),
    )


def parse_gamma_grid(doc: dict) -> tuple[float, ...]:
    grid = _section(doc, "gamma").get("grid", list(GAMMA_GRID))
    if not isinstance(grid, list) or not grid:
        raise ConfigError("gamma.grid: expected a non-empty list")
    return tuple(float(g) for g in grid)


@dataclass(frozen=True)
class RunSettings:
    seed: int = DEFAULT_SEED
    replicates: int | None = None
    threads: int | None = None


def parse_run(doc: dict) -> RunSettings:
    sec = _section(doc, "run")
    seed = _get(sec, "seed", "run", int, DEFAULT_SEED)
    if not 0 <= seed < 2**64:
        raise ConfigError("run.seed: must be a 64-bit unsigned integer")
    return RunSettings(seed, _get(sec, "replicates", "run", int), _get(sec, "threads", "run", int))


def parse_interim(doc: dict) -> tuple[TrialDesign, OutcomeTable, int]:
    """An interim request: a design, accumulated counts and the period just finished."""
    design = parse_design(doc)
    counts = doc.get("counts")
    if not isinstance(counts, dict) or "arms" not in counts:
        raise ConfigError("counts: missing required field 'arms'")
    arms = counts["arms"]
    if not isinstance(arms, list) or len(arms) != design.n_arms:
        raise ConfigError(f"counts.arms: expected {design.n_arms} (under, adequate, over) triples")
    for i, row in enumerate(arms):
        if not (isinstance(row, list) and len(row) == 3 and all(isinstance(c, int) and not isinstance(c, bool) and c >= 0 for c in row)):
            raise ConfigError(f"counts.arms[{i}]: expected three non-negative integers")
    comp = counts.get("comparator", [0, 0])
    if not (isinstance(comp, list) and len(comp) == 2 and all(isinstance(c, int) and c >= 0 for c in comp)):
        raise ConfigError("counts.comparator: expected [successes, failures]")
    period = _get(doc, "period", "request", int, 1)
    if period < 1:
        raise ConfigError("request.period: must be at least 1")
    return design, OutcomeTable(tuple(map(tuple, arms)), comp[0], comp[1]), period


def design_to_dict(design: TrialDesign) -> dict:
    """Inverse of :func:`parse_design`: the design, schedule, priors and sampler sections."""
    return {
        "design": {
            "doses": [
                {"label": d.label, "ketamine": d.ketamine_dose, "dexmedetomidine": d.dexmedetomidine_dose}
                for d in design.doses
            ],
            "comparator_fraction": design.comparator_fraction,
            "drop_threshold": design.drop_threshold,
            "ni_margin": design.ni_margin,
            "lambda1": design.lambda1,
            "lambda2": design.lambda2,
        },
        "schedule": {
            "analysis_points": list(design.schedule.analysis_points),
            "total_n": design.schedule.total_n,
        },
        "priors": asdict(design.priors),
        "sampler": asdict(design.sampler),
    }


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "arm_truths": [[t.p_under, t.p_adequate, t.p_over] for t in scenario.arm_truths],
        "p_comparator": scenario.p_comparator,
        "description": scenario.description,
    }


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_digest: str
    root_seed: int
    replicates: int | None
    wall_clock_seconds: float
    tool_version: str = TOOL_VERSION
    draws: int | None = None

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2) + "\n")
