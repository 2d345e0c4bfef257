import json

import pytest

TINY = {
    "design": {"lambda1": 0.037, "lambda2": 0.608},
    "sampler": {"n_draws": 200, "n_burnin": 400},
    "scenario": {"p_optimal": 0.9, "description": "scenario 2"},
    "scenarios": [{"p_optimal": 0.93}, {"p_optimal": 0.78}],
    "rr_scenarios": [{"name": "A", "relative_risks": [0.95, 1.0, 0.9], "over_fractions": [0.2, 0.1, 0.01]}],
    "alc": {"zeta": 0.07, "n_grid": [350, 400], "replicates": 20, "posterior_draws": 200},
    "gamma": {"grid": [0.05, 0.1]},
    "run": {"seed": 7, "replicates": 6},
}

INTERIM = {"period": 1, "counts": {"arms": [[0, 0, 0]] * 3, "comparator": [0, 0]}}


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return path


@pytest.fixture
def tiny_config(tmp_path):
    return write_json(tmp_path / "tiny.json", TINY)


@pytest.fixture
def interim_request(tmp_path):
    return write_json(tmp_path / "interim.json", INTERIM)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
