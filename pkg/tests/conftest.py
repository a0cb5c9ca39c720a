import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import pgnc  # noqa: F401  (enables float64 before anything is traced)
from pgnc.gradients import Problem

settings.register_profile(
    "default",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# criterion number -> (name, passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record_acceptance(number, name, passed, detail):
    ACCEPTANCE[number] = (name, bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"AC{n:>2} {'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture(scope="session")
def problem():
    return Problem()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# --- long training runs, shared across test modules --------------------------

_TRAINED = {}


def trained_pgnc(seed):
    from pgnc.trainers import TrainConfig, train_pgnc

    if ("pgnc", seed) not in _TRAINED:
        _TRAINED[("pgnc", seed)] = train_pgnc(TrainConfig(seed=seed), Problem())
    return _TRAINED[("pgnc", seed)]


def trained_grape_c0():
    from pgnc.config import load_config
    from pgnc.crosstalk import NOMINAL
    from pgnc.trainers import train_grape

    if "grape" not in _TRAINED:
        cfg = load_config("default")
        _TRAINED["grape"] = train_grape(cfg.grape.train, NOMINAL, cfg.problem, init_scale=cfg.grape.init_scale)
    return _TRAINED["grape"]
