"""Shared fixtures: preset runs are simulated once per session. The
acceptance lines recorded by test_acceptance.py are printed at the end."""

import sys
import time

import pytest

from lff3d import logio
from lff3d.config import load_preset
from lff3d.sim import run_scenario

_START = time.monotonic()


def _run(name, **overrides):
    cfg = load_preset(name, **overrides)
    log = run_scenario(cfg)
    return cfg, log, logio.log_table(log)


@pytest.fixture(scope="session")
def session_start():
    return _START


@pytest.fixture(scope="session")
def three_stage():
    return _run("three_stage")


@pytest.fixture(scope="session")
def abrupt():
    return _run("abrupt")


@pytest.fixture(scope="session")
def hold():
    return _run("hold")


@pytest.fixture(scope="session")
def lemniscate():
    return _run("lemniscate")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    elapsed = time.monotonic() - _START
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
    tag = "PASS" if elapsed <= 120.0 else "FAIL"
    terminalreporter.write_line(f"{tag} full suite wall time {elapsed:.1f}s (<=120)")
