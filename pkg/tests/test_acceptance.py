"""Full-scale acceptance criteria; each test prints one PASS/FAIL line."""

import time

import pytest

from pibsched.harness.acceptance import (
    check_accounting,
    check_constraint_soundness,
    check_determinism,
    check_fusion_trend,
    check_gradients,
    check_lower_bound,
    check_regret,
    check_server_trend,
    check_ucb_vs_stochastic,
    check_upper_bound,
    determinism_configs,
    latency_table,
)

pytestmark = pytest.mark.slow


@pytest.fixture
def report(capsys):
    def emit(fn, *args):
        t0 = time.perf_counter()
        res = fn(*args)
        res.runtime_s += time.perf_counter() - t0
        with capsys.disabled():
            print("\n" + res.line())
        assert res.passed, res.line()
    return emit


@pytest.fixture(scope="module")
def latencies():
    return latency_table(seeds=20, horizon=10_000)


def test_criterion_1_lower_bound(report):
    report(check_lower_bound, 1000)


def test_criterion_2_upper_bound(report):
    report(check_upper_bound, 1000)


def test_criterion_3_gradients(report):
    report(check_gradients, 100)


def test_criterion_4_regret_growth(report):
    report(check_regret, 10, 100_000)


def test_criterion_5_constraint_soundness(report):
    report(check_constraint_soundness, 10_000)


def test_criterion_6_fusion_trend(report):
    report(check_fusion_trend, 500)


def test_criterion_7_ucb_vs_stochastic(report, latencies):
    report(check_ucb_vs_stochastic, latencies)


def test_criterion_8_server_trend(report, latencies):
    report(check_server_trend, latencies)


def test_criterion_9_accounting(report):
    report(check_accounting, 500, tuple(2 ** k for k in range(6, 14)))


def test_criterion_10_determinism(report):
    report(check_determinism, determinism_configs(1))
