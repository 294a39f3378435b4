import json
import math
import time

import numpy as np
import pytest
from scipy.special import gamma

from fracerlang.errors import DomainError, InversionRefused
from fracerlang.harness import checks, oracles, stats
from fracerlang.mlfun import ml
from fracerlang.randvar import MLParams, RngStream, ml_cdf
from fracerlang.transient import QueueParams


def test_talbot_pairs():
    for t in (0.1, 1.0, 5.0):
        assert oracles.talbot_invert(lambda v: 1 / v, t) == pytest.approx(1.0, rel=1e-10)
        assert oracles.talbot_invert(lambda v: 1 / v ** 2, t) == pytest.approx(t, rel=1e-10)
        assert oracles.talbot_invert(lambda v: 1 / (v + 2), t) == pytest.approx(
            math.exp(-2 * t), rel=1e-9)
    lam, nu = 4.0, 0.75
    got = oracles.talbot_invert(lambda v: lam / (v * (lam + v ** nu)), 0.7)
    assert got == pytest.approx(ml_cdf(MLParams(nu, lam), 0.7), abs=1e-10)
    with pytest.raises(DomainError):
        oracles.talbot_invert(lambda v: 1 / v, 0.0)


def test_talbot_refuses_bad_transform():
    # exp(-v) inverts to a delta at t = 1, which the contour cannot resolve
    with pytest.raises(InversionRefused):
        oracles.talbot_invert(lambda v: np.exp(-v), 1.0)


def test_caputo_l1_closed_forms():
    nu, h = 0.75, 1e-3
    t = np.arange(0, 1001) * h
    assert oracles.caputo_l1(t, nu, 1000, h) == pytest.approx(1.0 / gamma(2 - nu), rel=1e-12)
    assert oracles.caputo_l1(np.full(1001, 3.0), nu, 1000, h) == 0.0
    f = np.array([ml(nu, -2.0 * s ** nu) for s in t])
    grid = oracles.caputo_l1_grid(f, nu, h)
    assert grid[500] == pytest.approx(oracles.caputo_l1(f, nu, 500, h), rel=1e-12)
    # eigenfunction relation, with the error shrinking under refinement
    err = abs(grid[1000] + 2.0 * f[1000])
    coarse = oracles.caputo_l1_grid(f[::4], nu, 4 * h)
    assert err < 1e-3 and err < abs(coarse[250] + 2.0 * f[1000])


def test_ode_oracle_self_checks():
    p = QueueParams(4.0, 5.0, 2, 1.0)
    probs, deficit = oracles.ode_oracle_classical(p, 0.0)
    assert probs[0] == 1.0 and probs[1:].sum() == 0.0
    probs, deficit = oracles.ode_oracle_classical(p, 1.0)
    assert deficit < 1e-6 and probs.sum() <= 1.0 + 1e-12
    assert probs.sum() + deficit == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(DomainError):
        oracles.ode_oracle_classical(QueueParams(4.0, 5.0, 2, 0.5), 1.0)


def test_riemann_liouville():
    # I^nu 1 = t^nu / Gamma(1 + nu)
    assert oracles.riemann_liouville(lambda s: 1.0, 0.75, 2.0) == pytest.approx(
        2 ** 0.75 / gamma(1.75), rel=1e-11)


def test_ks_calibration_identity_and_power():
    rng = np.random.default_rng(1)
    crit = stats.ks_critical(500)
    passes = sum(stats.ks_statistic(rng.random(500), lambda x: x) < crit for _ in range(100))
    assert passes >= 94
    a = rng.random(300)
    assert stats.ks_two_sample(a, a) == 0.0
    assert stats.ks_statistic(rng.random(2000) + 0.1, lambda x: np.clip(x, 0, 1)) \
        > stats.ks_critical(2000)
    b = rng.random(2000) + 0.1
    assert stats.ks_two_sample(rng.random(2000), b) > stats.ks_two_sample_critical(2000, 2000)


def test_summaries_and_chi_square():
    s = stats.summarize_mean([1.0, 2.0, 3.0])
    assert s.estimate == 2.0 and s.covers(2.0) and s.margin(2.0) == 0.0
    pr = stats.summarize_proportion(30, 100, p_ref=0.25)
    assert pr.std_error == pytest.approx(math.sqrt(0.25 * 0.75 / 100))
    x = np.random.default_rng(2).random(10000)
    edges = np.linspace(0, 1, 11)
    stat, pval = stats.chi_square_gof(x, edges, np.full(10, 0.1))
    assert pval > 0.01
    with pytest.raises(DomainError):
        stats.summarize_mean([1.0])


def test_mc_lengths_independent_of_workers(canonical):
    a = checks.mc_lengths(canonical, 0.5, 2000, seed=3, workers=1)
    b = checks.mc_lengths(canonical, 0.5, 2000, seed=3, workers=2)
    assert np.array_equal(a, b)


def test_fault_injection_flags_the_identity(canonical):
    only = ("nu1_reduction", "normalization", "laplace_consistency")
    clean = checks.validate_all(canonical, "fast", only=only)
    assert clean["passed"]
    with checks.corrupt_coefficient(2, 1, 1.01):
        bad = checks.validate_all(canonical, "fast", only=only)
    status = {c["check_id"]: c["status"] for c in bad["checks"]}
    assert status["nu1_reduction"] == "fail" and status["normalization"] == "fail"
    # the transform shares the corrupted coefficient, so the pair stays consistent
    assert status["laplace_consistency"] == "pass"
    assert not bad["passed"]
    again = checks.validate_all(canonical, "fast", only=("normalization",))
    assert again["passed"]


def test_classical_suite_passes():
    p = QueueParams(4.0, 5.0, 2, 1.0)
    report = checks.validate_all(p, "fast", only=("nu1_reduction", "ode_oracle", "normalization",
                                                  "mean_identity"))
    assert report["passed"], report


def test_report_structure_and_budget(monkeypatch, canonical):
    slow = checks.CHECKS["k1_reindexed"][0]

    def delayed(*args):
        time.sleep(0.05)
        return slow(*args)

    monkeypatch.setitem(checks.CHECKS, "k1_reindexed", (delayed, ("fast",)))
    report = checks.validate_all(canonical, "fast", time_budget=0.01,
                                 only=("normalization", "k1_reindexed"))
    doc = json.loads(checks.report_json(report))
    assert doc["params"]["k"] == 2 and doc["suite"] == "fast"
    first, second = doc["checks"]
    assert first["check_id"] == "k1_reindexed"
    assert first["status"] == "pass" and first["margin"] > 0
    assert second["status"] == "skipped" and second["margin"] is None
    assert set(first) == {"check_id", "status", "margin", "budget_used", "oracle", "measured",
                          "tolerance", "detail"}


def test_failing_check_reports_error(monkeypatch, canonical):
    def boom(*args):
        raise ArithmeticError("broken")
    monkeypatch.setitem(checks.CHECKS, "normalization", (boom, ("fast",)))
    report = checks.validate_all(canonical, "fast", only=("normalization",))
    assert report["checks"][0]["status"] == "error" and not report["passed"]
