"""Acceptance criteria at their stated tolerances and runtime limits.

Each test prints one ``PASS``/``FAIL`` line, and the lines are repeated in the
terminal summary.  Parameters are the figure configuration k=2, lam=4, mu=5,
nu=0.75.  Monte Carlo runs use one worker: the sandbox has a single CPU.
"""
import math
import time

import pytest

from conftest import ACCEPTANCE_LINES
from fracerlang.harness import checks
from fracerlang.transient import QueueParams

PARAMS = QueueParams(4.0, 5.0, 2, 0.75)
SEED = 20240601
WORKERS = 1

pytestmark = pytest.mark.slow


def _run(number, title, check_fns, limit):
    started = time.perf_counter()
    results = [fn(PARAMS, checks.FULL, SEED, WORKERS) for fn in check_fns]
    elapsed = time.perf_counter() - started
    ok = all(r.status == "pass" for r in results) and elapsed < limit
    detail = "; ".join(f"{r.check_id}: measured {r.measured:.3g} vs tol {r.tolerance:.3g}"
                       f" (margin {r.margin:+.3f})" for r in results)
    line = (f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2} {title}: {detail}; "
            f"{elapsed:.1f}s of {limit:.0f}s")
    ACCEPTANCE_LINES[number] = line
    print(line)
    for r in results:
        assert r.status == "pass", f"{r.check_id}: {r.detail}"
    assert elapsed < limit, f"runtime {elapsed:.1f}s exceeds {limit}s"


def test_criterion_01_nu_one_reduction():
    _run(1, "nu=1 reduction", [checks.check_nu1_reduction], 30)


def test_criterion_02_k_one_reduction():
    _run(2, "k=1 reduction", [checks.check_k1_reindexed], 10)


def test_criterion_03_laplace_consistency():
    _run(3, "Laplace consistency", [checks.check_laplace], 120)


def test_criterion_04_kolmogorov_residual():
    _run(4, "Kolmogorov residual", [checks.check_caputo_residual], 120)


def test_criterion_05_monte_carlo_states():
    _run(5, "Monte Carlo state probabilities", [checks.check_mc_states], 300)


def test_criterion_06_distributional_laws():
    _run(6, "interarrival, inter-phase and sojourn laws", [checks.check_sojourn_laws], 180)


def test_criterion_07_mean_identity():
    _run(7, "mean identity", [checks.check_mean_identity, checks.check_mc_mean], 180)


def test_criterion_08_busy_period():
    _run(8, "busy period", [checks.check_busy_period], 300)


def test_criterion_09_simulator_equivalence():
    _run(9, "simulator equivalence", [checks.check_simulator_equivalence], 300)


def test_criterion_10_waiting_time():
    _run(10, "waiting-time consistency", [checks.check_waiting], 180)


def test_criterion_11_normalization():
    _run(11, "normalization", [checks.check_normalization], 120)
