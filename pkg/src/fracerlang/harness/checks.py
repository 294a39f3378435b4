"""Registry of consistency checks with measured margins.

Every check returns a :class:`CheckResult`; ``measured`` and ``tolerance``
are in the units of the check, and ``margin = 1 - measured / tolerance`` is
positive exactly when the check passes.  The ``fast`` budget shrinks sample
sizes and grids; ``full`` uses the acceptance sizes.
"""
from __future__ import annotations

import contextlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize
from scipy.stats import chi2 as chi2_law

from .. import metrics, randvar, sim, transient
from ..randvar import RngStream
from ..transient import QueueParams, state_of_m
from . import oracles, stats

__all__ = [
    "Budget",
    "FAST",
    "FULL",
    "CheckResult",
    "CHECKS",
    "validate_all",
    "corrupt_coefficient",
    "report_json",
]


@dataclass(frozen=True)
class Budget:
    """Sample sizes and grids used by the checks."""

    name: str
    reduction_ks: tuple = (2,)
    reduction_states: int = 3
    laplace_times: tuple = (0.1, 1.0, 2.0)
    laplace_states: int = 6
    caputo_step: float = 1e-3
    caputo_tmax: float = 0.3
    caputo_states: int = 10
    mc_paths: int = 20000
    law_samples: int = 10000
    busy_cycles: int = 20000
    busy_tmax: float = 1000.0
    equivalence_paths: int = 2000
    mean_times: tuple = (0.5, 1.0)
    wait_draws: int = 20000
    wait_cases: tuple = ((3, 0.2),)


FAST = Budget("fast")
FULL = Budget(
    "full",
    reduction_ks=(1, 2, 3),
    reduction_states=6,
    laplace_times=tuple(np.round(np.linspace(0.1, 2.0, 8), 12)),
    caputo_tmax=1.0,
    mc_paths=100000,
    law_samples=20000,
    busy_cycles=100000,
    equivalence_paths=10000,
    mean_times=(0.1, 0.5, 1.0, 1.5, 2.0),
    wait_draws=100000,
    wait_cases=((1, 0.2), (3, 0.2), (3, 0.5)),
)


@dataclass
class CheckResult:
    check_id: str
    status: str
    margin: float
    budget_used: float
    oracle: str
    measured: float = math.nan
    tolerance: float = math.nan
    detail: str = ""


def _result(check_id, measured, tolerance, oracle, started, detail=""):
    ok = bool(measured <= tolerance)
    return CheckResult(check_id, "pass" if ok else "fail", float(1.0 - measured / tolerance),
                       time.perf_counter() - started, oracle, float(measured),
                       float(tolerance), detail)


# ---------------------------------------------------------------------------
# parallel Monte Carlo: fixed chunks with their own stream ids, so results do
# not depend on the number of workers

_CHUNKS = 10


def _map(fn, jobs, workers):
    if workers <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def _lengths_chunk(params, t, paths, seed, stream):
    return sim.simulate_lengths_at(params, t, paths, RngStream(seed, stream))


def mc_lengths(params, t, paths, seed, workers=1, stream0=0):
    sizes = [paths // _CHUNKS + (i < paths % _CHUNKS) for i in range(_CHUNKS)]
    jobs = [(params, t, n, seed, stream0 + i) for i, n in enumerate(sizes) if n]
    return np.concatenate(_map(_lengths_chunk, jobs, workers))


# ---------------------------------------------------------------------------
# analytic checks


def check_nu1_reduction(params, budget, seed=0, workers=1):
    """Fractional series at ``nu = 1`` against the classical Bessel form."""
    started = time.perf_counter()
    worst = 0.0
    for k in budget.reduction_ks:
        p = QueueParams(params.lam, params.mu, k, 1.0)
        for t in (0.1, 0.5, 1.0, 2.0):
            worst = max(worst, abs(transient.frac_p0(p, t) - transient.classical_p0(p, t)))
            for m in range(1, budget.reduction_states + 1):
                st = state_of_m(m, k)
                worst = max(worst, abs(transient.frac_pns(p, st, t)
                                       - transient.classical_pns(p, st, t)))
    return _result("nu1_reduction", worst, 1e-8, "classical Bessel series", started)


def check_ode_oracle(params, budget, seed=0, workers=1):
    """Classical state probabilities against the forward-equation ODE solution."""
    started = time.perf_counter()
    p = params.classical()
    worst = 0.0
    for t in (0.5, 1.0):
        ode, _ = oracles.ode_oracle_classical(p, t)
        series = transient.state_probabilities(p, t, max_phase=min(ode.size - 1, 40))
        worst = max(worst, float(np.max(np.abs(series - ode[:series.size]))))
    return _result("ode_oracle", worst, 1e-8, "ODE forward equations", started)


def check_k1_reindexed(params, budget, seed=0, workers=1):
    """``k = 1`` series against the fractional M/M/1 series in its own ordering."""
    started = time.perf_counter()
    p = QueueParams(params.lam, params.mu, 1, params.nu)
    worst = max(abs(transient.frac_p0(p, t) - transient.mm1_p0_reindexed(p, t))
                for t in (0.1, 0.5, 1.0, 2.0))
    return _result("k1_reindexed", worst, 1e-8, "re-indexed M/M/1 series", started)


def check_laplace(params, budget, seed=0, workers=1):
    """Talbot inversion of every transform against the time-domain series."""
    started = time.perf_counter()
    p = params
    pairs = [(lambda v: transient.laplace_pi0(p, v), lambda t: transient.frac_p0(p, t))]
    for m in range(1, budget.laplace_states + 1):
        st = state_of_m(m, p.k)
        pairs.append((lambda v, st=st: transient.laplace_pins(p, st, v),
                      lambda t, st=st: transient.frac_pns(p, st, t)))
    pairs.append((lambda v: metrics.mean_queue_length_laplace(p, v),
                  lambda t: metrics.mean_queue_length(p, t)))
    pairs.append((lambda v: metrics.busy_period_laplace(p, v),
                  lambda t: metrics.busy_period_cdf(p, t)))
    worst = 0.0
    for lt, ft in pairs:
        for t in budget.laplace_times:
            ref = ft(t)
            worst = max(worst, abs(oracles.talbot_invert(lt, t) - ref) / abs(ref))
    return _result("laplace_consistency", worst, 1e-5, "Talbot inversion", started)


def check_caputo_residual(params, budget, seed=0, workers=1):
    """L1 Caputo derivative of ``P_m`` minus the right side of the forward system."""
    started = time.perf_counter()
    p, h = params, budget.caputo_step
    top = budget.caputo_states
    grid = np.arange(int(round(budget.caputo_tmax / h)) + 1) * h
    probs = np.array([transient.state_probabilities(p, t, max_phase=top + 1) for t in grid])
    deriv = oracles.caputo_l1_grid(probs, p.nu, h)
    lam, kmu, k = p.lam, p.phase_rate, p.k
    sel = grid >= 0.1 - 1e-12
    worst = 0.0
    for m in range(top + 1):
        rhs = -(lam + (kmu if m > 0 else 0.0)) * probs[:, m] + kmu * probs[:, m + 1]
        if m >= k:
            rhs = rhs + lam * probs[:, m - k]
        worst = max(worst, float(np.max(np.abs(deriv[sel, m] - rhs[sel]))))
    return _result("caputo_residual", worst, 1e-3, "L1 Caputo scheme", started,
                   f"step {h}, t in [0.1, {budget.caputo_tmax}]")


def check_normalization(params, budget, seed=0, workers=1):
    """Truncated total probability at ``t = 0.5`` and ``t = 1``."""
    started = time.perf_counter()
    worst = max(abs(float(np.sum(transient.state_probabilities(params, t))) - 1.0)
                for t in (0.5, 1.0))
    return _result("normalization", worst, 1e-4, "probability conservation", started)


def check_mean_identity(params, budget, seed=0, workers=1):
    """Mean series against drift plus quadrature of the fractional integral of ``p0``."""
    started = time.perf_counter()
    worst = max(abs(metrics.mean_queue_length(params, t)
                    - metrics.mean_queue_length_integral(params, t))
                for t in budget.mean_times)
    return _result("mean_identity", worst, 1e-6, "Riemann-Liouville quadrature", started)


# ---------------------------------------------------------------------------
# Monte Carlo checks


def check_mc_states(params, budget, seed=0, workers=1):
    """Empirical ``P(queue length = j)`` at ``t = 1`` in units of binomial standard errors."""
    started = time.perf_counter()
    m = mc_lengths(params, 1.0, budget.mc_paths, seed, workers, stream0=100)
    probs = transient.state_probabilities(params, 1.0)
    worst = 0.0
    for j in range(4):
        summary = stats.summarize_proportion(int(np.sum(m == j)), m.size, probs[j])
        worst = max(worst, abs(summary.estimate - probs[j]) / summary.std_error)
    return _result("mc_state_probabilities", worst, 3.0, "Gillespie Monte Carlo", started,
                   f"{m.size} paths")


def check_mc_mean(params, budget, seed=0, workers=1):
    """Monte Carlo mean queue length at ``t = 1`` in standard errors."""
    started = time.perf_counter()
    m = mc_lengths(params, 1.0, budget.mc_paths, seed, workers, stream0=200)
    summary = stats.summarize_mean(m)
    z = abs(summary.estimate - metrics.mean_queue_length(params, 1.0)) / summary.std_error
    return _result("mc_mean", z, 3.0, "Gillespie Monte Carlo", started, f"{m.size} paths")


def _long_path(params, seed, stream, events):
    return sim.simulate_gillespie(sim.SimConfig(params, RngStream(seed, stream),
                                                max_events=events))


def check_sojourn_laws(params, budget, seed=0, workers=1):
    """Pooled interarrival, inter-phase and sojourn samples against Mittag-Leffler laws (KS 5%)."""
    started = time.perf_counter()
    n = budget.law_samples
    path = _long_path(params, seed, 300, 6 * n)
    samples = {
        "interarrival": (sim.extract_interarrivals(path), params.lam),
        "interphase": (sim.extract_interphase(path), params.phase_rate),
        "sojourn": (sim.extract_sojourns(path, "busy"), params.total_rate),
    }
    worst, parts = 0.0, []
    for name, (x, rate) in samples.items():
        if x.size < n:
            raise RuntimeError(f"only {x.size} {name} samples")
        law = randvar.MLParams(params.nu, rate)
        d = stats.ks_statistic(x[:n], lambda y, law=law: randvar.ml_cdf(law, y))
        ratio = d / stats.ks_critical(n, 0.05)
        parts.append(f"{name} D={d:.4g}")
        worst = max(worst, ratio)
    return _result("sojourn_laws", worst, 1.0, "KS against Mittag-Leffler CDF", started,
                   ", ".join(parts) + f", n={n}")


def busy_ks(params, samples, t_max):
    """KS distance of busy-period samples to the analytic CDF.

    Exact over samples up to ``t_max``; beyond it the distance is bounded by
    ``max(1 - F_emp(t_max), 1 - F(t_max))``, which covers the heavy tail.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    inside = x[x <= t_max]
    f = metrics.busy_period_cdf_array(params, np.append(inside, t_max))
    f_in, f_max = f[:-1], f[-1]
    i = np.arange(1, inside.size + 1)
    d_in = float(max(np.max(i / n - f_in), np.max(f_in - (i - 1) / n))) if inside.size else 0.0
    return max(d_in, 1.0 - inside.size / n, 1.0 - float(f_max))


def check_busy_period(params, budget, seed=0, workers=1):
    """Simulated busy cycles against the busy-period CDF; classical series against quadrature."""
    started = time.perf_counter()
    need = budget.busy_cycles
    cycles, stream = [], 400
    while sum(c.size for c in cycles) < need:
        path = _long_path(params, seed, stream, 20 * need)
        cycles.append(sim.extract_busy_periods(path))
        stream += 1
    x = np.concatenate(cycles)[:need]
    d = busy_ks(params, x, budget.busy_tmax)
    ks_ratio = d / stats.ks_critical(need, 0.05)
    p1 = params.classical()
    gap = max(abs(metrics.busy_period_cdf(p1, t) - metrics.classical_busy_period_cdf(p1, t))
              for t in (0.1, 0.5, 1.0, 2.0, 5.0))
    measured = max(ks_ratio, gap / 1e-6)
    return _result("busy_period", measured, 1.0, "simulated busy cycles; quadrature", started,
                   f"KS D={d:.4g} over {need} cycles, classical gap {gap:.2e}")


def _final_customers(params, seed, stream0, count, method):
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        cfg = sim.SimConfig(params, RngStream(seed, stream0 + i), horizon=1.0)
        path = sim.simulate_gillespie(cfg) if method == "gillespie" else \
            sim.simulate_subordinated(cfg)
        out[i] = path.n[-1]
    return out


def check_simulator_equivalence(params, budget, seed=0, workers=1):
    """Two-sample KS between customers at ``t = 1`` from both generators (1% level)."""
    started = time.perf_counter()
    n = budget.equivalence_paths
    a = _final_customers(params, seed, 10 ** 6, n, "gillespie")
    b = _final_customers(params, seed, 2 * 10 ** 6, n, "subordinated")
    d = stats.ks_two_sample(a, b)
    return _result("simulator_equivalence", d / stats.ks_two_sample_critical(n, n, 0.01), 1.0,
                   "two-sample KS", started, f"D={d:.4g}, n={n}")


def waiting_bins(ctx, params, bins=20):
    """Equiprobable edges under the conditional CDF and bin masses from the density."""
    qs = np.arange(1, bins) / bins
    edges = []
    lo = 0.0
    for q in qs:
        hi = max(lo, 1e-3)
        while metrics.waiting_cdf_conditional(ctx, params, hi) < q:
            hi *= 2.0
        lo = optimize.brentq(lambda x: metrics.waiting_cdf_conditional(ctx, params, x) - q,
                             lo, hi, xtol=1e-12, rtol=1e-10)
        edges.append(lo)
    cum = [metrics.waiting_integral(ctx, params, upper=e)[0] for e in edges]
    probs = np.diff(np.concatenate(([0.0], cum, [1.0])))
    return np.concatenate(([0.0], edges, [np.inf])), probs


def check_waiting(params, budget, seed=0, workers=1):
    """Density mass within ``1e-3`` of one and a chi-square match with sampled waits."""
    started = time.perf_counter()
    worst, parts = 0.0, []
    kmu = params.phase_rate
    for i, (n, elapsed) in enumerate(budget.wait_cases):
        ctx = metrics.WaitContext(1.0, 1.0 - elapsed, n)
        mass, _ = metrics.waiting_mass(ctx, params)
        rng = RngStream(seed, 500 + i)
        draws = randvar.sample_rml(randvar.RMLParams(params.nu, kmu, elapsed), rng,
                                   budget.wait_draws)
        if n > 1:
            draws = draws + randvar.sample_ge(params.nu, n - 1, kmu, rng, budget.wait_draws)
        edges, probs = waiting_bins(ctx, params)
        counts = np.histogram(draws, bins=edges)[0]
        expected = draws.size * probs
        chi2 = float(np.sum((counts - expected) ** 2 / expected))
        pval = float(chi2_law.sf(chi2, probs.size - 1))
        parts.append(f"(n={n}, t-t0={elapsed}): mass {mass:.6f}, chi2 p={pval:.3f}")
        worst = max(worst, abs(mass - 1.0) / 1e-3, 0.05 / max(pval, 1e-300))
    return _result("waiting_consistency", worst, 1.0, "quadrature; sampled waits", started,
                   "; ".join(parts))


CHECKS = {
    "nu1_reduction": (check_nu1_reduction, ("fast", "full")),
    "ode_oracle": (check_ode_oracle, ("fast", "full")),
    "k1_reindexed": (check_k1_reindexed, ("fast", "full")),
    "laplace_consistency": (check_laplace, ("fast", "full")),
    "caputo_residual": (check_caputo_residual, ("fast", "full")),
    "normalization": (check_normalization, ("fast", "full")),
    "mean_identity": (check_mean_identity, ("fast", "full")),
    "mc_state_probabilities": (check_mc_states, ("fast", "full")),
    "mc_mean": (check_mc_mean, ("fast", "full")),
    "sojourn_laws": (check_sojourn_laws, ("fast", "full")),
    "busy_period": (check_busy_period, ("fast", "full")),
    "simulator_equivalence": (check_simulator_equivalence, ("fast", "full")),
    "waiting_consistency": (check_waiting, ("fast", "full")),
}


def validate_all(params: QueueParams, suite="fast", time_budget=None, seed=20240601,
                 workers=1, only=None):
    """Run the registered checks and return a report dictionary.

    Checks that raise are reported with status ``error``; once ``time_budget``
    seconds are spent the remaining checks are ``skipped``.
    """
    budget = FAST if suite == "fast" else FULL
    started = time.perf_counter()
    results = []
    for check_id, (fn, suites) in CHECKS.items():
        if (only is not None and check_id not in only) or (only is None and suite not in suites):
            continue
        if time_budget is not None and time.perf_counter() - started > time_budget:
            results.append(CheckResult(check_id, "skipped", math.nan, 0.0, "", detail="budget"))
            continue
        t0 = time.perf_counter()
        try:
            results.append(fn(params, budget, seed, workers))
        except Exception as exc:  # a failing evaluator is a failed check
            results.append(CheckResult(check_id, "error", math.nan,
                                       time.perf_counter() - t0, "",
                                       detail=f"{type(exc).__name__}: {exc}"))
    return {
        "params": asdict(params),
        "suite": suite,
        "seed": seed,
        "passed": all(r.status == "pass" for r in results),
        "checks": [asdict(r) for r in results],
    }


def report_json(report):
    def clean(x):
        return None if isinstance(x, float) and not math.isfinite(x) else x

    doc = dict(report)
    doc["checks"] = [{k: clean(v) for k, v in c.items()} for c in report["checks"]]
    return json.dumps(doc, indent=1)


@contextlib.contextmanager
def corrupt_coefficient(m, r, factor):
    """Multiply the coefficient ``C0_{m,r}`` by ``factor`` while the context is active."""
    original = transient._log_c0
    shift = math.log(factor)

    def patched(p, mm, rr):
        hit = (np.asarray(mm) == m) & (np.asarray(rr) == r)
        return original(p, mm, rr) + np.where(hit, shift, 0.0)

    transient._log_c0 = patched
    transient.clear_caches()
    try:
        yield
    finally:
        transient._log_c0 = original
        transient.clear_caches()

