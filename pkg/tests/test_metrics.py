import math

import numpy as np
import pytest
from scipy import integrate
from scipy.sparse.linalg import expm_multiply
from scipy.stats import erlang

from fracerlang import metrics, randvar, wright
from fracerlang.errors import DomainError
from fracerlang.harness.oracles import ode_oracle_classical, talbot_invert
from fracerlang.metrics import (WaitContext, busy_period_cdf, busy_period_cdf_array,
                                busy_period_laplace, classical_busy_period_cdf,
                                classical_waiting_density, frac_integral_p0,
                                frac_integral_p0_quadrature, mean_queue_length,
                                mean_queue_length_integral, mean_queue_length_laplace,
                                waiting_cdf_conditional, waiting_density_conditional,
                                waiting_integral, waiting_laplace_conditional, waiting_mass)
from fracerlang.transient import QueueParams

CLASSICAL = QueueParams(4.0, 5.0, 2, 1.0)


def _first_passage_cdf(p, ys, size=400):
    """Classical busy-period CDF: absorption at 0 from phase level k, by matrix exponential."""
    q = np.zeros((size, size))
    for m in range(1, size):
        q[m, m] -= p.total_rate
        if m + p.k < size:
            q[m + p.k, m] += p.lam
        q[m - 1, m] += p.phase_rate
    start = np.zeros(size)
    start[p.k] = 1.0
    out = expm_multiply(q, start, start=0.0, stop=ys[-1], num=ys.size, endpoint=True)
    return out[:, 0]


def test_mean_trivial_and_classical():
    assert mean_queue_length(CLASSICAL, 0.0) == 0.0
    mm1 = QueueParams(2.0, 3.0, 1, 1.0)
    for t in (0.3, 1.0, 2.5):
        probs, _ = ode_oracle_classical(mm1, t)
        assert mean_queue_length(mm1, t) == pytest.approx(np.arange(probs.size) @ probs, abs=1e-8)


def test_mean_series_against_integral(canonical):
    assert mean_queue_length(canonical, 0.5) == pytest.approx(
        mean_queue_length_integral(canonical, 0.5), abs=1e-8)
    assert frac_integral_p0(canonical, 0.0) == 0.0
    assert frac_integral_p0(canonical, 1.0) == pytest.approx(
        frac_integral_p0_quadrature(canonical, 1.0), abs=1e-9)
    # nu = 1: the fractional integral is the plain integral of p0
    ref = integrate.quad(lambda s: metrics.transient.classical_p0(CLASSICAL, s), 0, 1.0,
                         epsabs=1e-13)[0]
    assert frac_integral_p0(CLASSICAL, 1.0) == pytest.approx(ref, abs=1e-10)


def test_mean_against_subordinated_classical(canonical):
    # M^nu(t) = E[M^1(L_nu(t))] with the classical law from a matrix exponential
    t, size = 0.8, 160
    q = np.zeros((size, size))
    for m in range(size):
        q[m, m] -= 4.0
        if m + 2 < size:
            q[m + 2, m] += 4.0
        if m > 0:
            q[m, m] -= 10.0
            q[m - 1, m] += 10.0
    start = np.zeros(size)
    start[0] = 1.0
    ws = np.linspace(0, 12, 2401)
    probs = expm_multiply(q, start, start=0.0, stop=t ** 0.75 * ws[-1], num=ws.size,
                          endpoint=True)
    ref = integrate.simpson(wright.mwright(0.75, ws) * (probs @ np.arange(size)), x=ws)
    assert mean_queue_length(canonical, t) == pytest.approx(ref, abs=1e-6)


def test_mean_laplace(canonical):
    v = 1e8
    assert abs(v * mean_queue_length_laplace(canonical, v)) < 1e-3
    ref = talbot_invert(lambda s: mean_queue_length_laplace(canonical, s), 1.0)
    assert mean_queue_length(canonical, 1.0) == pytest.approx(ref, rel=1e-7)
    # lam = mu removes the drift term
    balanced = QueueParams(5.0, 5.0, 2, 0.75)
    series = metrics._laplace_weighted(balanced, metrics._w0(balanced), 2.0,
                                       metrics.DEFAULT_CONTROL)
    assert mean_queue_length_laplace(balanced, 2.0) == pytest.approx(10.0 * series / 2.0)


def test_busy_classical_against_first_passage():
    ys = np.linspace(0, 3.0, 301)
    ref = _first_passage_cdf(CLASSICAL, ys)
    for i in (10, 50, 150, 300):
        assert busy_period_cdf(CLASSICAL, ys[i]) == pytest.approx(ref[i], abs=1e-9)
        assert classical_busy_period_cdf(CLASSICAL, ys[i]) == pytest.approx(ref[i], abs=1e-9)


def test_busy_fractional(canonical):
    assert busy_period_cdf(canonical, 0.0) == 0.0
    ts = np.linspace(0.0, 5.0, 51)
    arr = busy_period_cdf_array(canonical, ts)
    assert np.all(np.diff(arr) >= 0) and arr[0] == 0.0 and arr[-1] < 1.0
    for t in (0.3, 1.0, 4.0):
        assert busy_period_cdf(canonical, t) == pytest.approx(
            arr[np.argmin(abs(ts - t))], abs=1e-9)
    # subordination of the first-passage law
    t = 1.0
    ws = np.linspace(0.0, 12.0, 2401)
    b1 = _first_passage_cdf(CLASSICAL, t ** 0.75 * ws)
    ref = integrate.simpson(wright.mwright(0.75, ws) * b1, x=ws)
    assert busy_period_cdf(canonical, t) == pytest.approx(ref, abs=1e-6)


def test_busy_laplace(canonical):
    for v in (0.5, 3.0):
        # B is a CDF, so its transform lies in (0, 1/v)
        assert 0 < busy_period_laplace(canonical, v) < 1 / v
    ref = talbot_invert(lambda s: busy_period_laplace(canonical, s), 1.0)
    assert busy_period_cdf(canonical, 1.0) == pytest.approx(ref, rel=1e-7)
    # r = 0 term by hand: k mu C0_{k,0} v^(nu k - nu k - 1) / (Lam + v^nu)^k
    w = metrics.transient._busy_hat(metrics.transient._key(canonical), 8)
    assert w[2] == pytest.approx(10.0 / 14.0, rel=1e-12)


def test_waiting_reduces_to_erlang():
    ctx = WaitContext(1.0, 0.4, 3)
    xi = np.array([0.05, 0.3, 1.0])
    assert np.allclose(waiting_density_conditional(ctx, CLASSICAL, xi),
                       erlang.pdf(xi, 3, scale=0.1), rtol=1e-13)
    assert waiting_laplace_conditional(ctx, CLASSICAL, 2.0) == pytest.approx((10 / 12) ** 3)


def _wait_quad(ctx, p, x):
    kmu = p.phase_rate
    rml = randvar.RMLParams(p.nu, kmu, ctx.elapsed)
    f = lambda u: randvar.ge_pdf(p.nu, ctx.n - 1, kmu, u) * randvar.rml_pdf(rml, x - u)
    return integrate.quad(f, 0, x, limit=400, epsabs=1e-14, epsrel=1e-12)[0]


@pytest.mark.parametrize("n,elapsed", [(2, 0.2), (3, 0.5), (3, 0.0)])
def test_waiting_density_against_quad(canonical, n, elapsed):
    ctx = WaitContext(1.0, 1.0 - elapsed, n)
    for x in (0.01, 0.2, 1.5):
        value, err = waiting_density_conditional(ctx, canonical, x, full_output=True)
        assert value == pytest.approx(_wait_quad(ctx, canonical, x), rel=1e-8)
        assert err < 1e-8 * max(value, 1.0)


@pytest.mark.parametrize("n,elapsed", [(1, 0.2), (3, 0.2), (3, 0.5)])
def test_waiting_mass(canonical, n, elapsed):
    ctx = WaitContext(1.0, 1.0 - elapsed, n)
    integral, tail = waiting_mass(ctx, canonical)
    assert abs(integral - 1.0) < 1e-3
    assert integral + tail == pytest.approx(1.0, abs=1e-9)


def test_waiting_laplace(canonical):
    ctx = WaitContext(1.0, 0.8, 3)
    for v in (0.5, 2.0):
        ref, err, _ = waiting_integral(ctx, canonical, weight=lambda x: np.exp(-v * x),
                                       upper=60.0)
        assert waiting_laplace_conditional(ctx, canonical, v) == pytest.approx(ref, abs=1e-7)
    assert waiting_laplace_conditional(ctx, canonical, 1e-10) == pytest.approx(1.0, abs=1e-5)
    fresh = WaitContext(1.0, 1.0, 2)
    assert waiting_laplace_conditional(fresh, canonical, 1.0) == pytest.approx((10 / 11) ** 2)


def test_waiting_cdf_consistent_with_density(canonical):
    ctx = WaitContext(1.0, 0.8, 3)
    value, err, _ = waiting_integral(ctx, canonical, upper=0.7)
    assert waiting_cdf_conditional(ctx, canonical, 0.7) == pytest.approx(value, abs=1e-9)


def test_classical_waiting_density():
    t, kmu = 0.5, 10.0
    f = lambda x: classical_waiting_density(CLASSICAL, t, x)[0]
    _, atom = classical_waiting_density(CLASSICAL, t, 1.0)
    mass = integrate.quad(f, 0, 20, limit=200, epsabs=1e-12)[0]
    assert mass + atom == pytest.approx(1.0, abs=1e-8)
    mean = integrate.quad(lambda x: x * f(x), 0, 20, limit=200, epsabs=1e-12)[0]
    assert mean == pytest.approx(mean_queue_length(CLASSICAL, t) / kmu, rel=1e-8)
    _, atom0 = classical_waiting_density(CLASSICAL, 1e-9, 1.0)
    assert atom0 == pytest.approx(1.0, abs=1e-7)
    with pytest.raises(DomainError):
        classical_waiting_density(QueueParams(4.0, 5.0, 2, 0.75), t, 1.0)


def test_wait_context_validation():
    with pytest.raises(DomainError):
        WaitContext(1.0, 1.5, 2)
    with pytest.raises(DomainError):
        WaitContext(1.0, 0.5, 0)
