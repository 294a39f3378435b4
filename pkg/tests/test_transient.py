import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate
from scipy.sparse.linalg import expm_multiply

from fracerlang import transient, wright
from fracerlang.errors import DomainError
from fracerlang.harness.oracles import caputo_l1_grid, ode_oracle_classical, talbot_invert
from fracerlang.transient import (QueueParams, StatePhase, classical_p0, classical_pns, coeff_abc,
                                  coeff_c0, frac_p0, frac_pns, laplace_pi0, laplace_pins,
                                  m_of_state, marginal_customers, mm1_p0_reindexed,
                                  queue_length_prob, state_of_m, state_probabilities)

CLASSICAL = QueueParams(4.0, 5.0, 2, 1.0)


def test_state_maps():
    assert m_of_state(StatePhase(0, 0), 2) == 0 and state_of_m(0, 2) == StatePhase(0, 0)
    assert m_of_state(StatePhase(3, 1), 2) == 5 and state_of_m(5, 2) == StatePhase(3, 1)
    assert state_of_m(3, 3) == StatePhase(1, 3)
    for k in range(1, 6):
        for m in range(101):
            assert m_of_state(state_of_m(m, k), k) == m
    with pytest.raises(DomainError):
        StatePhase(0, 1)
    with pytest.raises(DomainError):
        m_of_state(StatePhase(1, 3), 2)


@given(n=st.integers(1, 50), s=st.integers(1, 7), k=st.integers(1, 7))
def test_state_map_inverse(n, s, k):
    if s > k:
        return
    assert state_of_m(m_of_state(StatePhase(n, s), k), k) == StatePhase(n, s)


def test_coefficients_by_substitution():
    one = coeff_c0(CLASSICAL, 1, 0)
    assert (one.value, one.ml_order) == (1.0, 1)
    p = QueueParams(4.0, 5.0, 2, 0.75)
    c = coeff_c0(p, 2, 1)
    # (m/(m+r(k+1))) binom(5, 4) lam^r (k mu)^(m+rk-1) with m+rk-1 = 3
    assert c.value == pytest.approx(2 / 5 * math.comb(5, 4) * 4 * 10 ** 3, rel=1e-14)
    assert c.value == pytest.approx(8000.0, rel=1e-14) and c.ml_order == 5
    assert c.time_exponent == pytest.approx(0.75 * 4)
    assert coeff_c0(CLASSICAL, 2, 1).time_exponent + 1 == 5
    # A^{1,2}_0 at k=2: binom(1+2+0+0-2, 1) * 4 * 10^0 = 4
    a, b, cc = coeff_abc(p, 1, 2, 0, 1, 0)
    assert a.value == pytest.approx(4.0, rel=1e-14)
    for (n, s, j, m, r) in [(1, 1, 0, 1, 0), (2, 2, 1, 2, 1), (3, 1, 2, 1, 3)]:
        a, b, cc = coeff_abc(p, n, s, j, m, r)
        c0 = coeff_c0(p, m, r)
        top = n + 2 + 2 * j + j - s
        brute = math.comb(top, n + j) * 4.0 ** (n + j) * 10.0 ** (2 * (j + 1) - s)
        assert a.value == pytest.approx(brute, rel=1e-13)
        assert b.value == pytest.approx(10.0 * c0.value * a.value, rel=1e-13)
        assert b.ml_order == c0.ml_order + a.ml_order
        n2, s2 = (n, s + 1) if s < 2 else (n + 1, 1)
        a2 = coeff_abc(p, n2, s2, j, m, r)[0]
        assert cc.value == pytest.approx(10.0 * c0.value * a2.value, rel=1e-13)


def test_classical_against_ode():
    for t in (0.5, 1.0, 2.0):
        probs, deficit = ode_oracle_classical(CLASSICAL, t)
        assert deficit < 1e-8
        assert classical_p0(CLASSICAL, t) == pytest.approx(probs[0], abs=1e-8)
        for m in (1, 2, 5):
            st_ = state_of_m(m, 2)
            assert classical_pns(CLASSICAL, st_, t) == pytest.approx(probs[m], abs=1e-8)
    assert classical_p0(CLASSICAL, 0.0) == 1.0
    assert classical_pns(CLASSICAL, StatePhase(1, 2), 0.0) == 0.0
    assert classical_p0(QueueParams(1e-9, 5.0, 2), 1.0) == pytest.approx(1.0, abs=1e-8)


def test_classical_normalisation():
    t = 0.5
    total = classical_p0(CLASSICAL, t) + sum(classical_pns(CLASSICAL, state_of_m(m, 2), t)
                                             for m in range(1, 40))
    assert total == pytest.approx(1.0, abs=1e-4)


def test_nu_one_equals_classical():
    for t in (0.1, 1.0, 2.0):
        assert frac_p0(CLASSICAL, t) == pytest.approx(classical_p0(CLASSICAL, t), abs=1e-10)
        for m in (1, 2, 3, 6):
            s = state_of_m(m, 2)
            assert frac_pns(CLASSICAL, s, t) == pytest.approx(classical_pns(CLASSICAL, s, t),
                                                              abs=1e-9)


def _subordinated_classical(p, ms, t):
    # p^nu(t) = int M_nu(w) p^1(t^nu w) dw; the classical law on the whole grid
    # comes from one matrix-exponential sweep of the truncated generator
    ws = np.linspace(0.0, 12.0, 2401)
    size = 160
    q = np.zeros((size, size))
    for m in range(size):
        q[m, m] -= p.lam
        if m + p.k < size:
            q[m + p.k, m] += p.lam
        if m > 0:
            q[m, m] -= p.phase_rate
            q[m - 1, m] += p.phase_rate
    start = np.zeros(size)
    start[0] = 1.0
    probs = expm_multiply(q, start, start=0.0, stop=t ** p.nu * ws[-1], num=ws.size,
                          endpoint=True)
    dens = wright.mwright(p.nu, ws)
    return [integrate.simpson(dens * probs[:, m], x=ws) for m in ms]


def test_fractional_against_subordinated_classical_law(canonical):
    refs = _subordinated_classical(canonical, (0, 1, 3), 0.6)
    for m, ref in zip((0, 1, 3), refs):
        assert queue_length_prob(canonical, m, 0.6) == pytest.approx(ref, abs=1e-6)


def test_fractional_against_talbot(canonical):
    assert frac_p0(canonical, 0.0) == 1.0
    assert frac_pns(canonical, StatePhase(1, 1), 0.0) == 0.0
    ref = talbot_invert(lambda v: laplace_pi0(canonical, v), 1.0)
    assert frac_p0(canonical, 1.0) == pytest.approx(ref, rel=1e-7)
    s = StatePhase(1, 1)
    ref = talbot_invert(lambda v: laplace_pins(canonical, s, v), 1.0)
    assert frac_pns(canonical, s, 1.0) == pytest.approx(ref, rel=1e-7)


def test_laplace_limits_and_quadrature(canonical):
    v = 1e8
    assert v * laplace_pi0(canonical, v) == pytest.approx(1.0, abs=1e-3)
    assert abs(v * laplace_pins(canonical, StatePhase(1, 2), v)) < 1e-3
    mm1 = QueueParams(2.0, 3.0, 1, 1.0)
    ref = integrate.quad(lambda t: math.exp(-0.7 * t) * classical_p0(mm1, t), 0, 80,
                         limit=400, epsabs=1e-12)[0]
    assert laplace_pi0(mm1, 0.7) == pytest.approx(ref, rel=1e-9)
    ref = integrate.quad(lambda t: math.exp(-2.0 * t) * frac_p0(canonical, t), 0, 40,
                         limit=400, epsabs=1e-11)[0]
    assert laplace_pi0(canonical, 2.0) == pytest.approx(ref, rel=1e-7)


def test_laplace_first_term_by_hand(canonical):
    # only C0_{1,0} contributes to order 1: v^(nu-1) / (Lam + v^nu)
    lam_tot, nu, v = 14.0, 0.75, 3.0
    w = transient._state_weights(canonical, 0, 4)
    assert w[1] == pytest.approx(1.0, rel=1e-14)
    first = v ** (nu - 1) / (lam_tot + v ** nu)
    assert v ** (nu - 1) * w[1] * (lam_tot / (lam_tot + v ** nu)) / lam_tot == pytest.approx(first)


def test_length_and_marginal_routing(canonical):
    t = 0.7
    assert queue_length_prob(canonical, 0, t) == frac_p0(canonical, t)
    assert queue_length_prob(canonical, 5, t) == frac_pns(canonical, StatePhase(3, 1), t)
    assert queue_length_prob(canonical, 2, t) == frac_pns(canonical, StatePhase(1, 2), t)
    assert marginal_customers(canonical, 2, t) == pytest.approx(
        frac_pns(canonical, StatePhase(2, 1), t) + frac_pns(canonical, StatePhase(2, 2), t))
    k1 = QueueParams(4.0, 5.0, 1, 0.75)
    assert marginal_customers(k1, 3, t) == frac_pns(k1, StatePhase(3, 1), t)
    probs, _ = ode_oracle_classical(CLASSICAL, t)
    assert marginal_customers(CLASSICAL, 2, t) == pytest.approx(probs[3] + probs[4], abs=1e-9)


def test_k1_reindexed_series():
    p = QueueParams(4.0, 5.0, 1, 0.75)
    for t in (0.1, 0.5, 1.0, 2.0):
        assert frac_p0(p, t) == pytest.approx(mm1_p0_reindexed(p, t), abs=1e-10)


@pytest.mark.parametrize("t", [0.5, 1.0, 3.0])
def test_normalisation(canonical, t):
    probs = state_probabilities(canonical, t)
    assert np.all(probs >= 0)
    assert probs.sum() == pytest.approx(1.0, abs=1e-10)
    h = [marginal_customers(canonical, n, t) for n in range(1, probs.size // 2)]
    assert probs[0] + math.fsum(h) == pytest.approx(probs.sum(), abs=1e-12)


def test_caputo_residual_of_forward_equations(canonical):
    # D^nu p = Q p on phases m <= 4, checked with the L1 scheme at step 1e-3
    step, nu = 1e-3, canonical.nu
    ts = np.arange(0, 151) * step
    probs = np.array([state_probabilities(canonical, t, max_phase=40) for t in ts])
    lam, km, k = 4.0, 10.0, 2
    deriv = caputo_l1_grid(probs, nu, step)
    rhs = -lam * probs.copy()
    rhs[:, 1:] -= km * probs[:, 1:]
    rhs[:, :-1] += km * probs[:, 1:]
    rhs[:, k:] += lam * probs[:, :-k]
    res = np.abs(deriv - rhs)[100:, :5]
    assert res.max() < 1e-3


def test_time_domain_errors(canonical):
    with pytest.raises(DomainError):
        frac_p0(canonical, -1.0)
    with pytest.raises(DomainError):
        QueueParams(1.0, 1.0, 0)
    with pytest.raises(DomainError):
        QueueParams(1.0, 1.0, 2, 1.5)
