"""Transient state probabilities of the classical and fractional M/E_k/1 queue.

Phases count DOWN: a customer enters service in phase ``k``; completing
phase ``s > 1`` moves to ``s - 1`` and completing phase 1 ends the service.

Evaluation strategy
-------------------
Every fractional term has the form ``X t^(nu(d-1)) E^d_{nu,nu(d-1)+1}(-Lam t^nu)``
with ``Lam = lam + k mu``, so all terms sharing the order ``d`` are grouped
first.  Writing ``X_hat = X / Lam^(d-1)`` the term becomes
``X_hat * E[pois(d-1; Lam L_nu(t))]``; grouped weights ``w_hat[d]`` stay of
order one while the raw coefficients grow combinatorially.  The Poisson
kernel is shared by all states at a given ``t`` (see :mod:`fracerlang.wright`).
Metric series (``gamma = nu d + 1``) use the gamma-CDF kernel instead.

Truncation in ``d`` stops once ``max|w_hat| * P(Poisson(Lam L) >= D)`` is
below ``abs_tol``; the Poisson tail is itself computed by quadrature.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import gammainc, gammaln, logsumexp

from . import mlfun, wright
from .errors import DomainError, QuadratureError, SeriesConvergenceError
from .mlfun import DEFAULT_CONTROL, SeriesControl

__all__ = [
    "QueueParams",
    "StatePhase",
    "CoefficientTriple",
    "m_of_state",
    "state_of_m",
    "coeff_c0",
    "coeff_abc",
    "classical_p0",
    "classical_pns",
    "frac_p0",
    "frac_pns",
    "laplace_pi0",
    "laplace_pins",
    "queue_length_prob",
    "marginal_customers",
    "mm1_p0_reindexed",
    "state_probabilities",
    "phase_truncation",
    "clear_caches",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class QueueParams:
    """Fractional M/E_k/1 queue: arrival rate ``lam``, service rate ``mu``,
    ``k`` exponential phases of rate ``k mu`` each, fractional index ``nu``."""

    lam: float
    mu: float
    k: int
    nu: float = 1.0

    def __post_init__(self):
        if not (self.lam > 0 and self.mu > 0):
            raise DomainError("rates must be positive")
        if int(self.k) != self.k or self.k < 1:
            raise DomainError("k must be an integer >= 1")
        if not (0.0 < self.nu <= 1.0):
            raise DomainError("nu must lie in (0, 1]")
        object.__setattr__(self, "k", int(self.k))

    @property
    def phase_rate(self):
        return self.k * self.mu

    @property
    def total_rate(self):
        return self.lam + self.k * self.mu

    def classical(self):
        return QueueParams(self.lam, self.mu, self.k, 1.0)


@dataclass(frozen=True)
class StatePhase:
    """State ``(n, s)``: ``n`` customers, current customer in phase ``s``.

    ``(0, 0)`` is the empty state; otherwise ``n >= 1`` and ``1 <= s <= k``.
    """

    n: int
    s: int

    def __post_init__(self):
        if self.n < 0 or self.s < 0 or (self.n == 0) != (self.s == 0):
            raise DomainError(f"invalid state ({self.n}, {self.s})")

    def check(self, k):
        if self.s > k:
            raise DomainError(f"phase {self.s} exceeds k={k}")
        return self


@dataclass(frozen=True)
class CoefficientTriple:
    """A series coefficient with its Prabhakar order ``ml_order`` (delta)
    and ``time_exponent`` (gamma - 1)."""

    value: float
    ml_order: int
    time_exponent: float


def m_of_state(state: StatePhase, k):
    """Queue length in phases: ``k (n - 1) + s``, and 0 for the empty state."""
    state.check(k)
    return 0 if state.n == 0 else k * (state.n - 1) + state.s


def state_of_m(m, k):
    """Inverse of :func:`m_of_state`: ``s`` is the least positive residue of ``m`` mod ``k``."""
    if m < 0 or int(m) != m:
        raise DomainError("m must be a nonnegative integer")
    if m == 0:
        return StatePhase(0, 0)
    s = (m - 1) % k + 1
    return StatePhase((m - s) // k + 1, s)


# ---------------------------------------------------------------------------
# coefficients


def _log_c0(p: QueueParams, m, r):
    k = p.k
    d = m + r * (k + 1)
    return (np.log(m) - np.log(d) + gammaln(d + 1.0) - gammaln(m + r * k + 1.0)
            - gammaln(r + 1.0) + r * math.log(p.lam) + (m + r * k - 1) * math.log(p.phase_rate))


def _log_a(p: QueueParams, n, s, j):
    k = p.k
    top = n + k + k * j + j - s
    return (gammaln(top + 1.0) - gammaln(n + j + 1.0) - gammaln(top - n - j + 1.0)
            + (n + j) * math.log(p.lam) + (k * (j + 1) - s) * math.log(p.phase_rate))


def _exp_checked(logv, what):
    if logv > 709.78:
        raise OverflowError(f"{what} is not representable (log value {logv:.1f})")
    return math.exp(logv)


def coeff_c0(p: QueueParams, m, r):
    """``C0_{m,r} = m/(m+r(k+1)) * binom(m+r(k+1), m+rk) lam^r (k mu)^(m+rk-1)``."""
    if m < 1 or r < 0:
        raise DomainError("need m >= 1 and r >= 0")
    d = m + r * (p.k + 1)
    return CoefficientTriple(_exp_checked(float(_log_c0(p, m, r)), "C0"), d, p.nu * (d - 1))


def _a_order(p, n, s, j):
    return n - s + (j + 1) * (p.k + 1)


def coeff_abc(p: QueueParams, n, s, j, m, r):
    """The ``A``, ``B`` and ``C`` coefficients of the ``p_{n,s}`` series.

    ``B = k mu C0_{m,r} A^{n,s}_j`` and ``C = k mu C0_{m,r} A^{n,s+1}_j``,
    with ``A^{n+1,1}_j`` replacing ``A^{n,s+1}_j`` when ``s = k``.
    """
    StatePhase(n, s).check(p.k)
    if n < 1 or j < 0 or m < 1 or r < 0:
        raise DomainError("indices out of range")
    la = float(_log_a(p, n, s, j))
    a = _a_order(p, n, s, j)
    d0 = m + r * (p.k + 1)
    lc0 = float(_log_c0(p, m, r))
    n2, s2 = (n, s + 1) if s < p.k else (n + 1, 1)
    lc = float(_log_a(p, n2, s2, j))
    c = d0 + _a_order(p, n2, s2, j)
    lkm = math.log(p.phase_rate)
    nu = p.nu
    return (CoefficientTriple(_exp_checked(la, "A"), a, nu * (a - 1)),
            CoefficientTriple(_exp_checked(lkm + lc0 + la, "B"), d0 + a, nu * (d0 + a - 1)),
            CoefficientTriple(_exp_checked(lkm + lc0 + lc, "C"), c, nu * (c - 1)))


# ---------------------------------------------------------------------------
# grouped, scaled weights  w_hat[d] = sum of coefficients of order d / Lam^(d-1)


def _key(p):
    return (float(p.lam), float(p.mu), int(p.k))


@lru_cache(maxsize=64)
def _w0_hat(key, dmax):
    lam, mu, k = key
    p = QueueParams(lam, mu, k)
    log_lam_tot = math.log(p.total_rate)
    out = np.zeros(dmax + 1)
    rr = np.arange(0, dmax // (k + 1) + 1)
    for r in rr:
        m = np.arange(1, dmax - r * (k + 1) + 1)
        if m.size == 0:
            break
        d = m + r * (k + 1)
        out[d] += np.exp(_log_c0(p, m, r) - (d - 1) * log_lam_tot)
    out.flags.writeable = False
    return out


@lru_cache(maxsize=512)
def _a_hat(key, n, s, dmax):
    lam, mu, k = key
    p = QueueParams(lam, mu, k)
    out = np.zeros(dmax + 1)
    j = np.arange(0, dmax // (k + 1) + 2)
    a = _a_order(p, n, s, j)
    ok = (a <= dmax) & (k * (j + 1) - s >= 0)
    out[a[ok]] = np.exp(_log_a(p, n, s, j[ok]) - (a[ok] - 1) * math.log(p.total_rate))
    out.flags.writeable = False
    return out


@lru_cache(maxsize=512)
def _pns_hat(key, n, s, dmax):
    lam, mu, k = key
    p = QueueParams(lam, mu, k)
    w0 = _w0_hat(key, dmax)
    a = _a_hat(key, n, s, dmax)
    n2, s2 = (n, s + 1) if s < k else (n + 1, 1)
    c = _a_hat(key, n2, s2, dmax)
    scale = p.phase_rate / p.total_rate
    # orders add as d = d0 + a, and the shift by one in (d-1) gives the Lam factor
    out = a + scale * (np.convolve(a, w0)[:dmax + 1] - np.convolve(c, w0)[:dmax + 1])
    out.flags.writeable = False
    return out


def _state_weights(p: QueueParams, m, dmax):
    if m == 0:
        return _w0_hat(_key(p), dmax)
    st = state_of_m(m, p.k)
    return _pns_hat(_key(p), st.n, st.s, dmax)


def _busy_hat(key, dmax):
    lam, mu, k = key
    p = QueueParams(lam, mu, k)
    out = np.zeros(dmax + 1)
    r = np.arange(0, dmax // (k + 1) + 1)
    d = k + r * (k + 1)
    ok = d <= dmax
    out[d[ok]] = np.exp(_log_c0(p, k, r[ok]) - (d[ok] - 1) * math.log(p.total_rate))
    return out


def clear_caches():
    """Drop memoised coefficient tables."""
    _w0_hat.cache_clear()
    _a_hat.cache_clear()
    _pns_hat.cache_clear()


# ---------------------------------------------------------------------------
# kernels and truncation


def _poisson_tail(nu, c, order):
    """``P(Poisson(c W) >= order)`` with ``W`` the M-Wright variable (``W = 1`` at ``nu = 1``)."""
    if nu == 1.0:
        return float(gammainc(order, c))
    rule = wright.wright_rule(nu, 1.0)
    return float(rule.weights @ gammainc(order, c * rule.nodes))


def _order_for(nu, c, control: SeriesControl, bound=1.0):
    """Smallest power-of-two order ``D`` with ``bound * P(N >= D) < abs_tol / 10``."""
    d = 32
    while bound * _poisson_tail(nu, c, d) >= control.abs_tol / 10:
        d *= 2
        if d > control.max_terms:
            raise SeriesConvergenceError(
                f"order truncation exceeds {control.max_terms}", index="delta", terms=d)
    return d


def _weights_for(p, m, c, control):
    """Weights of state ``m`` truncated so the neglected tail is below tolerance."""
    d = _order_for(p.nu, c, control)
    while True:
        w = _state_weights(p, m, d)
        bound = max(1.0, float(np.max(np.abs(w))))
        need = _order_for(p.nu, c, control, bound)
        if need <= d:
            return w
        d = need


def _state_kernel(p, t, dmax):
    c = p.total_rate * t ** p.nu
    return wright.poisson_moments(p.nu, c, dmax)


def _metric_kernel(p, t, dmax):
    c = p.total_rate * t ** p.nu
    return wright.gamma_cdf_moments(p.nu, c, dmax)


def _check_time(t):
    if not (t >= 0 and math.isfinite(t)):
        raise DomainError("t must be finite and nonnegative")
    return float(t)


def _clip(value, control, what):
    if value < 0:
        if value >= -2 * control.abs_tol:
            log.warning("%s = %.3e clipped to 0", what, value)
            return 0.0
        raise SeriesConvergenceError(f"{what} = {value:.3e} is negative beyond tolerance",
                                     index="delta")
    return value


def _prob(p, m, t, control, what):
    t = _check_time(t)
    if t == 0.0:
        return 1.0 if m == 0 else 0.0
    c = p.total_rate * t ** p.nu
    w = _weights_for(p, m, c, control)
    kern = _state_kernel(p, t, w.size - 1)
    return _clip(math.fsum(w[1:] * kern), control, what)


# ---------------------------------------------------------------------------
# classical queue


def classical_p0(p: QueueParams, t, control=None):
    """Empty-queue probability of the classical queue, summed as the double series

    ``sum_{m>=1} sum_{r>=0} m lam^r (k mu)^(m+rk-1) / (r! Gamma(m+rk+1)) t^(m+r(k+1)-1) e^(-Lam t)``.
    """
    control = control or DEFAULT_CONTROL
    t = _check_time(t)
    if t == 0.0:
        return 1.0
    k = p.k
    lt = p.total_rate * t
    dmax = int(lt + 14.0 * math.sqrt(lt) + 60.0)
    terms = []
    for r in range(0, dmax // (k + 1) + 1):
        m = np.arange(1, dmax - r * (k + 1) + 1)
        if m.size == 0:
            break
        logt = (np.log(m) + r * math.log(p.lam) + (m + r * k - 1) * math.log(p.phase_rate)
                - gammaln(r + 1.0) - gammaln(m + r * k + 1.0)
                + (m + r * (k + 1) - 1) * math.log(t) - lt)
        terms.extend(np.exp(logt))
    if terms[-1] > control.abs_tol:
        raise SeriesConvergenceError("classical p0 series truncated early", index="m")
    return math.fsum(terms)


@lru_cache(maxsize=200000)
def _classical_p0_cached(key, z):
    lam, mu, k = key
    return classical_p0(QueueParams(lam, mu, k), z)


def classical_pns(p: QueueParams, state: StatePhase, t, control=None):
    """Classical ``p_{n,s}(t)`` from the generalized Bessel representation.

    The two convolution integrals against ``p0`` are computed by adaptive
    Gauss-Kronrod quadrature with memoised ``p0`` values.
    """
    control = control or DEFAULT_CONTROL
    state.check(p.k)
    if state.n == 0:
        return classical_p0(p, t, control)
    t = _check_time(t)
    if t == 0.0:
        return 0.0
    n, s, k = state.n, state.s, p.k
    rho = p.lam / p.phase_rate
    beta = 2.0 * (p.lam * p.phase_rate ** k) ** (1.0 / (k + 1))
    lam_tot = p.total_rate
    key = _key(p)
    e1 = (k * (n - 1) + s) / (k + 1)
    if s < k:
        n2, s2, e2 = n, s + 1, (k * (n - 1) + s + 1) / (k + 1)
    else:
        n2, s2, e2 = n + 1, 1, (k * n + 1) / (k + 1)

    def g1(u):
        return mlfun.bessel_gen_phase(n, k, s, beta * u, control) * math.exp(-lam_tot * u)

    def g2(u):
        return mlfun.bessel_gen_phase(n2, k, s2, beta * u, control) * math.exp(-lam_tot * u)

    def conv(g):
        val, err = integrate.quad(lambda z: _classical_p0_cached(key, z) * g(t - z), 0.0, t,
                                  epsabs=control.abs_tol / 10, epsrel=1e-13, limit=400)
        if err > control.abs_tol:
            raise QuadratureError(f"convolution error {err:.1e} exceeds tolerance")
        return val

    value = (rho ** e1 * g1(t) + p.phase_rate * rho ** e1 * conv(g1)
             - p.phase_rate * rho ** e2 * conv(g2))
    return _clip(value, control, f"p_{n},{s}")


# ---------------------------------------------------------------------------
# fractional queue


def frac_p0(p: QueueParams, t, control=None):
    """``sum_{m,r} C0_{m,r} t^(gamma0-1) E^{delta0}_{nu,gamma0}(-(lam + k mu) t^nu)``."""
    return _prob(p, 0, t, control or DEFAULT_CONTROL, "p0")


def frac_pns(p: QueueParams, state: StatePhase, t, control=None):
    """``p_{n,s}(t)`` as the A/B/C Prabhakar series of the fractional queue."""
    state.check(p.k)
    control = control or DEFAULT_CONTROL
    return _prob(p, m_of_state(state, p.k), t, control, f"p_{state.n},{state.s}")


def queue_length_prob(p: QueueParams, m, t, control=None):
    """``P(queue length in phases = m)`` at time ``t``."""
    return _prob(p, int(m), t, control or DEFAULT_CONTROL, f"P_{m}")


def marginal_customers(p: QueueParams, n, t, control=None):
    """``h_n(t) = sum_s p_{n,s}(t)``: probability of ``n >= 1`` customers."""
    if n < 1:
        raise DomainError("n must be >= 1")
    return math.fsum(frac_pns(p, StatePhase(n, s), t, control) for s in range(1, p.k + 1))


def mm1_p0_reindexed(p: QueueParams, t, control=None):
    """Empty probability of the fractional M/M/1 queue (``k = 1``) summed in the
    re-indexed order ``sum_r sum_{mb > r} (mb-r)/(mb+r) binom(mb+r, mb) lam^r mu^(mb-1) ...``.

    Uses term-by-term accumulation, independent of the grouped weights.
    """
    if p.k != 1:
        raise DomainError("re-indexed series is specific to k = 1")
    control = control or DEFAULT_CONTROL
    t = _check_time(t)
    if t == 0.0:
        return 1.0
    c = p.total_rate * t ** p.nu
    dmax = _order_for(p.nu, c, control, 4.0)
    kern = wright.poisson_moments(p.nu, c, dmax)
    log_tot = math.log(p.total_rate)
    terms = []
    for r in range(0, dmax):
        for mb in range(r + 1, dmax - r + 1):
            d = mb + r
            logc = (math.log((mb - r) / d) + gammaln(d + 1) - gammaln(mb + 1) - gammaln(r + 1)
                    + r * math.log(p.lam) + (mb - 1) * math.log(p.mu) - (d - 1) * log_tot)
            terms.append(math.exp(logc) * kern[d - 1])
    return math.fsum(terms)


def phase_truncation(p: QueueParams, t, tail=1e-12):
    """Phase count ``M`` with ``P(queue length > M) <= tail`` at time ``t``.

    The queue length never exceeds ``k`` times the number of arrivals, and
    arrivals up to ``t`` are ``Poisson(lam L_nu(t))``.
    """
    c = p.lam * _check_time(t) ** p.nu
    j = 1
    while _poisson_tail(p.nu, c, j + 1) > tail:
        j += 1
    return p.k * j


def state_probabilities(p: QueueParams, t, max_phase=None, control=None):
    """Vector of ``P(queue length = m)``, ``m = 0..max_phase``, at one time.

    All states share one kernel evaluation; ``max_phase`` defaults to
    :func:`phase_truncation`.
    """
    control = control or DEFAULT_CONTROL
    t = _check_time(t)
    if max_phase is None:
        max_phase = phase_truncation(p, t)
    if t == 0.0:
        out = np.zeros(max_phase + 1)
        out[0] = 1.0
        return out
    c = p.total_rate * t ** p.nu
    weights = [_weights_for(p, m, c, control) for m in range(max_phase + 1)]
    dmax = max(w.size for w in weights) - 1
    kern = _state_kernel(p, t, dmax)
    out = np.array([math.fsum(w[1:] * kern[:w.size - 1]) for w in weights])
    return np.array([_clip(v, control, f"P_{m}") for m, v in enumerate(out)])


# ---------------------------------------------------------------------------
# Laplace transforms


def _laplace_sum(p, w, v, control):
    """``v^(nu-1) / Lam * sum_d w_hat[d] (Lam / (Lam + v^nu))^d`` for real or complex ``v``."""
    s = v ** p.nu
    ratio = p.total_rate / (p.total_rate + s)
    q = abs(ratio)
    if q >= 1.0 - 1e-3:
        raise SeriesConvergenceError(
            f"Laplace series needs |Lam/(Lam+v^nu)| < 1, got {q:.4f}", index="delta")
    d = np.arange(w.size)
    terms = w[1:] * ratio ** d[1:]
    tail = float(np.max(np.abs(w))) * q ** w.size / (1.0 - q)
    if tail > control.abs_tol:
        raise SeriesConvergenceError("Laplace series truncation too short", index="delta")
    return terms.sum() / p.total_rate


def _laplace_order(p, v, control, bound=10.0):
    q = abs(p.total_rate / (p.total_rate + v ** p.nu))
    if q >= 1.0 - 1e-3:
        raise SeriesConvergenceError(
            f"Laplace series needs |Lam/(Lam+v^nu)| < 1, got {q:.4f}", index="delta")
    need = math.log(control.abs_tol / 100 / bound * (1 - q)) / math.log(q)
    return int(2 ** math.ceil(math.log2(max(need, 32))))


def _laplace_state(p, m, v, control):
    if isinstance(v, (int, float)) and not v > 0:
        raise DomainError("v must be positive")
    d = _laplace_order(p, v, control)
    while True:
        w = _state_weights(p, m, d)
        bound = max(1.0, float(np.max(np.abs(w))))
        need = _laplace_order(p, v, control, 10.0 * bound)
        if need <= d:
            break
        d = need
    return v ** (p.nu - 1.0) * _laplace_sum(p, w, v, control)


def laplace_pi0(p: QueueParams, v, control=None):
    """``pi0(v) = sum_{m,r} C0_{m,r} v^(nu delta0 - gamma0) / (lam + k mu + v^nu)^delta0``.

    Complex ``v`` is accepted so the transform can be fed to contour inversion.
    """
    return _laplace_state(p, 0, v, control or DEFAULT_CONTROL)


def laplace_pins(p: QueueParams, state: StatePhase, v, control=None):
    """Laplace transform of ``p_{n,s}`` from the A/B/C coefficient families."""
    state.check(p.k)
    return _laplace_state(p, m_of_state(state, p.k), v, control or DEFAULT_CONTROL)
