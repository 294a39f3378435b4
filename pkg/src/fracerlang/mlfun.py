"""Mittag-Leffler family, generalized modified Bessel functions, incomplete gamma.

Direct power series are summed with ``math.fsum`` (exactly rounded, which
subsumes Kahan compensation).  Each sum returns an error estimate built from
the truncation tail and the cancellation loss ``eps * max|term|``; if that
estimate exceeds ``abs_tol`` the evaluation fails loudly unless a fallback
applies.  For negative arguments the fallback is the subordination quadrature
of :mod:`fracerlang.wright`, which is free of cancellation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc, gammaln, hyp1f1

from . import wright
from .errors import DomainError, RangeError, SeriesConvergenceError

__all__ = [
    "SeriesControl",
    "DEFAULT_CONTROL",
    "ml",
    "ml_two",
    "ml_three",
    "bessel_gen",
    "bessel_gen_phase",
    "upper_incomplete_gamma",
]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SeriesControl:
    """Truncation policy for infinite series.

    ``ml_crossover`` is the ``|z|`` above which negative-argument
    Mittag-Leffler values skip the power series and use the quadrature route.
    """

    abs_tol: float = 1e-12
    max_terms: int = 20000
    stagnation_window: int = 3
    ml_crossover: float = 30.0

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise DomainError("abs_tol must be positive")
        if self.max_terms < 1 or self.stagnation_window < 1:
            raise DomainError("max_terms and stagnation_window must be >= 1")


DEFAULT_CONTROL = SeriesControl()


def _check_nu(nu):
    if not (0.0 < nu <= 1.0):
        raise DomainError(f"nu must lie in (0, 1], got {nu}")


def _finite(value, err, what):
    if not math.isfinite(value):
        raise RangeError(f"{what} is not representable in double precision")
    return value, err


def _prabhakar_series(nu, gamma, delta, z, control):
    """Sum of ``Gamma(delta+k) z^k / (k! Gamma(delta) Gamma(nu k + gamma))``."""
    terms = []
    # log of the Pochhammer ratio (delta)_k / k!, built by the recursion
    log_poch = 0.0
    log_abs_z = math.log(abs(z))
    below = 0
    prev = math.inf
    peak = 0.0
    for k in range(control.max_terms):
        if k > 0:
            log_poch += math.log((delta + k - 1) / k)
        logmag = log_poch + k * log_abs_z - gammaln(nu * k + gamma)
        if logmag > 709.0:
            raise RangeError("Prabhakar series term overflows")
        mag = math.exp(logmag)
        terms.append(-mag if (z < 0 and k % 2) else mag)
        peak = max(peak, mag)
        if mag < control.abs_tol and mag <= prev:
            below += 1
            if below >= control.stagnation_window:
                total = math.fsum(terms)
                err = mag + 8.0 * _EPS * peak
                return total, err, k + 1
        else:
            below = 0
        prev = mag
    raise SeriesConvergenceError(
        f"Prabhakar series did not converge in {control.max_terms} terms",
        index="k", terms=control.max_terms)


def _prabhakar_quadrature(nu, gamma, delta, x):
    """``E^delta_{nu,gamma}(-x)`` for ``x > 0`` via ``E[phi(W)]``.

    ``phi`` is the inverse Laplace transform of ``s^-a (s + x)^-delta`` with
    ``a = (gamma - 1)/nu - (delta - 1)``, which must be nonnegative.
    """
    a = (gamma - 1.0) / nu - (delta - 1.0)
    if a < -1e-12:
        raise SeriesConvergenceError(
            "no cancellation-free route for gamma < 1 + nu (delta - 1)", index="k")
    a = max(a, 0.0)

    def phi(y):
        base = np.exp((a + delta - 1.0) * np.log(y) - x * y - gammaln(a + delta))
        if a == 0.0:
            return base
        return base * hyp1f1(a, a + delta, x * y)

    if nu == 1.0:
        return float(phi(np.array([1.0]))[0]), 4 * _EPS
    # the integrand peaks near y = (a + delta - 1)/x; resolve it only when it
    # sits beyond the geometric head panels of the rule
    scale = wright._kernel_scale(x, a + delta)
    fine = wright.subordinated_mean(nu, 1.0, phi, scale=4.0 * scale)
    coarse = wright.subordinated_mean(nu, 1.0, phi, scale=scale)
    return fine, abs(fine - coarse) + 16 * _EPS * abs(fine)


def ml_three(nu, gamma, delta, z, control=None, full_output=False):
    """Prabhakar function ``E^delta_{nu,gamma}(z)``.

    With ``full_output=True`` returns ``(value, error_estimate)``.
    """
    control = control or DEFAULT_CONTROL
    _check_nu(nu)
    if not (gamma > 0 and delta > 0):
        raise DomainError("gamma and delta must be positive")
    if not math.isfinite(z):
        raise DomainError("z must be finite")
    if z == 0.0:
        value, err = math.exp(-gammaln(gamma)), 0.0
    elif nu == 1.0 and delta == 1.0 and gamma == 1.0:
        value, err = math.exp(z), 4 * _EPS * math.exp(z)
    elif z < 0 and -z > control.ml_crossover:
        value, err = _prabhakar_quadrature(nu, gamma, delta, -z)
    else:
        try:
            value, err, _ = _prabhakar_series(nu, gamma, delta, z, control)
        except RangeError:
            if z > 0:
                raise
            value, err = math.nan, math.inf
        if err > control.abs_tol:
            if z < 0:
                value, err = _prabhakar_quadrature(nu, gamma, delta, -z)
            else:
                raise SeriesConvergenceError(
                    f"cancellation error {err:.2e} exceeds abs_tol", index="k")
    if err > control.abs_tol * max(1.0, abs(value)):
        raise SeriesConvergenceError(
            f"error estimate {err:.2e} exceeds abs_tol {control.abs_tol:.1e}", index="k")
    value, err = _finite(value, err, "Prabhakar function")
    return (value, err) if full_output else value


def ml_two(nu, gamma, z, control=None, full_output=False):
    """Two-parameter Mittag-Leffler function ``E_{nu,gamma}(z)``."""
    return ml_three(nu, gamma, 1.0, z, control, full_output)


def ml(nu, z, control=None, full_output=False):
    """One-parameter Mittag-Leffler function ``E_nu(z) = sum z^k / Gamma(nu k + 1)``."""
    return ml_three(nu, 1.0, 1.0, z, control, full_output)


def _positive_series(log_prefix, log_terms, what):
    """Sum ``exp(log_prefix + log_terms)``; all terms are nonnegative."""
    top = np.max(log_terms)
    total = math.fsum(np.exp(log_terms - top)) if np.isfinite(top) else 0.0
    if total == 0.0:
        return 0.0
    logv = log_prefix + top + math.log(total)
    if logv > 709.0:
        raise RangeError(f"{what} overflows double precision")
    return math.exp(logv)


def _check_bessel_args(n, k, t):
    if n < 0 or k < 1 or int(n) != n or int(k) != k:
        raise DomainError("need integer n >= 0 and k >= 1")
    if t < 0:
        raise DomainError("t must be nonnegative")


def _bessel_sum(power, log_denominator, k, t, control):
    """``(t/2)^power * sum_r (t/2)^{r(k+1)} / D(r)`` with ``log D`` given."""
    if t == 0.0:
        return math.exp(-log_denominator(0)) if power == 0 else 0.0
    lh = math.log(t / 2.0)
    rmax = 16
    while True:
        r = np.arange(rmax)
        logs = r * (k + 1) * lh - log_denominator(r)
        peak = int(np.argmax(logs))
        if logs[-1] < logs[peak] + math.log(control.abs_tol * _EPS) and peak < rmax - 1:
            break
        rmax *= 2
        if rmax > control.max_terms:
            raise SeriesConvergenceError("Bessel series did not converge", index="r",
                                         terms=control.max_terms)
    return _positive_series(power * lh, logs, "generalized Bessel function")


def bessel_gen(n, k, t, control=None):
    """Generalized modified Bessel function ``I_n^k(t)``.

    ``(t/2)^n sum_r (t/2)^{r(k+1)} / (r! Gamma(n + r k + 1))``; ``k = 1`` is the
    classical ``I_n``.
    """
    control = control or DEFAULT_CONTROL
    _check_bessel_args(n, k, t)
    return _bessel_sum(n, lambda r: gammaln(r + 1.0) + gammaln(n + r * k + 1.0), k, t, control)


def bessel_gen_phase(n, k, s, t, control=None):
    """Phase-indexed Bessel function ``I_n^{k,s}(t)``.

    ``(t/2)^{n+k-s} sum_r (t/2)^{r(k+1)} / ((k(r+1)-s)! Gamma(n + r + 1))``.
    """
    control = control or DEFAULT_CONTROL
    _check_bessel_args(n, k, t)
    if not (1 <= s <= k):
        raise DomainError("phase s must lie in [1, k]")
    return _bessel_sum(n + k - s,
                       lambda r: gammaln(k * (r + 1.0) - s + 1.0) + gammaln(n + r + 1.0),
                       k, t, control)


def upper_incomplete_gamma(a, x):
    """Non-regularised upper incomplete gamma ``Gamma(a, x)`` for real ``a > 0, x >= 0``."""
    if not (a > 0 and x >= 0):
        raise DomainError("upper_incomplete_gamma needs a > 0 and x >= 0")
    if a < 171:
        return float(gammaincc(a, x) * math.gamma(a))
    q = gammaincc(a, x)
    logv = math.log(q) + gammaln(a) if q > 0 else -math.inf
    if logv > 709.0:
        raise RangeError("upper incomplete gamma overflows double precision")
    return math.exp(logv)
