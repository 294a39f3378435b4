"""Independent numerical oracles.

Nothing here calls the series evaluators: the ODE oracle integrates the
forward equations, contour inversion only sees a transform, and the
fractional-calculus discretisations operate on sampled values.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn

from ..errors import DomainError, InversionRefused, QuadratureError

__all__ = [
    "ode_oracle_classical",
    "talbot_invert",
    "caputo_l1",
    "caputo_l1_grid",
    "riemann_liouville",
]


def _generator(lam, mu, k, size):
    """Forward generator on phases ``0..size-1`` plus an absorbing overflow state."""
    km = k * mu
    q = np.zeros((size + 1, size + 1))
    for m in range(size):
        q[m, m] -= lam
        q[min(m + k, size), m] += lam
        if m > 0:
            q[m, m] -= km
            q[m - 1, m] += km
    return q


def ode_oracle_classical(params, t, truncation=None, tail_tol=1e-8):
    """Classical queue-length distribution ``P(L(t) = m)``, ``m = 0..N-1``.

    Integrates the truncated forward equations with Radau (``rtol = 1e-12``).
    Arrivals that would leave the truncated range land in an absorbing state;
    its mass is the reported ``deficit``.  Without an explicit ``truncation``
    ``N`` doubles from 32 until the deficit at ``t`` is below ``tail_tol``.
    Returns ``(probabilities, deficit)``.
    """
    if params.nu != 1.0:
        raise DomainError("the ODE oracle covers the classical queue only")
    size = truncation or 32
    while True:
        q = _generator(params.lam, params.mu, params.k, size)
        p0 = np.zeros(size + 1)
        p0[0] = 1.0
        if t == 0:
            y = p0
        else:
            sol = integrate.solve_ivp(lambda s, p: q @ p, (0.0, t), p0, method="Radau",
                                      rtol=1e-12, atol=1e-15, jac=lambda s, p: q)
            y = sol.y[:, -1]
        deficit = float(y[-1])
        if truncation is not None or deficit < tail_tol:
            return y[:-1], deficit
        size *= 2


# Weideman-Trefethen optimised cotangent contour
_TALBOT = (0.5017, 0.6407, 0.6122, 0.2645)


def _talbot_once(transform, t, nodes):
    a, b, c, d = _TALBOT
    theta = -np.pi + (np.arange(nodes) + 0.5) * 2.0 * np.pi / nodes
    z = nodes * (a * theta / np.tan(b * theta) - c + 1j * d * theta)
    dz = nodes * (a / np.tan(b * theta) - a * b * theta / np.sin(b * theta) ** 2 + 1j * d)
    vals = np.array([transform(zz / t) for zz in z], dtype=complex)
    return float((np.exp(z) * vals * dz).sum().imag / (nodes * t))


def talbot_invert(transform, t, nodes=32, check_nodes=64, tol=1e-7):
    """Invert a Laplace transform at ``t > 0`` on a Talbot contour.

    ``transform`` must accept complex arguments.  The midpoint rule on the
    optimised contour converges geometrically; the result at ``nodes`` is
    compared with ``check_nodes`` and the inversion is refused when the two
    differ by more than ``tol`` (relative to ``max(1, |f|)``).
    """
    if not t > 0:
        raise DomainError("inversion time must be positive")
    try:
        main = _talbot_once(transform, t, nodes)
        check = _talbot_once(transform, t, check_nodes)
    except ArithmeticError as exc:
        raise InversionRefused(f"transform failed on the contour: {exc}") from exc
    if not math.isfinite(main) or abs(main - check) > tol * max(1.0, abs(main)):
        raise InversionRefused(f"node counts disagree at t={t}: {main!r} vs {check!r}")
    return main


def caputo_l1(f, nu, t_index, step):
    """L1 approximation of the Caputo derivative of order ``nu`` at ``t_index * step``.

    ``f`` holds samples on the uniform grid ``0, step, 2 step, ...``.
    """
    n = int(t_index)
    if n == 0:
        return 0.0
    f = np.asarray(f, dtype=float)
    j = np.arange(n)
    b = (j + 1.0) ** (1.0 - nu) - j ** (1.0 - nu)
    diffs = f[n - j] - f[n - j - 1]
    return float(b @ diffs) / (step ** nu * gamma_fn(2.0 - nu))


def caputo_l1_grid(f, nu, step):
    """L1 Caputo derivative at every grid point (``O(n^2)`` direct sum).

    ``f`` may be two-dimensional with time along the first axis.
    """
    f = np.asarray(f, dtype=float)
    n = f.shape[0]
    j = np.arange(n)
    b = (j + 1.0) ** (1.0 - nu) - j ** (1.0 - nu)
    diffs = np.diff(f, axis=0)
    out = np.zeros_like(f)
    for i in range(1, n):
        out[i] = b[:i] @ diffs[i - 1::-1]
    return out / (step ** nu * gamma_fn(2.0 - nu))


def riemann_liouville(func, nu, t, tol=1e-12):
    """``I^nu f(t) = 1/Gamma(nu) int_0^t (t - s)^(nu-1) f(s) ds`` by adaptive quadrature.

    The substitution ``s = t - u^(1/nu)`` removes the endpoint singularity.
    """
    if t == 0:
        return 0.0
    val, err = integrate.quad(lambda u: func(t - u ** (1.0 / nu)), 0.0, t ** nu,
                              epsabs=tol, epsrel=tol, limit=400)
    if err > 1e3 * tol:
        raise QuadratureError(f"fractional integral error {err:.1e}")
    return val / gamma_fn(nu + 1.0)
