"""Quadrature against the law of the inverse stable subordinator.

For ``0 < nu < 1`` the inverse stable subordinator satisfies
``L_nu(t) = t**nu * W`` in distribution, where ``W`` has the M-Wright
(Mainardi) density

    M_nu(w) = sum_n (-w)**n / (n! * Gamma(1 - nu - nu*n)).

Every time-domain Prabhakar term used by the queue formulas is an average of a
classical function over ``L_nu(t)``::

    t**(nu*(d-1)) * E^d_{nu, nu*(d-1)+1}(-c t**nu) = E[(L**(d-1)/Gamma(d)) exp(-c L)]

so a single positive quadrature rule for ``M_nu`` replaces the alternating
power series, which loses every significant digit once ``c t**nu`` exceeds
roughly 20.

``M_nu`` itself is evaluated from its power series for ``w < 1`` and from the
Kanter integral

    M_nu(w) = 1/(pi (1-nu) w) * int_0^pi A(u) w^q exp(-A(u) w^q) du,  q = 1/(1-nu)

for ``w >= 1``; both pieces only add positive or mildly alternating terms.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gammainc, gammaln

from .errors import DomainError, SeriesConvergenceError

__all__ = [
    "kanter_a",
    "mwright",
    "WrightRule",
    "wright_rule",
    "subordinated_mean",
    "poisson_moments",
    "gamma_cdf_moments",
]

_PANEL_ORDER = 16
_SERIES_CUT = 0.5
_SERIES_TERMS = 200
_TAIL = 1e-24
# the Kanter integrand sharpens like 1/q with q = 1/(1-nu); beyond this q
# the u-rule would need more nodes than is reasonable
_MAX_Q = 1000.0


def kanter_a(u, nu):
    """Kanter's function ``A(u) = (sin(nu u)/sin u)^(1/(1-nu)) sin((1-nu)u)/sin(nu u)``."""
    return np.exp(_log_kanter_a(u, nu))


def _log_kanter_a(u, nu):
    q = 1.0 / (1.0 - nu)
    return (q * np.log(np.sin(nu * u) / np.sin(u))
            + np.log(np.sin((1.0 - nu) * u) / np.sin(nu * u)))


def _mwright_series(nu, w):
    # 1/Gamma(1 - x) = sin(pi x) Gamma(x) / pi with x = nu (n + 1)
    n = np.arange(1, _SERIES_TERMS)
    x = nu * (n + 1.0)
    logmag = n * np.log(w[:, None]) + gammaln(x) - gammaln(n + 1.0) - np.log(np.pi)
    terms = (-1.0) ** n * np.sin(np.pi * x) * np.exp(logmag)
    return np.exp(-gammaln(1.0 - nu)) + terms.sum(axis=1)


def _check_q(nu):
    if 1.0 / (1.0 - nu) > _MAX_Q:
        raise SeriesConvergenceError(
            f"M-Wright quadrature unresolved for nu={nu}; need 1 - nu >= {1.0 / _MAX_Q:g}",
            index="u")


@lru_cache(maxsize=16)
def _u_rule(nu):
    # log A(u) grows like q log(1/(pi - u)) towards u = pi, so the panels are
    # uniform on [0, pi/2] and geometric towards pi with ~q/8 panels per octave
    q = 1.0 / (1.0 - nu)
    depth = int(np.ceil(np.log2(0.5 * np.pi / (1e-6 * np.pi * (1.0 - nu)))))
    per_octave = int(np.ceil(q / 8.0))
    near = np.pi - 0.5 * np.pi * 2.0 ** -np.linspace(0.0, depth, depth * per_octave + 1)
    edges = np.concatenate((np.linspace(0.0, 0.5 * np.pi, 9)[:-1], near, [np.pi]))
    x, wt = leggauss(_PANEL_ORDER)
    lo, hi = edges[:-1], edges[1:]
    u = (lo[:, None] + 0.5 * (hi - lo)[:, None] * (x + 1.0)).ravel()
    return _log_kanter_a(u, nu), (0.5 * (hi - lo)[:, None] * wt).ravel()


def _mwright_integral(nu, w):
    loga, wt = _u_rule(nu)
    out = np.empty_like(w)
    q = 1.0 / (1.0 - nu)
    step = max(1, 2 ** 21 // loga.size)
    for lo in range(0, w.size, step):
        chunk = w[lo:lo + step]
        logz = loga[None, :] + q * np.log(chunk)[:, None]
        with np.errstate(over="ignore"):
            kernel = np.exp(logz - np.exp(logz))
        out[lo:lo + step] = kernel @ wt / (np.pi * (1.0 - nu) * chunk)
    return out


def mwright(nu, w):
    """M-Wright density of ``L_nu(1)`` evaluated at ``w >= 0``."""
    if not 0.0 < nu < 1.0:
        raise DomainError(f"M-Wright density needs 0 < nu < 1, got {nu}")
    _check_q(nu)
    w = np.asarray(w, dtype=float)
    scalar = w.ndim == 0
    w = np.atleast_1d(w)
    out = np.zeros_like(w)
    small = (w > 0) & (w < _SERIES_CUT)
    big = w >= _SERIES_CUT
    out[w == 0] = np.exp(-gammaln(1.0 - nu))
    if small.any():
        out[small] = _mwright_series(nu, w[small])
    if big.any():
        out[big] = _mwright_integral(nu, w[big])
    return out[0] if scalar else out


@dataclass(frozen=True)
class WrightRule:
    """Nodes ``w_i`` and weights ``q_i`` with ``sum q_i f(w_i) ~ E[f(W)]``."""

    nu: float
    nodes: np.ndarray
    weights: np.ndarray


def _upper_limit(nu):
    w = 1.0
    while mwright(nu, np.array([w]))[0] > _TAIL:
        w *= 1.25
    return w


@lru_cache(maxsize=32)
def _rule(nu, width):
    wmax = _upper_limit(nu)
    head = np.geomspace(1e-10, min(width, 0.05), 96)
    body = np.arange(head[-1], wmax, width)[1:]
    edges = np.concatenate(([0.0], head, body, [wmax]))
    x, wt = leggauss(_PANEL_ORDER)
    a, b = edges[:-1], edges[1:]
    nodes = (a[:, None] + 0.5 * (b - a)[:, None] * (x + 1.0)).ravel()
    weights = (0.5 * (b - a)[:, None] * wt).ravel() * mwright(nu, nodes)
    return WrightRule(nu, nodes, weights)


def wright_rule(nu, scale=1.0):
    """Quadrature rule for ``W ~ M_nu`` resolving features of width ``1/sqrt(scale)``.

    ``scale`` is the largest rate multiplying ``W`` in the integrands (for
    example ``(lambda + k mu) t**nu``).  Panel widths are rounded to powers of
    two so that rules are shared between nearby scales.
    """
    width = min(0.05, 0.5 / np.sqrt(max(scale, 1.0)), 2.0 * (1.0 - nu))
    width = 2.0 ** np.floor(np.log2(width))
    return _rule(float(nu), float(width))


def subordinated_mean(nu, t, func, scale=1.0):
    """``E[func(L_nu(t))]`` for a vectorised ``func``; ``nu = 1`` gives ``func(t)``."""
    if nu == 1.0 or t == 0.0:
        return float(np.asarray(func(np.array([float(t)])))[0])
    rule = wright_rule(nu, scale)
    return float(rule.weights @ func(t ** nu * rule.nodes))


def _kernel_scale(c, dmax):
    # kernels peaked at w = d/c only reach the uniform panels when d > 0.05 c
    return c if dmax + 12.0 * np.sqrt(dmax) + 40.0 >= 0.05 * c else 1.0


def _windows(x):
    spread = 12.0 * np.sqrt(x) + 40.0
    return x - spread, x + spread


def poisson_moments(nu, c, dmax, moment=0):
    """``E[W**moment * pois(d-1; c W)]`` for ``d = 1..dmax``.

    With ``c = rate * t**nu`` and ``moment = 0`` this is
    ``rate**(d-1) * t**(nu*(d-1)) * E^d_{nu,nu*(d-1)+1}(-rate t**nu)``.
    ``nu = 1`` degenerates to ``W = 1``.
    """
    d = np.arange(1, dmax + 1, dtype=float)
    if nu == 1.0:
        x = np.array([float(c)])
        q = np.array([1.0])
    else:
        rule = wright_rule(nu, _kernel_scale(c, dmax))
        x = c * rule.nodes
        q = rule.weights * rule.nodes ** moment
    if c == 0.0:
        out = np.zeros(dmax)
        out[0] = q.sum() if nu != 1.0 else 1.0
        return out
    lo, hi = _windows(x)
    out = np.zeros(dmax)
    logx = np.log(x)
    for start in range(0, dmax, 256):
        dd = d[start:start + 256] - 1.0
        i0 = np.searchsorted(hi, dd[0])
        i1 = np.searchsorted(lo, dd[-1], side="right")
        if i1 <= i0:
            continue
        lt = dd[None, :] * logx[i0:i1, None] - x[i0:i1, None] - gammaln(dd + 1.0)[None, :]
        out[start:start + 256] = q[i0:i1] @ np.exp(lt)
    return out


def gamma_cdf_moments(nu, c, dmax):
    """``E[P(d, c W)]`` for ``d = 1..dmax`` with ``P`` the regularised lower gamma.

    Equals ``rate**d * t**(nu*d) * E^d_{nu,nu*d+1}(-rate t**nu)`` for
    ``c = rate * t**nu``.
    """
    d = np.arange(1, dmax + 1, dtype=float)
    if nu == 1.0:
        return gammainc(d, c)
    rule = wright_rule(nu, _kernel_scale(c, dmax))
    x = c * rule.nodes
    q = rule.weights
    if c == 0.0:
        return np.zeros(dmax)
    lo, hi = _windows(x)
    # nodes whose whole window sits above d-1 contribute P = 1
    tail = np.concatenate((np.cumsum(q[::-1])[::-1], [0.0]))
    out = np.zeros(dmax)
    for start in range(0, dmax, 256):
        dd = d[start:start + 256]
        i0 = np.searchsorted(hi, dd[0] - 1.0)
        i1 = np.searchsorted(lo, dd[-1] - 1.0, side="right")
        block = np.zeros(dd.size)
        if i1 > i0:
            block = q[i0:i1] @ gammainc(dd[None, :], x[i0:i1, None])
        out[start:start + 256] = block + tail[i1]
    return out
