"""Mean queue length, busy period and conditional waiting times.

Metric series carry ``gamma = nu d + 1``; each term equals
``X E[P(d, Lam L_nu(t))] / Lam^d`` with ``P`` the regularised lower incomplete
gamma function, so they share the scaled weights of :mod:`fracerlang.transient`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from scipy.special import gammainc, gammaincc, gammaln

from . import mlfun, randvar, transient, wright
from .errors import DomainError, QuadratureError, SeriesConvergenceError
from .mlfun import DEFAULT_CONTROL
from .transient import QueueParams

__all__ = [
    "WaitContext",
    "mean_queue_length",
    "mean_queue_length_integral",
    "mean_queue_length_laplace",
    "frac_integral_p0",
    "frac_integral_p0_quadrature",
    "busy_period_cdf",
    "busy_period_cdf_array",
    "busy_period_laplace",
    "classical_busy_period_cdf",
    "waiting_density_conditional",
    "waiting_cdf_conditional",
    "waiting_laplace_conditional",
    "waiting_mass",
    "waiting_integral",
    "classical_waiting_density",
]


@dataclass(frozen=True)
class WaitContext:
    """Observation time ``t``, last phase completion ``t0 <= t``, ``n`` phases ahead."""

    t: float
    t0: float
    n: int

    def __post_init__(self):
        if not (0.0 <= self.t0 <= self.t) or self.t <= 0:
            raise DomainError("need 0 <= t0 <= t and t > 0")
        if self.n < 1 or int(self.n) != self.n:
            raise DomainError("n must be an integer >= 1")

    @property
    def elapsed(self):
        return self.t - self.t0


# ---------------------------------------------------------------------------
# metric series


def _metric_tail(nu, c, order):
    """Bound on ``sum_{d > order} E[P(d, c W)]`` by ``E[c W P(order - 1, c W)]``."""
    if nu == 1.0:
        return float(c * gammainc(order - 1, c))
    rule = wright.wright_rule(nu, 1.0)
    x = c * rule.nodes
    return float(rule.weights @ (x * gammainc(order - 1, x)))


def _metric_series(p, weights_of, t, control):
    """``sum_d w_hat[d] E[P(d, Lam L)]`` truncated with the tail bound above."""
    c = p.total_rate * t ** p.nu
    d = 32
    while True:
        w = weights_of(d)
        bound = max(1.0, float(np.max(np.abs(w))))
        if bound * _metric_tail(p.nu, c, d) < control.abs_tol / 10:
            break
        d *= 2
        if d > control.max_terms:
            raise SeriesConvergenceError("metric series truncation too long", index="delta",
                                         terms=d)
    kern = wright.gamma_cdf_moments(p.nu, c, d)
    return math.fsum(w[1:] * kern)


def _w0(p):
    key = transient._key(p)
    return lambda d: transient._w0_hat(key, d)


def frac_integral_p0(p: QueueParams, t, control=None):
    """``I^nu p0 (t) = sum_{m,r} C0_{m,r} t^(gammaM-1) E^{delta0}_{nu,gammaM}(-Lam t^nu)``
    with ``gammaM = nu delta0 + 1``."""
    control = control or DEFAULT_CONTROL
    t = transient._check_time(t)
    if t == 0.0:
        return 0.0
    return _metric_series(p, _w0(p), t, control) / p.total_rate


def mean_queue_length(p: QueueParams, t, control=None):
    """Mean queue length in phases from the closed-form series."""
    control = control or DEFAULT_CONTROL
    t = transient._check_time(t)
    if t == 0.0:
        return 0.0
    drift = p.k * (p.lam - p.mu) * t ** p.nu / math.gamma(p.nu + 1.0)
    series = _metric_series(p, _w0(p), t, control)
    return drift + p.phase_rate / p.total_rate * series


def frac_integral_p0_quadrature(p: QueueParams, t, control=None):
    """Riemann-Liouville integral of ``frac_p0`` by direct quadrature.

    Uses ``tau = t - u^(1/nu)``, which removes the ``(t - tau)^(nu-1)`` singularity.
    """
    from .harness.oracles import riemann_liouville

    control = control or DEFAULT_CONTROL
    return riemann_liouville(lambda s: transient.frac_p0(p, s, control), p.nu, t, tol=1e-11)


def mean_queue_length_integral(p: QueueParams, t, control=None):
    """``k(lam - mu) t^nu / Gamma(nu + 1) + k mu I^nu p0 (t)`` with quadrature for ``I^nu``."""
    t = transient._check_time(t)
    if t == 0.0:
        return 0.0
    drift = p.k * (p.lam - p.mu) * t ** p.nu / math.gamma(p.nu + 1.0)
    return drift + p.phase_rate * frac_integral_p0_quadrature(p, t, control)


def _laplace_weighted(p, weights_of, v, control):
    """``sum_d w_hat[d] (Lam/(Lam+v^nu))^d / Lam`` with adaptive order."""
    d = transient._laplace_order(p, v, control)
    while True:
        w = weights_of(d)
        need = transient._laplace_order(p, v, control, 10.0 * max(1.0, float(np.max(np.abs(w)))))
        if need <= d:
            return transient._laplace_sum(p, w, v, control)
        d = need


def mean_queue_length_laplace(p: QueueParams, v, control=None):
    """``k(lam-mu) / v^(nu+1) + k mu sum C0 v^(nu delta0 - gammaM) / (Lam + v^nu)^delta0``."""
    control = control or DEFAULT_CONTROL
    series = _laplace_weighted(p, _w0(p), v, control)
    return p.k * (p.lam - p.mu) / v ** (p.nu + 1.0) + p.phase_rate * series / v


def _busy_weights(p):
    key = transient._key(p)
    return lambda d: transient._busy_hat(key, d)


def busy_period_cdf(p: QueueParams, t, control=None):
    """``B(t) = sum_r kmu C0_{k,r} t^(gammaB-1) E^{delta0_{k,r}}_{nu,gammaB}(-Lam t^nu)``."""
    control = control or DEFAULT_CONTROL
    t = transient._check_time(t)
    if t == 0.0:
        return 0.0
    value = p.phase_rate / p.total_rate * _metric_series(p, _busy_weights(p), t, control)
    if value > 1.0 + 2 * control.abs_tol:
        raise SeriesConvergenceError(f"busy-period CDF {value} exceeds one", index="r")
    return min(value, 1.0)


def _classical_busy(p, y, control):
    """Classical busy-period CDF ``(k mu / Lam) sum_d w_hat[d] P(d, Lam y)`` for an array ``y``.

    Orders below the Poisson window of ``Lam y`` contribute their full weight.
    """
    x = p.total_rate * np.asarray(y, dtype=float)
    top = int(np.max(x) + 12.0 * math.sqrt(np.max(x)) + 64)
    dmax = 1 << max(top - 1, 31).bit_length()
    w = transient._busy_hat(transient._key(p), dmax)
    if dmax > control.max_terms * 8:
        raise SeriesConvergenceError("busy-period order too large", index="r", terms=dmax)
    cum = np.concatenate(([0.0], np.cumsum(w[1:])))
    out = np.empty(x.size)
    for i, xi in enumerate(x):
        spread = 12.0 * math.sqrt(xi) + 40.0
        lo = max(1, int(xi - spread))
        hi = min(dmax, int(xi + spread) + 1)
        d = np.arange(lo, hi + 1)
        out[i] = cum[lo - 1] + w[lo:hi + 1] @ gammainc(d, xi)
    return p.phase_rate / p.total_rate * out


def busy_period_cdf_array(p: QueueParams, ts, control=None):
    """Vectorised :func:`busy_period_cdf` for many times.

    The classical CDF ``B1(y)`` is tabulated on a log grid covering every
    ``t^nu w`` needed, interpolated by a cubic spline in ``log y``, and
    averaged against the M-Wright rule.  Accuracy is checked on grid midpoints.
    """
    from scipy.interpolate import CubicSpline

    control = control or DEFAULT_CONTROL
    ts = np.asarray(ts, dtype=float)
    out = np.zeros(ts.shape)
    pos = ts > 0
    if not pos.any():
        return out
    if p.nu == 1.0:
        out[pos] = _classical_busy(p, ts[pos], control)
        return out
    rule = wright.wright_rule(p.nu, 1.0)
    ymax = float(np.max(ts[pos])) ** p.nu * rule.nodes[-1]
    ymin = min(1e-6 / p.total_rate, ymax / 10)
    u = np.linspace(math.log(ymin), math.log(ymax), 1201)
    spline = CubicSpline(u, _classical_busy(p, np.exp(u), control))
    mid = 0.5 * (u[1:] + u[:-1])
    gap = np.max(np.abs(spline(mid[::7]) - _classical_busy(p, np.exp(mid[::7]), control)))
    if gap > 1e-9:
        raise QuadratureError(f"busy-period table interpolation error {gap:.1e}")

    def b1(y):
        y = np.clip(y, ymin, ymax)
        vals = spline(np.log(y))
        # below ymin the CDF is of order (Lam y)^k and negligible
        return np.where(y <= ymin, 0.0, vals)

    tp = ts[pos]
    vals = np.empty(tp.size)
    for lo in range(0, tp.size, 256):
        y = np.outer(tp[lo:lo + 256] ** p.nu, rule.nodes)
        vals[lo:lo + 256] = b1(y) @ rule.weights
    out[pos] = np.clip(vals, 0.0, 1.0)
    return out


def busy_period_laplace(p: QueueParams, v, control=None):
    """``sum_r C^B_r v^(nu deltaB - gammaB) / (Lam + v^nu)^deltaB``."""
    control = control or DEFAULT_CONTROL
    return p.phase_rate * _laplace_weighted(p, _busy_weights(p), v, control) / v


def classical_busy_period_cdf(p: QueueParams, t, control=None):
    """Classical busy-period CDF, each term integrated by adaptive quadrature:

    ``sum_r k lam^r (k mu)^(k(r+1)) / (r! Gamma(rk+k+1)) int_0^t z^(k+r(k+1)-1) e^(-Lam z) dz``.
    """
    control = control or DEFAULT_CONTROL
    t = transient._check_time(t)
    k, lam_tot = p.k, p.total_rate
    terms = []
    r = 0
    while True:
        d = k + r * (k + 1)
        logc = (math.log(k) + r * math.log(p.lam) + k * (r + 1) * math.log(p.phase_rate)
                - gammaln(r + 1.0) - gammaln(r * k + k + 1.0))

        def f(z, d=d, logc=logc):
            return math.exp(logc + (d - 1) * math.log(z) - lam_tot * z) if z > 0 else 0.0

        val, err = integrate.quad(f, 0.0, t, epsabs=1e-15, epsrel=1e-13, limit=200,
                                  points=[min(t, (d - 1) / lam_tot)] if 0 < (d - 1) / lam_tot < t else None)
        terms.append(val)
        if r > 2 and val < control.abs_tol / 100 and d - 1 > lam_tot * t:
            break
        r += 1
        if r > control.max_terms:
            raise SeriesConvergenceError("busy-period series did not converge", index="r")
    return math.fsum(terms)


# ---------------------------------------------------------------------------
# conditional waiting time

_GL_X, _GL_W = leggauss(96)
_GL_Y = 0.5 * (_GL_X + 1.0)
_GL_WY = 0.5 * _GL_W
_PANEL_X, _PANEL_W = leggauss(16)
_CHECK_X, _CHECK_W = leggauss(10)


def _singular_rule(a, nu):
    """Nodes ``u`` on ``[0, a]`` and weights absorbing a ``u^(nu-1)`` endpoint singularity.

    ``u = a y^(1/nu)`` maps Gauss-Legendre nodes in ``y``.
    """
    u = a * _GL_Y ** (1.0 / nu)
    w = _GL_WY * (a / nu) * _GL_Y ** (1.0 / nu - 1.0)
    return u, w


def _panel_rule(a, b, x=_PANEL_X, w=_PANEL_W):
    """Composite Gauss-Legendre on panels ``[a_i, b_i]``."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    nodes = (a[:, None] + half[:, None] * (x + 1.0)).ravel()
    return nodes, (half[:, None] * w).ravel()


def _graded_rule(upper, head, nu, singular, x=_PANEL_X, w=_PANEL_W):
    """Rule on ``[0, upper]``: one head panel ``[0, h]`` then doubling panels.

    The head panel takes the singular substitution when ``singular``.
    """
    h = min(upper, head)
    if singular:
        u0, w0 = _singular_rule(h, nu)
    else:
        u0, w0 = 0.5 * h * (_GL_X + 1.0), 0.5 * h * _GL_W
    if h >= upper:
        return u0, w0
    count = max(1, int(math.ceil(math.log2(upper / h))))
    edges = np.geomspace(h, upper, count + 1)
    u1, w1 = _panel_rule(edges[:-1], edges[1:], x, w)
    return np.concatenate((u0, u1)), np.concatenate((w0, w1))


def _wait_parts(ctx, p):
    kmu = p.phase_rate
    rml = randvar.RMLParams(p.nu, kmu, ctx.elapsed)
    return kmu, rml


def _feature_scale(ctx, p):
    # time scale of the Mittag-Leffler kernels and of the residual offset
    tau = p.phase_rate ** (-1.0 / p.nu)
    return 0.05 * (min(tau, ctx.elapsed) if ctx.elapsed > 0 else tau)


def _convolve(x, nu, head, tail, tail_singular, scale, panel=(_PANEL_X, _PANEL_W)):
    """``int_0^x head(u) tail(x - u) du`` split at ``x/2``.

    ``head`` may carry a ``u^(nu-1)`` singularity at zero and gets the
    substitution rule; ``tail`` gets it only when ``tail_singular``.  Away
    from the endpoints the panels double in width from ``scale``.
    """
    u, w = _graded_rule(0.5 * x, scale, nu, True, *panel)
    left = w @ (head(u) * tail(x - u))
    s, ws = _graded_rule(0.5 * x, scale, nu, tail_singular, *panel)
    right = ws @ (head(x - s) * tail(s))
    return float(left + right)


def waiting_density_conditional(ctx: WaitContext, p: QueueParams, xi, full_output=False):
    """Density of the wait given ``t0`` and ``n``: ``GE_nu(n-1, k mu) * RML_nu(t-t0, k mu)``.

    The convolution splits at ``xi/2``; singular endpoints use the
    substitution ``u = a y^(1/nu)`` and the rest doubling Gauss-Legendre panels.
    With ``full_output=True`` returns ``(density, error_estimate)``, the
    estimate being the gap to 10-point panels.
    """
    kmu, rml = _wait_parts(ctx, p)
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0):
        raise DomainError("xi must be nonnegative")

    def finish(out, err):
        if xi.ndim == 0:
            out, err = float(np.asarray(out).ravel()[0]), float(np.asarray(err).ravel()[0])
        return (out, err) if full_output else out

    if p.nu == 1.0:
        n = ctx.n
        out = np.exp(n * math.log(kmu) + (n - 1) * np.log(np.where(xi > 0, xi, 1.0))
                     - kmu * xi - gammaln(n))
        if n > 1:
            out = np.where(xi > 0, out, 0.0)
        return finish(out, 4 * np.finfo(float).eps * out)
    if ctx.n == 1:
        out = np.asarray(randvar.rml_pdf(rml, xi))
        return finish(out, 1e-12 * np.abs(out))
    flat = np.atleast_1d(xi).ravel()
    out = np.empty(flat.size)
    err = np.zeros(flat.size)
    scale = _feature_scale(ctx, p)

    def head(u):
        return randvar.ge_pdf(p.nu, ctx.n - 1, kmu, u)

    def tail(u):
        return randvar.rml_pdf(rml, u)

    singular = ctx.elapsed == 0.0
    for i, x in enumerate(flat):
        if x == 0.0:
            out[i] = 0.0
            continue
        out[i] = _convolve(x, p.nu, head, tail, singular, scale)
        if full_output:
            err[i] = abs(out[i] - _convolve(x, p.nu, head, tail, singular, scale,
                                            (_CHECK_X, _CHECK_W)))
    return finish(out.reshape(xi.shape), err.reshape(xi.shape))


def waiting_cdf_conditional(ctx: WaitContext, p: QueueParams, xi):
    """CDF of the conditional wait: ``int_0^xi f_GE(u) F_RML(xi - u) du``."""
    kmu, rml = _wait_parts(ctx, p)
    xi = float(xi)
    if xi <= 0:
        return 0.0
    if p.nu == 1.0:
        return float(gammainc(ctx.n, kmu * xi))
    if ctx.n == 1:
        return randvar.rml_cdf(rml, xi)
    return _convolve(xi, p.nu,
                     lambda u: randvar.ge_pdf(p.nu, ctx.n - 1, kmu, u),
                     lambda u: np.asarray(randvar.rml_cdf(rml, u)),
                     ctx.elapsed == 0.0, _feature_scale(ctx, p))


def _wait_upper(ctx, p, survival):
    upper = 1.0 / p.phase_rate
    while 1.0 - waiting_cdf_conditional(ctx, p, upper) > survival:
        upper *= 2.0
        if upper > 1e12:
            raise QuadratureError("waiting-time tail does not decay")
    return upper


def waiting_integral(ctx: WaitContext, p: QueueParams, weight=None, upper=None,
                     survival=1e-4):
    """``int_0^upper weight(xi) w(xi) d xi`` with an error estimate.

    ``upper`` defaults to the point where the conditional survival drops below
    ``survival``.  Composite Gauss-Legendre on doubling panels after a
    singular head panel; the error estimate is the gap to a 10-point rule on
    the same panels.  Returns ``(value, error, upper)``.
    """
    if upper is None:
        upper = _wait_upper(ctx, p, survival)
    # near zero the density is xi^(j nu - 1) times a series in xi^nu, except
    # for n = 1 with t0 < t where it is smooth
    singular = p.nu < 1.0 and not (ctx.n == 1 and ctx.elapsed > 0.0)
    scale = _feature_scale(ctx, p) if p.nu < 1.0 else 0.05 / p.phase_rate
    values = []
    for x, w in ((_PANEL_X, _PANEL_W), (_CHECK_X, _CHECK_W)):
        nodes, weights = _graded_rule(upper, scale, p.nu, singular, x, w)
        dens = np.asarray(waiting_density_conditional(ctx, p, nodes))
        if weight is not None:
            dens = dens * weight(nodes)
        values.append(float(weights @ dens))
    return values[0], abs(values[0] - values[1]), upper


def waiting_mass(ctx: WaitContext, p: QueueParams, upper=None):
    """Integral of the conditional density over ``[0, upper]`` and the mass beyond.

    ``upper`` defaults to the point where the conditional survival drops
    below ``1e-4``; the tail decays only like ``xi^(-nu)``.  Returns
    ``(integral, tail)``; the tail comes from the CDF.
    """
    value, err, upper = waiting_integral(ctx, p, upper=upper)
    if err > 1e-6:
        raise QuadratureError(f"waiting-density integral error {err:.1e}")
    return value, 1.0 - waiting_cdf_conditional(ctx, p, upper)


def _residual_transform(nu, rate, elapsed, v, control):
    """Laplace transform of the residual Mittag-Leffler density.

    ``1 - e^(v t') / E_nu(-rate t'^nu) * sum_j (-x)^j Q(nu j + 1, v t')`` with
    ``x = rate / v^nu``.  The series converges only for ``x < 1``; otherwise its
    continuation ``1/(1+x) - sum_j (-x)^j P(nu j + 1, v t')`` is summed.
    """
    a = v * elapsed
    x = rate / v ** nu
    base = mlfun.ml(nu, -rate * elapsed ** nu, control)
    terms = []
    if x < 0.5:
        for j in range(control.max_terms):
            s = nu * j + 1.0
            # e^a Gamma(s, a) / Gamma(s) via the public incomplete gamma
            val = math.exp(a + math.log(mlfun.upper_incomplete_gamma(s, a)) - gammaln(s))
            term = (-x) ** j * val
            terms.append(term)
            if abs(term) < control.abs_tol * 1e-2 and j > 2:
                break
        total = math.fsum(terms)
    else:
        for j in range(control.max_terms):
            s = nu * j + 1.0
            # e^a P(s, a) = sum_i a^(s+i) / Gamma(s+i+1), kept in log form
            lp = math.log(gammainc(s, a)) + a if gammainc(s, a) > 0 else -math.inf
            term = (-1) ** j * math.exp(j * math.log(x) + lp) if lp > -math.inf else 0.0
            terms.append(term)
            if abs(term) < control.abs_tol * 1e-2 and j > 2 and s > a:
                break
        total = math.exp(a) / (1.0 + x) - math.fsum(terms)
    return 1.0 - total / base


def waiting_laplace_conditional(ctx: WaitContext, p: QueueParams, v, control=None):
    """Laplace transform ``(k mu / (k mu + v^nu))^(n-1)`` times the residual transform."""
    control = control or DEFAULT_CONTROL
    if not v > 0:
        raise DomainError("v must be positive")
    kmu = p.phase_rate
    ge = (kmu / (kmu + v ** p.nu)) ** (ctx.n - 1)
    if p.nu == 1.0:
        return ge * kmu / (kmu + v)
    if ctx.elapsed == 0.0:
        return ge * kmu / (kmu + v ** p.nu)
    return ge * _residual_transform(p.nu, kmu, ctx.elapsed, v, control)


def classical_waiting_density(p: QueueParams, t, xi, control=None):
    """Classical unconditional waiting density of an arrival at ``t``.

    Returns ``(density, atom)`` where ``density = sum_{m>=1} P_m(t) Erlang(m, k mu)(xi)``
    and ``atom = P_0(t)`` is the probability of no wait.
    """
    if p.nu != 1.0:
        raise DomainError("the unconditional waiting law is only available at nu = 1")
    probs = transient.state_probabilities(p, t, control=control)
    m = np.arange(1, probs.size)
    kmu = p.phase_rate
    xi = float(xi)
    if xi <= 0:
        raise DomainError("xi must be positive")
    dens = np.exp(m * math.log(kmu) + (m - 1) * math.log(xi) - kmu * xi - gammaln(m))
    return math.fsum(probs[1:] * dens), float(probs[0])
