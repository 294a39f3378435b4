import math

import mpmath
import numpy as np
import pytest
from scipy import integrate
from scipy.special import gamma

from fracerlang import wright
from fracerlang.errors import DomainError, SeriesConvergenceError


def _mwright_mp(nu, w):
    # series at 40 digits as an independent oracle
    mpmath.mp.dps = 60
    nu, w = mpmath.mpf(nu), mpmath.mpf(w)
    return float(mpmath.fsum((-w) ** n / mpmath.factorial(n) * mpmath.rgamma(1 - nu - nu * n)
                             for n in range(400)))


@pytest.mark.parametrize("nu", [0.3, 0.5, 0.75, 0.9])
def test_rule_normalised_and_moments(nu):
    rule = wright.wright_rule(nu)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-12)
    for n in (1, 2, 3):
        # E[W^n] = n! / Gamma(1 + n nu)
        expect = math.factorial(n) / gamma(1 + n * nu)
        assert rule.weights @ rule.nodes ** n == pytest.approx(expect, rel=1e-10)


@pytest.mark.parametrize("nu,w", [(0.5, 0.3), (0.5, 2.0), (0.75, 0.7), (0.75, 1.5), (0.3, 3.0),
                                  (0.05, 0.8), (0.9, 0.45), (0.9, 0.55), (0.99, 0.9)])
def test_mwright_against_mpmath(nu, w):
    assert wright.mwright(nu, w) == pytest.approx(_mwright_mp(nu, w), rel=1e-10)


def test_mwright_half_is_half_normal():
    # M_{1/2}(w) = exp(-w^2/4)/sqrt(pi)
    w = np.linspace(0.0, 6.0, 13)
    assert np.allclose(wright.mwright(0.5, w), np.exp(-w ** 2 / 4) / np.sqrt(np.pi),
                       rtol=1e-11, atol=1e-300)


def _mwright_kanter_mp(nu, w):
    # Kanter integral at 30 digits with the singular end split geometrically
    mpmath.mp.dps = 30
    nu, w = mpmath.mpf(nu), mpmath.mpf(w)
    q = 1 / (1 - nu)

    def f(u):
        a = mpmath.exp(q * mpmath.log(mpmath.sin(nu * u) / mpmath.sin(u))) \
            * mpmath.sin((1 - nu) * u) / mpmath.sin(nu * u)
        z = a * w ** q
        return z * mpmath.exp(-z)

    pts = [0, mpmath.pi / 2] + [mpmath.pi * (1 - mpmath.mpf(2) ** -j / 2) for j in range(1, 40)]
    return float(mpmath.quad(f, pts) / (mpmath.pi * (1 - nu) * w))


@pytest.mark.parametrize("nu,w", [(0.9, 1.2), (0.99, 1.0), (0.99, 1.2), (0.995, 1.01),
                                  (0.999, 0.98), (0.999, 1.0)])
def test_mwright_near_one_against_kanter_integral(nu, w):
    assert wright.mwright(nu, w) == pytest.approx(_mwright_kanter_mp(nu, w), rel=1e-9)


@pytest.mark.parametrize("nu", [0.9, 0.99, 0.995, 0.999])
def test_rule_stays_normalised_near_one(nu):
    rule = wright.wright_rule(nu)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert rule.weights @ rule.nodes ** 2 == pytest.approx(2 / gamma(1 + 2 * nu), rel=1e-11)


def test_mwright_domain():
    with pytest.raises(DomainError):
        wright.mwright(1.0, 1.0)
    with pytest.raises(SeriesConvergenceError):
        wright.mwright(0.9995, 1.0)


def test_subordinated_mean_is_laplace_of_inverse_subordinator():
    # E[exp(-s L(t))] = E_nu(-s t^nu); at nu = 1/2 that is erfcx(s sqrt t)
    from scipy.special import erfcx
    for s, t in [(1.0, 1.0), (3.0, 0.5), (40.0, 2.0)]:
        got = wright.subordinated_mean(0.5, t, lambda y: np.exp(-s * y), scale=s * t ** 0.5)
        assert got == pytest.approx(erfcx(s * math.sqrt(t)), rel=1e-10)


def test_poisson_moments_match_direct_quadrature():
    nu, c = 0.75, 7.0
    out = wright.poisson_moments(nu, c, 5)
    for d in range(1, 6):
        f = lambda w: wright.mwright(nu, w) * (c * w) ** (d - 1) * math.exp(-c * w) / math.factorial(d - 1)
        ref = integrate.quad(f, 0, 60, limit=400, epsabs=1e-14)[0]
        assert out[d - 1] == pytest.approx(ref, rel=1e-8, abs=1e-14)
