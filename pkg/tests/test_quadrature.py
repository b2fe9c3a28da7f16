"""Quadrature layer against independent high-precision oracles."""

import math

import mpmath
import numpy as np
import pytest

from bmcmc.quadrature import (
    GaussianSpec,
    QuadratureError,
    Phi,
    phi,
    romberg,
    truncate_infinite,
)


def test_phi_matches_reference_value():
    assert phi(0.0, GaussianSpec(0.0, 1.0)) == pytest.approx(
        0.3989422804014327, abs=1e-12
    )


def test_Phi_matches_reference_value():
    assert Phi(1.0, GaussianSpec(0.0, 1.0)) == pytest.approx(
        0.8413447460685429, abs=1e-12
    )


def test_phi_and_Phi_against_mpmath_grid():
    mpmath.mp.dps = 40
    rng = np.random.default_rng(11)
    for _ in range(200):
        mu = float(rng.uniform(-5.0, 5.0))
        sigma = float(rng.uniform(0.05, 10.0))
        x = float(rng.uniform(mu - 6.0 * sigma, mu + 6.0 * sigma))
        g = GaussianSpec(mu, sigma)
        z = (mpmath.mpf(x) - mpmath.mpf(mu)) / mpmath.mpf(sigma)
        pdf = mpmath.npdf(z) / mpmath.mpf(sigma)
        cdf = mpmath.ncdf(z)
        assert abs(phi(x, g) - float(pdf)) < 1e-12
        assert abs(Phi(x, g) - float(cdf)) < 1e-12


def test_phi_vectorised_matches_scalar():
    g = GaussianSpec(0.3, 2.0)
    xs = np.linspace(-5.0, 5.0, 17)
    vec_pdf = phi(xs, g)
    vec_cdf = Phi(xs, g)
    for k, x in enumerate(xs):
        assert vec_pdf[k] == phi(float(x), g)
        assert vec_cdf[k] == Phi(float(x), g)


def test_gaussian_spec_rejects_nonpositive_sigma():
    with pytest.raises(ValueError):
        GaussianSpec(0.0, 0.0)
    with pytest.raises(ValueError):
        GaussianSpec(0.0, -1.0)


def test_romberg_cubic_is_exact():
    assert romberg(lambda x: x ** 3, 0.0, 1.0) == pytest.approx(0.25, abs=1e-12)


def test_romberg_zero_width_interval():
    assert romberg(lambda x: 1.0 / x, 3.0, 3.0) == 0.0


def test_romberg_is_linear():
    f = math.sin
    g = math.exp
    combined = romberg(lambda x: 2.0 * f(x) + 3.0 * g(x), 0.0, 1.5, rel_tol=1e-10)
    separate = 2.0 * romberg(f, 0.0, 1.5, rel_tol=1e-10) + 3.0 * romberg(
        g, 0.0, 1.5, rel_tol=1e-10
    )
    assert combined == pytest.approx(separate, rel=1e-9)


def test_romberg_gaussian_mass_against_erf():
    rng = np.random.default_rng(3)
    for _ in range(5):
        mu = float(rng.uniform(-2.0, 2.0))
        sigma = float(rng.uniform(0.3, 3.0))
        g = GaussianSpec(mu, sigma)
        lo = mu - 8.0 * sigma
        hi = mu + 8.0 * sigma
        value = romberg(lambda x: phi(x, g), lo, hi, rel_tol=1e-10, abs_tol=1e-13)
        exact = 0.5 * (math.erf(8.0 / math.sqrt(2.0)) - math.erf(-8.0 / math.sqrt(2.0)))
        assert abs(value - exact) < 1e-9


def test_romberg_partial_gaussian_matches_Phi():
    g = GaussianSpec(0.4, 1.3)
    for upper in (0.0, 0.4, 1.1, 2.7):
        value = romberg(lambda x: phi(x, g), g.mu - 8.0 * g.sigma, upper,
                        rel_tol=1e-10, abs_tol=1e-13)
        assert value == pytest.approx(Phi(upper, g), abs=1e-9)


def test_romberg_nonconvergence_raises_with_estimate():
    # Square-root singularity at 0: trapezoid error decays like h**1.5,
    # far too slow to hit 1e-14 within the level cap.
    with pytest.raises(QuadratureError) as info:
        romberg(lambda x: math.sqrt(abs(x)), 0.0, 1.0, rel_tol=1e-14, abs_tol=0.0)
    err = info.value
    assert err.estimate == pytest.approx(2.0 / 3.0, abs=1e-5)
    assert err.gap > 0.0


def test_truncate_infinite_envelopes():
    specs = [GaussianSpec(0.0, 1.0), GaussianSpec(5.0, 2.0)]
    lo, hi = truncate_infinite((-math.inf, math.inf), specs)
    assert lo == min(0.0 - 8.0 * 1.0, 5.0 - 8.0 * 2.0)
    assert hi == max(0.0 + 8.0 * 1.0, 5.0 + 8.0 * 2.0)


def test_truncate_infinite_keeps_finite_limits():
    specs = [GaussianSpec(0.0, 1.0)]
    assert truncate_infinite((-1.5, 2.5), specs) == (-1.5, 2.5)
    lo, hi = truncate_infinite((-math.inf, 2.5), specs)
    assert (lo, hi) == (-8.0, 2.5)


def test_truncate_infinite_needs_specs():
    with pytest.raises(ValueError):
        truncate_infinite((-math.inf, math.inf), [])
