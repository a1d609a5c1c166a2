import numpy as np
import pytest

from rscycle.model import FeedbackSpec, RegionParams, ValidationError
from rscycle.pde import flux_residual, mass, steady_profile

RP = RegionParams(s=0.25, r=0.75)


def test_steady_level_frozen_amplifying():
    # c = 1, |S| = 0.25, gamma = 0.6: speed on R is 1.15, density 1/1.15
    prof = steady_profile(1.0, RP, FeedbackSpec.linear(0.6))
    assert prof.on_r_level == pytest.approx(1.0 / 1.15, abs=1e-15)
    assert prof.flux == 1.0
    assert mass(prof) == pytest.approx(0.75 + 0.25 / 1.15, abs=1e-15)


def test_steady_level_frozen_damping():
    prof = steady_profile(1.0, RP, FeedbackSpec.linear(-0.6))
    assert prof.on_r_level == pytest.approx(1.0 / 0.85, abs=1e-15)
    assert mass(prof) == pytest.approx(0.75 + 0.25 / 0.85, abs=1e-15)


def test_profile_piecewise_values():
    prof = steady_profile(1.0, RP, FeedbackSpec.linear(0.6))
    xs = np.array([0.0, 0.1, 0.5, 0.75, 0.9, 0.999])
    u = prof.u(xs)
    b = prof.b(xs)
    np.testing.assert_allclose(u[:3], 1.0)
    np.testing.assert_allclose(u[3:], 1.0 / 1.15)
    np.testing.assert_allclose(b[:3], 1.0)
    np.testing.assert_allclose(b[3:], 1.15)


def test_flux_constant_everywhere():
    rng = np.random.default_rng(9)
    for _ in range(20):
        s = rng.uniform(0.05, 0.4)
        r = rng.uniform(s + 0.1, 0.95)
        gamma = rng.uniform(-0.8, 0.8)
        c = rng.uniform(0.2, 1.0 / s * 0.99)
        prof = steady_profile(c, RegionParams(s=s, r=r), FeedbackSpec.linear(gamma))
        assert flux_residual(prof) < 1e-13


def test_mass_equals_integral_of_u():
    prof = steady_profile(0.8, RP, FeedbackSpec.linear(0.5))
    xs = np.linspace(0.0, 1.0, 200001)
    numeric_mass = np.trapezoid(prof.u(xs), xs)
    assert numeric_mass == pytest.approx(mass(prof), abs=1e-9)


def test_scales_linearly_in_c():
    fs = FeedbackSpec.none()
    p1 = steady_profile(0.5, RP, fs)
    p2 = steady_profile(1.0, RP, fs)
    assert p2.on_r_level == pytest.approx(2.0 * p1.on_r_level)


def test_validation():
    fs = FeedbackSpec.linear(0.6)
    with pytest.raises(ValidationError):
        steady_profile(0.0, RP, fs)
    with pytest.raises(ValidationError):
        steady_profile(-1.0, RP, fs)
    # signal argument c*s would leave [0, 1]
    with pytest.raises(ValidationError):
        steady_profile(5.0, RP, fs)
