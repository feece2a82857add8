import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from tumorstab.errors import AdmissibilityError, ConvergenceError, DomainError, TrajectoryError
from tumorstab.periodic_orbit import (
    ModelParams, NutrientProfile, find_periodic_radius, integrate_period, mean_nutrient,
    radius_rhs, stationary_radius,
)
from tumorstab.special_fn import p0


def bisect_constant_root(phi_value, sigma_tilde):
    # oracle: closed form of P_0 and scipy root finding
    f = lambda R: phi_value * (1 / (R * math.tanh(R)) - 1 / R**2) - sigma_tilde / 3
    return brentq(f, 1e-3, 1e3, xtol=1e-15, rtol=1e-15)


def test_model_params_validation():
    with pytest.raises(DomainError):
        ModelParams(-1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        ModelParams(1.0, 1.0, 1.0, gamma=2.0)
    assert ModelParams(1.0, 1.0, 1.0).with_mu(3.0).mu == 3.0


def test_profile_validation():
    with pytest.raises(DomainError):
        NutrientProfile.cosine(1.0, 1.5, 1.0)
    with pytest.raises(DomainError):
        NutrientProfile.tabulated([1.0, 2.0, 1.5], 1.0)
    with pytest.raises(DomainError):
        NutrientProfile("square", 1.0, mean=1.0)


def test_profile_from_csv(tmp_path):
    t = np.linspace(0, 2.0, 9)
    path = tmp_path / "phi.csv"
    path.write_text("t,phi\n" + "".join(f"{a},{2 + math.sin(math.pi * a)}\n" for a in t))
    phi = NutrientProfile.from_csv(path)
    assert phi.period == 2.0
    assert phi(0.5) == pytest.approx(3.0, abs=1e-2)
    bad = tmp_path / "bad.csv"
    bad.write_text("0,1\n0.3,2\n1.0,1\n")
    with pytest.raises(DomainError):
        NutrientProfile.from_csv(bad)


def test_mean_nutrient_examples():
    assert mean_nutrient(NutrientProfile.cosine(2.0, 0.5, 1.0)) == pytest.approx(2.0, abs=1e-14)
    assert mean_nutrient(NutrientProfile.tabulated(np.full(17, 3.0), 1.0)) == pytest.approx(3.0)
    t = np.linspace(0, 1, 257)
    tab = NutrientProfile.tabulated(1 + t * (1 - t), 1.0)
    assert mean_nutrient(tab) == pytest.approx(7 / 6, abs=1e-13)


def test_rhs_examples():
    phi = NutrientProfile.constant(1.0, 1.0)
    params = ModelParams(1.0, 1.0, 1.0)
    assert radius_rhs(0.0, 1.0, params, phi) == pytest.approx(1 / math.tanh(1) - 1 - 1 / 3, abs=1e-15)
    # coth(1) - 1 - 1/3; a commonly quoted -0.019965 does not match the closed form
    assert radius_rhs(0.0, 1.0, params, phi) == pytest.approx(-0.0202980478, abs=1e-10)
    R_eq = stationary_radius(1.0 * 2, 1.0)
    assert radius_rhs(0.3, R_eq, params, NutrientProfile.constant(2.0, 1.0)) == pytest.approx(0, abs=1e-14)
    small = radius_rhs(0.0, 1e-6, ModelParams(2.0, 1.0, 1.0), NutrientProfile.constant(1.5, 1.0))
    assert small == pytest.approx(2.0 * 1e-6 * (1.5 - 1.0) / 3, rel=1e-9)
    with pytest.raises(DomainError):
        radius_rhs(0.0, 0.0, params, phi)


def test_integrate_period_fixed_point_and_order():
    phi = NutrientProfile.constant(2.0, 1.0)
    params = ModelParams(1.0, 1.0, 1.0)
    R0 = stationary_radius(2.0, 1.0)
    assert integrate_period(R0, params, phi) == pytest.approx(R0, abs=1e-10)
    assert integrate_period(1.0, params, phi) < integrate_period(2.0, params, phi)
    with pytest.raises(DomainError):
        integrate_period(1.0, params, phi, steps=32)


def test_integrate_period_richardson_ratio():
    phi = NutrientProfile.cosine(2.0, 0.5, 1.0)
    params = ModelParams(1.0, 1.0, 1.0)
    a, b, c = (integrate_period(4.0, params, phi, steps=s) for s in (64, 128, 256))
    assert (a - b) / (b - c) == pytest.approx(16.0, rel=0.05)
    ref = solve_ivp(lambda t, R: [radius_rhs(t, R[0], params, phi)], (0, 1), [4.0],
                    method="DOP853", rtol=1e-13, atol=1e-14).y[0, -1]
    assert integrate_period(4.0, params, phi) == pytest.approx(ref, abs=1e-12)


def test_trajectory_error_when_radius_collapses():
    phi = NutrientProfile.constant(0.5, 1.0)
    with pytest.raises(TrajectoryError):
        integrate_period(1e-3, ModelParams(5000.0, 1.0, 1.0), phi, steps=64)


def test_constant_supply_orbit():
    phi = NutrientProfile.constant(2.0, 1.0)
    for mu in (0.1, 3.0):
        orbit = find_periodic_radius(ModelParams(mu, 1.0, 1.0), phi)
        assert orbit.is_constant(1e-10)
        assert orbit.values[0] == pytest.approx(bisect_constant_root(2.0, 1.0), abs=1e-9)
    assert orbit.values[0] == pytest.approx(4.73, abs=0.01)
    assert p0(orbit.values[0]) == pytest.approx(1 / 6, abs=1e-12)


def test_stationary_radius_and_admissibility():
    assert stationary_radius(2.0, 1.0) == pytest.approx(bisect_constant_root(2.0, 1.0), rel=1e-13)
    with pytest.raises(AdmissibilityError, match="mean"):
        find_periodic_radius(ModelParams(1.0, 2.5, 1.0), NutrientProfile.cosine(2.0, 0.5, 1.0))


def test_no_bracket_is_convergence_error():
    with pytest.raises(ConvergenceError):
        find_periodic_radius(ModelParams(0.1, 1.0, 1.0), NutrientProfile.constant(1e4, 1.0))


def test_small_amplitude_continuity():
    R_const = bisect_constant_root(2.0, 1.0)
    devs = []
    for A in (0.2, 0.1, 0.05):
        orbit = find_periodic_radius(ModelParams(1.0, 1.0, 1.0), NutrientProfile.cosine(2.0, A, 1.0))
        devs.append(np.max(np.abs(orbit.values - R_const)))
    assert devs[0] / devs[1] == pytest.approx(2.0, rel=0.1)
    assert devs[1] / devs[2] == pytest.approx(2.0, rel=0.1)


def test_periodic_orbit_properties():
    phi = NutrientProfile.cosine(2.5, 1.0, 2.0, phase=0.4)
    params = ModelParams(0.7, 1.2, 2.0)
    orbit = find_periodic_radius(params, phi)
    assert orbit.values[0] == orbit.values[-1]
    assert abs(integrate_period(orbit.values[0], params, phi) - orbit.values[0]) <= 1e-11
    assert orbit.ode_residual() <= 1e-9
    assert np.all(orbit.values > 0)
    # spline is periodic and agrees with the nodes
    assert orbit(2.0 + 0.3) == pytest.approx(orbit(0.3), abs=1e-14)
    assert orbit.rate(orbit.times[5]) == pytest.approx(orbit.derivs[5], abs=1e-12)


def test_uniqueness_probe():
    rng = np.random.default_rng(7)
    phi = NutrientProfile.cosine(3.0, 1.2, 1.0)
    params = ModelParams(0.5, 1.5, 1.0)
    starts = []
    for _ in range(5):
        lo, hi = 10 ** rng.uniform(-3, -1), 10 ** rng.uniform(2, 3)
        starts.append(find_periodic_radius(params, phi, tol=1e-12, bracket=(lo, hi)).values[0])
    assert np.ptp(starts) <= 10 * 1e-12


def test_poincare_map_monotone():
    phi = NutrientProfile.cosine(3.0, 1.2, 1.0)
    params = ModelParams(0.5, 1.5, 1.0)
    R = np.geomspace(1e-3, 1e3, 40)
    image = [integrate_period(x, params, phi, steps=128) for x in R]
    assert np.all(np.diff(image) > 0)
    g = np.array(image) - R
    assert g[0] > 0 > g[-1]


def test_shifted_profile_shifts_orbit():
    phi = NutrientProfile.cosine(2.0, 0.8, 1.0)
    params = ModelParams(1.0, 1.0, 1.0)
    a = find_periodic_radius(params, phi)
    b = find_periodic_radius(params, phi.shifted(0.25))
    assert b(0.0) == pytest.approx(a(0.25), abs=1e-9)
