import math

import numpy as np
import pytest
from scipy.integrate import quad, simpson

from tumorstab.base_state import (
    BaseState, mu_star_3d, mu_star_constant_radius, solve_base_state,
)
from tumorstab.errors import StabilityError
from tumorstab.mode_dynamics import (
    ModePrimitive, classify, closed_loop_part, fit_decay_delta, h_n, h_n_nodes, log_multiplier,
    log_multipliers, mode0_decay_check, mu_star_from_multiplier, multiplier_between,
)
from tumorstab.periodic_orbit import ModelParams, NutrientProfile
from tumorstab.special_fn import pn_table


@pytest.fixture(scope="module")
def const_state():
    return solve_base_state(ModelParams(0.3, 1.0, 1.0), NutrientProfile.constant(2.0, 1.0))


def test_h1_vanishes_identically(stable_state, unstable_state):
    t = np.linspace(0, 3, 1000)
    for state in (stable_state, unstable_state):
        assert np.max(np.abs(h_n(1, t, state))) == 0.0
        assert log_multiplier(1, state) == 0.0


def test_h0_constant_orbit(const_state):
    R = float(const_state.orbit.values[0])
    P = pn_table(R, 1)
    expected = 0.3 / 3 * R**2 * (P[1] - P[0])
    assert expected < 0
    # dR/dt is only zero up to the orbit tolerance
    assert h_n(0, 0.4, const_state) == pytest.approx(expected, abs=1e-10)


def test_h2_constant_orbit_at_threshold(const_state):
    R = float(const_state.orbit.values[0])
    ms = mu_star_constant_radius(R, 1.0)
    state = BaseState(const_state.params.with_mu(ms), const_state.phi, const_state.orbit)
    assert h_n(2, 0.2, state) == pytest.approx(0.0, abs=1e-10)


def test_h_n_matches_formula_pointwise(stable_state):
    t = 0.31
    R = float(stable_state.orbit(t))
    Rdot = float(stable_state.orbit.rate(t))
    mu, sig = stable_state.params.mu, stable_state.params.sigma_tilde
    P = pn_table(R, 5)
    n = 5
    expected = ((R * (P[1] - P[n]) - (n - 1) / R) * Rdot - n / R**3 * (n * (n + 1) / 2 - 1)
                + mu * sig / 3 * R**2 * (P[1] - P[n]))
    assert h_n(n, t, stable_state) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("n", [0, 2, 3, 7, 20])
def test_log_multiplier_against_adaptive_quadrature(stable_state, n):
    oracle, _ = quad(lambda t: h_n(n, t, stable_state), 0, 1, epsabs=1e-13, epsrel=1e-13, limit=200)
    assert log_multiplier(n, stable_state) == pytest.approx(oracle, abs=1e-10)
    assert ModePrimitive(n, stable_state).per_period == pytest.approx(oracle, abs=1e-10)


def test_closed_loop_part_cancels(stable_state, unstable_state):
    for state in (stable_state, unstable_state):
        for n in range(0, 41):
            assert abs(closed_loop_part(n, state)) < 1e-8


def test_threshold_keystone(phi_cos, mu_star):
    state = solve_base_state(ModelParams(mu_star, 1.0, 1.0), phi_cos)
    assert abs(log_multiplier(2, state)) < 1e-8
    assert all(log_multiplier(n, state) < 0 for n in range(3, 11))
    root = mu_star_from_multiplier(1.0, phi_cos)
    assert root == pytest.approx(mu_star, rel=1e-8)


def test_multiplier_between(stable_state):
    assert multiplier_between(2, 0.3, 0.3, stable_state) == 1.0
    lam = log_multiplier(3, stable_state)
    assert multiplier_between(3, 0.3, 1.3, stable_state) == pytest.approx(math.exp(lam), rel=1e-8)
    prev = 1.0
    for k in range(1, 11):
        m = multiplier_between(2, 0.1, 0.1 + k, stable_state)
        assert m < prev
        prev = m
    assert prev < 1
    with pytest.raises(ValueError):
        multiplier_between(2, 1.0, 0.5, stable_state)


def test_affine_in_mu_with_frozen_orbit(stable_state):
    mus = np.linspace(0.05, 0.5, 6)
    for n in (0, 2, 5):
        lam = np.array([log_multiplier(n, stable_state, mu=m) for m in mus])
        slope, icpt = np.polyfit(mus, lam, 1)
        # the mu coefficient is R^2 (P_1 - P_n): negative for n = 0, positive for n >= 2
        assert slope < 0 if n == 0 else slope > 0
        assert np.max(np.abs(lam - (slope * mus + icpt))) < 1e-10


def test_fit_decay_delta(stable_state):
    delta = fit_decay_delta(64, 5.0, stable_state)
    assert delta > 0
    lams = log_multipliers(64, stable_state)
    T = stable_state.orbit.period
    for n in range(2, 65):
        assert lams[n] <= -delta * (n**3 + 1) * T
    for n in range(10, 65):
        assert lams[n] < -(delta / 2) * (n**3 + 1) * T


def test_fit_decay_delta_small_mu_limit(phi_cos):
    mu = 1e-6
    state = solve_base_state(ModelParams(mu, 1.0, 1.0), phi_cos)
    R = state.orbit.values
    mean_inv_cube = simpson(R**-3.0, x=state.orbit.times)
    P = state.pn_nodes(2)
    mean_gain = simpson(R**2 * (P[1] - P[2]), x=state.orbit.times)
    expected = (4.0 * mean_inv_cube - mu / 3.0 * mean_gain) / 9.0
    assert fit_decay_delta(12, 2.0, state) == pytest.approx(expected, rel=1e-8)


def test_fit_decay_delta_near_threshold(phi_cos, mu_star):
    near = solve_base_state(ModelParams(0.99 * mu_star, 1.0, 1.0), phi_cos)
    d = fit_decay_delta(16, 2.0, near)
    assert 0 < d < 0.1 * fit_decay_delta(16, 2.0, solve_base_state(
        ModelParams(0.5 * mu_star, 1.0, 1.0), phi_cos))
    over = solve_base_state(ModelParams(1.01 * mu_star, 1.0, 1.0), phi_cos)
    with pytest.raises(StabilityError):
        fit_decay_delta(16, 2.0, over)


def test_mode0_decay(const_state, stable_state):
    fit = mode0_decay_check(const_state, 3.0)
    assert fit.constant == pytest.approx(1.0, abs=1e-9)
    assert fit.rate == pytest.approx(-h_n(0, 0.0, const_state), rel=1e-8)
    fit = mode0_decay_check(stable_state, 5.0)
    assert fit.rate > 0 and fit.constant >= 1.0
    # brute-force check of the fitted envelope over sampled pairs
    G = ModePrimitive(0, stable_state)
    t = np.linspace(0, 5, 401)
    g = G(t)
    for i in range(0, 401, 20):
        ratio = np.exp(g[i:] - g[i]) / np.exp(-fit.rate * (t[i:] - t[i]))
        assert np.all(ratio <= fit.constant * (1 + 1e-9))


def test_classify(phi_cos, mu_star, stable_state, unstable_state):
    assert classify(stable_state.params.mu, stable_state).verdict == "stable"
    c = classify(unstable_state.params.mu, unstable_state)
    assert c.verdict == "unstable" and c.first_unstable_n == 2
    assert "n=2" in c.label
    at = classify(mu_star, stable_state)
    assert at.verdict == "threshold_adjacent" and at.adjacent_modes == (2,)
    assert classify(stable_state.params.mu, stable_state).label == "stable (modulo translation)"


def test_h_n_nodes_split_sums(stable_state):
    loop, rest = h_n_nodes(4, stable_state, split=True)
    np.testing.assert_allclose(loop + rest, h_n_nodes(4, stable_state), rtol=0, atol=1e-15)


def test_mu_star_other_config():
    phi = NutrientProfile.cosine(3.0, 1.5, 2.0, phase=1.0)
    a = mu_star_3d(1.4, phi)
    b = mu_star_from_multiplier(1.4, phi)
    assert a == pytest.approx(b, rel=1e-8)
