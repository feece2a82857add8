"""Radially symmetric periodic base state and the critical aggressiveness.

Nutrient and pressure of the spherical solution are

    sigma*(r, t) = phi(t) (R/sinh R) (sinh r / r)
    p*(r, t)     = -mu sigma* + mu sigma_tilde r^2 / 6 + 1/R + mu phi - mu sigma_tilde R^2 / 6

with R = R*(t).  The threshold mu* is the value at which the period-integrated
growth rate of the degree-2 boundary mode vanishes.  Because the orbit R*
itself depends on mu whenever phi is not constant, mu* is obtained as the
self-consistent root of ``mu = ratio(R*_mu)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq

from .errors import ConvergenceError, DomainError
from .periodic_orbit import DEFAULT_STEPS, ModelParams, find_periodic_radius
from .special_fn import bessel_i_int_ratio, pn_values


@dataclass(frozen=True, eq=False)
class BaseState:
    params: ModelParams
    phi: object
    orbit: object
    _pn_cache: dict = field(default_factory=dict, repr=False)

    def pn_nodes(self, n_max):
        """P_0..P_{n_max} at the orbit nodes, shape (n_max + 1, steps + 1)."""
        cached = self._pn_cache.get("table")
        if cached is None or cached.shape[0] <= n_max:
            cached = pn_values(self.orbit.values, max(n_max, 8))
            self._pn_cache["table"] = cached
        return cached[: n_max + 1]


def solve_base_state(params, phi, steps=DEFAULT_STEPS, tol=1e-11):
    orbit = find_periodic_radius(params, phi, tol=tol, steps=steps)
    return BaseState(params=params, phi=phi, orbit=orbit)


def _radius_checked(r, t, state):
    R = float(state.orbit(t))
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r > R * (1 + 1e-12)):
        raise DomainError(f"radius outside [0, R*(t)] = [0, {R:.15g}]")
    return r, R


def _sinh_ratio(r, R):
    """(R / sinh R) (sinh r / r), overflow-free, with the r -> 0 limit."""
    r = np.asarray(r, dtype=float)
    safe = np.where(r > 0, r, 1.0)
    core = np.where(r > 0, -np.expm1(-2.0 * safe) / safe, 2.0)
    return R * np.exp(r - R) * core / (-math.expm1(-2.0 * R))


def sigma_star(r, t, state):
    """Base-state nutrient concentration at radius ``r`` and time ``t``."""
    r, R = _radius_checked(r, t, state)
    out = state.phi(t) * _sinh_ratio(r, R)
    return out if np.ndim(out) else float(out)


def p_star(r, t, state):
    """Base-state pressure; equals 1/R*(t) on the boundary."""
    r, R = _radius_checked(r, t, state)
    mu, sig = state.params.mu, state.params.sigma_tilde
    phi_t = state.phi(t)
    out = (-mu * phi_t * _sinh_ratio(r, R) + mu * sig * r**2 / 6.0 + 1.0 / R
           + mu * phi_t - mu * sig * R**2 / 6.0)
    return out if np.ndim(out) else float(out)


def boundary_derivatives(t, state):
    """(d sigma*/dr, d p*/dr, d^2 p*/dr^2) on r = R*(t)."""
    R = float(state.orbit(t))
    Rdot = float(state.orbit.rate(t))
    P = pn_values(R, 1)
    phi_t = float(state.phi(t))
    mu = state.params.mu
    dsigma = phi_t * R * P[0]
    dp = -Rdot
    d2p = -mu * phi_t * R**2 * P[0] * P[1] - Rdot / R
    return float(dsigma), float(dp), float(d2p)


def threshold_ratio_3d(orbit, sigma_tilde):
    """int 4/R^3 / int (sigma_tilde/3) R^2 (P_1 - P_2) over the orbit grid."""
    R = orbit.values
    P = pn_values(R, 2)
    num = simpson(4.0 / R**3, x=orbit.times)
    den = simpson(sigma_tilde / 3.0 * R**2 * (P[1] - P[2]), x=orbit.times)
    return float(num / den)


def mu_star_constant_radius(R, sigma_tilde):
    """Closed form of the 3D threshold for a constant orbit of radius R."""
    P = pn_values(R, 2)
    return float(12.0 / (sigma_tilde * R**5 * (P[1] - P[2])))


def bracket_2d(r):
    """r I_3/I_2 - r I_0/I_1 + 2, negative for every r > 0."""
    r = np.asarray(r, dtype=float)
    return r * bessel_i_int_ratio(2, r) - r / bessel_i_int_ratio(0, r) + 2.0


def threshold_ratio_2d(orbit, sigma_tilde):
    R = orbit.values
    num = simpson(6.0 / R**3, x=orbit.times)
    den = -0.5 * sigma_tilde * simpson(bracket_2d(R), x=orbit.times)
    return float(num / den)


def _self_consistent(ratio, sigma_tilde, phi, T, steps, tol, xtol):
    def orbit_at(mu):
        return find_periodic_radius(ModelParams(mu, sigma_tilde, T), phi, tol=tol, steps=steps)

    mu0 = ratio(orbit_at(1.0 / T), sigma_tilde)
    if phi.kind == "cosine" and phi.amplitude == 0.0:
        return mu0

    def f(mu):
        return mu - ratio(orbit_at(mu), sigma_tilde)

    lo, hi = mu0 / 4.0, mu0 * 4.0
    f_lo, f_hi = f(lo), f(hi)
    for _ in range(20):
        if f_lo < 0:
            break
        lo /= 4.0
        f_lo = f(lo)
    for _ in range(20):
        if f_hi > 0:
            break
        hi *= 4.0
        f_hi = f(hi)
    if not (f_lo < 0 < f_hi):
        raise ConvergenceError("could not bracket the self-consistent threshold")
    return float(brentq(f, lo, hi, xtol=xtol * mu0, rtol=1e-15))


def mu_star_3d(sigma_tilde, phi, T=None, *, steps=DEFAULT_STEPS, tol=1e-11, xtol=1e-13):
    """Critical aggressiveness in three dimensions.

    Solves ``mu = threshold_ratio_3d(R*_mu)``; for constant supply the
    orbit does not depend on mu and a single evaluation suffices.
    """
    T = phi.period if T is None else float(T)
    return _self_consistent(threshold_ratio_3d, sigma_tilde, phi, T, steps, tol, xtol)


def mu_star_2d(sigma_tilde, phi, T=None, *, use_3d_orbit=False, steps=DEFAULT_STEPS,
               tol=1e-11, xtol=1e-13):
    """Two-dimensional threshold formula evaluated on the 3D radius orbit.

    The planar radius equation is not available here, so the caller has to
    opt in to using the spherical orbit explicitly.
    """
    if not use_3d_orbit:
        raise DomainError("the 2D threshold is only available on the 3D orbit; "
                          "pass use_3d_orbit=True to accept that substitution")
    T = phi.period if T is None else float(T)
    return _self_consistent(threshold_ratio_2d, sigma_tilde, phi, T, steps, tol, xtol)
