"""Growth rates and period multipliers of spherical-harmonic boundary modes.

The degree-n coefficient of a boundary perturbation evolves by
rho' = H_n(t) rho + forcing with

    H_n = {R [P_1 - P_n] - (n-1)/R} R' - (n/R^3)(n(n+1)/2 - 1)
          + (mu sigma_tilde / 3) R^2 [P_1 - P_n],

R = R*(t).  Over one period the mode is scaled by exp(Lambda_n) with
Lambda_n the period integral of H_n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .base_state import BaseState, solve_base_state, threshold_ratio_3d
from .errors import ConvergenceError, StabilityError
from .periodic_orbit import DEFAULT_STEPS, ModelParams, find_periodic_radius
from .special_fn import pn_values

THRESHOLD_TOL = 1e-9
DEFAULT_N_SCAN = 64


def _curvature_term(n):
    return n * (n * (n + 1) / 2.0 - 1.0)


def _rate_parts(n, R, Rdot, P1, Pn, mu, sigma_tilde):
    """(closed-loop part, remaining part) of H_n."""
    loop = (R * (P1 - Pn) - (n - 1) / R) * Rdot
    rest = -_curvature_term(n) / R**3 + mu * sigma_tilde / 3.0 * R**2 * (P1 - Pn)
    return loop, rest


def h_n(n, tau, state, mu=None):
    """Instantaneous growth rate of mode ``n`` at time(s) ``tau``.

    ``mu`` overrides the aggressiveness in the last term while keeping the
    orbit of ``state`` frozen.
    """
    mu = state.params.mu if mu is None else mu
    R = np.asarray(state.orbit(tau), dtype=float)
    Rdot = np.asarray(state.orbit.rate(tau), dtype=float)
    P = pn_values(R, max(n, 1))
    loop, rest = _rate_parts(n, R, Rdot, P[1], P[n], mu, state.params.sigma_tilde)
    out = loop + rest
    return out if out.ndim else float(out)


def h_n_nodes(n, state, mu=None, split=False):
    """H_n at the orbit nodes."""
    mu = state.params.mu if mu is None else mu
    orbit = state.orbit
    P = state.pn_nodes(max(n, 1))
    loop, rest = _rate_parts(n, orbit.values, orbit.derivs, P[1], P[n], mu,
                             state.params.sigma_tilde)
    if n == 1:
        loop, rest = np.zeros_like(loop), np.zeros_like(rest)
    return (loop, rest) if split else loop + rest


def log_multiplier(n, state, mu=None):
    """Lambda_n, the period integral of H_n (Simpson on the orbit grid)."""
    return float(simpson(h_n_nodes(n, state, mu), x=state.orbit.times))


def closed_loop_part(n, state):
    """Period integral of the R'-proportional part of H_n (zero in exact arithmetic)."""
    loop, _ = h_n_nodes(n, state, split=True)
    return float(simpson(loop, x=state.orbit.times))


def log_multipliers(n_max, state, mu=None):
    return np.array([log_multiplier(n, state, mu) for n in range(n_max + 1)])


class ModePrimitive:
    """G(t) = int_0^t H_n for all t >= 0 via a periodic spline of H_n."""

    def __init__(self, n, state, mu=None):
        self.n = n
        self.period = state.orbit.period
        values = h_n_nodes(n, state, mu)
        values[-1] = values[0]
        self._spline = CubicSpline(state.orbit.times, values, bc_type="periodic")
        self._anti = self._spline.antiderivative()
        self.per_period = float(self._anti(self.period))

    def rate(self, t):
        return self._spline(np.mod(t, self.period))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.floor(t / self.period)
        out = k * self.per_period + self._anti(t - k * self.period)
        return out if out.ndim else float(out)


def multiplier_between(n, s, t, state, mu=None):
    """exp(int_s^t H_n)."""
    if t < s:
        raise ValueError("need s <= t")
    if t == s:
        return 1.0
    G = ModePrimitive(n, state, mu)
    return math.exp(G(t) - G(s))


def fit_decay_delta(n_max, horizon, state):
    """Uniform decay rate delta with exp(int_s^t H_n) <= exp(-delta (n^3+1)(t-s)).

    Certified over windows [s, s + kT] with s on the orbit grid and
    k = 1 .. horizon/T, for 2 <= n <= n_max.
    """
    T = state.orbit.period
    k_max = max(1, int(round(horizon / T)))
    starts = state.orbit.times[:-1]
    best = math.inf
    for n in range(2, n_max + 1):
        lam = log_multiplier(n, state)
        if lam >= 0:
            raise StabilityError(
                f"mode {n} does not decay: Lambda_{n} = {lam:.6g} >= 0 (mu >= mu*)")
        G = ModePrimitive(n, state)
        scale = n**3 + 1
        cand = -lam / (T * scale)
        for k in range(1, k_max + 1):
            growth = G(starts + k * T) - G(starts)
            cand = min(cand, float(np.min(-growth / (k * T * scale))))
        best = min(best, cand)
    return max(best, 0.0)


@dataclass(frozen=True)
class DecayFit:
    constant: float
    rate: float


def mode0_decay_check(state, horizon):
    """Fit C and delta_0 with exp(int_s^t H_0) <= C exp(-delta_0 (t - s)).

    The rate is the period average -Lambda_0/T; C is the largest excess over
    all grid pairs s <= t in [0, horizon].
    """
    T = state.orbit.period
    G = ModePrimitive(0, state)
    rate = -G.per_period / T
    steps = state.orbit.steps
    k = max(1, int(math.ceil(horizon / T)))
    t = np.linspace(0.0, k * T, k * steps + 1)
    g = G(t) + rate * t
    excess = float(np.max(g - np.minimum.accumulate(g)))
    return DecayFit(constant=math.exp(excess), rate=rate)


@dataclass(frozen=True)
class Classification:
    verdict: str
    first_unstable_n: int | None
    log_multipliers: np.ndarray
    adjacent_modes: tuple

    @property
    def label(self):
        if self.verdict == "stable":
            return "stable (modulo translation)"
        if self.verdict == "unstable":
            return f"unstable (first unstable mode n={self.first_unstable_n})"
        return f"threshold-adjacent (modes {list(self.adjacent_modes)})"


def classify(mu, state, n_scan=DEFAULT_N_SCAN, tol=THRESHOLD_TOL):
    """Linear stability of the base state at aggressiveness ``mu``.

    The orbit is recomputed when ``mu`` differs from the state's own value.
    Mode 1 is always neutral and never counts against stability.
    """
    if mu != state.params.mu:
        state = solve_base_state(state.params.with_mu(mu), state.phi, steps=state.orbit.steps)
    lams = log_multipliers(n_scan, state)
    others = [n for n in range(n_scan + 1) if n != 1]
    unstable = [n for n in others if lams[n] > tol]
    adjacent = tuple(n for n in others if abs(lams[n]) <= tol)
    if unstable:
        return Classification("unstable", unstable[0], lams, adjacent)
    if adjacent:
        return Classification("threshold_adjacent", None, lams, adjacent)
    return Classification("stable", None, lams, adjacent)


def mu_star_from_multiplier(sigma_tilde, phi, T=None, n=2, *, steps=DEFAULT_STEPS,
                            tol=1e-11, xtol=1e-13, bracket=None):
    """Root in mu of Lambda_n(mu) = 0, with the orbit recomputed at every mu."""
    T = phi.period if T is None else float(T)

    def lam(mu):
        orbit = find_periodic_radius(ModelParams(mu, sigma_tilde, T), phi, tol=tol, steps=steps)
        return log_multiplier(n, BaseState(ModelParams(mu, sigma_tilde, T), phi, orbit))

    if bracket is None:
        orbit = find_periodic_radius(ModelParams(1.0 / T, sigma_tilde, T), phi, tol=tol,
                                     steps=steps)
        guess = threshold_ratio_3d(orbit, sigma_tilde)
        lo, hi = guess / 4.0, guess * 4.0
    else:
        lo, hi = bracket
        guess = hi
    f_lo, f_hi = lam(lo), lam(hi)
    for _ in range(20):
        if f_lo < 0:
            break
        lo /= 4.0
        f_lo = lam(lo)
    for _ in range(20):
        if f_hi > 0:
            break
        hi *= 4.0
        f_hi = lam(hi)
    if not (f_lo < 0 < f_hi):
        raise ConvergenceError(f"Lambda_{n}(mu) has no sign change in [{lo:g}, {hi:g}]")
    return float(brentq(lam, lo, hi, xtol=xtol * guess, rtol=1e-15))
