"""Periodic radius of the spherical tumor under a periodic nutrient supply.

The radius obeys the scalar ODE

    dR/dt = mu R (phi(t) P_0(R) - sigma_tilde / 3)

and has a unique positive T-periodic solution whenever the period-mean of
phi exceeds sigma_tilde.  It is located as the fixed point of the period map
R(0) -> R(T), computed with fixed-step RK4.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from .errors import AdmissibilityError, ConvergenceError, DomainError, TrajectoryError
from .special_fn import p0, pn_values

DEFAULT_STEPS = 1024
DEFAULT_BRACKET = (1e-3, 1e3)


@dataclass(frozen=True)
class ModelParams:
    mu: float
    sigma_tilde: float
    period: float
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("mu", "sigma_tilde", "period"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be a positive finite number, got {value!r}")
        if self.gamma != 1.0:
            raise DomainError("surface tension gamma is fixed to 1 by rescaling")

    def with_mu(self, mu):
        return replace(self, mu=float(mu))


@dataclass(frozen=True, eq=False)
class NutrientProfile:
    """T-periodic boundary nutrient concentration phi(t) > 0.

    ``kind="cosine"`` is ``mean + amplitude * cos(2 pi t / period + phase)``.
    ``kind="tabulated"`` holds ``samples`` on a uniform grid spanning one
    period, first and last sample equal, and interpolates with a periodic
    cubic spline.
    """

    kind: str
    period: float
    mean: float = 0.0
    amplitude: float = 0.0
    phase: float = 0.0
    samples: np.ndarray | None = None
    _spline: CubicSpline | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not (self.period > 0 and math.isfinite(self.period)):
            raise DomainError(f"period must be positive, got {self.period!r}")
        if self.kind == "cosine":
            if not self.mean > 0:
                raise DomainError(f"mean must be positive, got {self.mean!r}")
            if not abs(self.amplitude) < self.mean:
                raise DomainError("cosine profile needs |amplitude| < mean to stay positive")
        elif self.kind == "tabulated":
            s = np.asarray(self.samples, dtype=float)
            if s.ndim != 1 or s.size < 3:
                raise DomainError("tabulated profile needs at least 3 samples")
            if np.any(~(s > 0)):
                raise DomainError("tabulated nutrient samples must be positive")
            if abs(s[0] - s[-1]) > 1e-9:
                raise DomainError(
                    f"tabulated profile is not periodic: first={s[0]!r}, last={s[-1]!r}")
            s = s.copy()
            s[-1] = s[0]
            t = np.linspace(0.0, self.period, s.size)
            object.__setattr__(self, "samples", s)
            object.__setattr__(self, "_spline", CubicSpline(t, s, bc_type="periodic"))
        else:
            raise DomainError(f"unknown profile kind {self.kind!r}")

    @classmethod
    def cosine(cls, mean, amplitude, period, phase=0.0):
        return cls("cosine", float(period), mean=float(mean),
                   amplitude=float(amplitude), phase=float(phase))

    @classmethod
    def constant(cls, value, period):
        return cls.cosine(value, 0.0, period)

    @classmethod
    def tabulated(cls, samples, period):
        return cls("tabulated", float(period), samples=np.asarray(samples, dtype=float))

    @classmethod
    def from_csv(cls, path):
        """Read ``t, phi`` rows covering exactly one period on a uniform grid."""
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError:
                    if rows:
                        raise DomainError(f"bad row in {path}: {row!r}")
                    continue  # header line
        if len(rows) < 3:
            raise DomainError(f"{path}: need at least 3 (t, phi) rows")
        t = np.array([r[0] for r in rows])
        phi = np.array([r[1] for r in rows])
        dt = np.diff(t)
        if np.any(dt <= 0) or np.ptp(dt) > 1e-9 * max(1.0, dt.mean()):
            raise DomainError(f"{path}: times must be uniformly spaced and increasing")
        return cls.tabulated(phi, t[-1] - t[0])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "cosine":
            out = self.mean + self.amplitude * np.cos(2.0 * np.pi * t / self.period + self.phase)
        else:
            out = self._spline(np.mod(t, self.period))
        return out if out.ndim else float(out)

    def shifted(self, c):
        """Profile t -> phi(t + c)."""
        if self.kind == "cosine":
            return replace(self, phase=self.phase + 2.0 * np.pi * c / self.period, _spline=None)
        m = self.samples.size - 1
        t = np.linspace(0.0, self.period, m + 1)
        return NutrientProfile.tabulated(self(t + c), self.period)

    def to_dict(self):
        if self.kind == "cosine":
            return {"kind": "cosine", "mean": self.mean, "amplitude": self.amplitude,
                    "phase": self.phase, "period": self.period}
        return {"kind": "tabulated", "period": self.period,
                "samples": [float(x) for x in self.samples]}


def mean_nutrient(phi, panels=256):
    """Period mean of phi by composite Simpson."""
    if phi.kind == "tabulated" and (phi.samples.size - 1) % 2 == 0 \
            and phi.samples.size - 1 >= panels:
        y = phi.samples
    else:
        panels = max(panels, 256) + max(panels, 256) % 2
        y = phi(np.linspace(0.0, phi.period, panels + 1))
    dx = phi.period / (y.size - 1)
    return float(simpson(y, dx=dx) / phi.period)


def check_admissible(params, phi):
    mean = mean_nutrient(phi)
    if not mean > params.sigma_tilde:
        raise AdmissibilityError(
            f"mean nutrient condition fails: (1/T) int phi dt = {mean:.12g} "
            f"must exceed sigma_tilde = {params.sigma_tilde:.12g}")
    return mean


def radius_rhs(t, R, params, phi):
    """mu R (phi(t) P_0(R) - sigma_tilde / 3)."""
    if not R > 0:
        raise DomainError(f"radius must be positive, got {R!r}")
    return params.mu * R * (phi(t) * p0(R) - params.sigma_tilde / 3.0)


def _half_step_nutrient(phi, period, steps):
    h = period / steps
    return np.asarray(phi(np.arange(2 * steps + 1) * (0.5 * h)), dtype=float).tolist()


def _rk4(R0, mu, s3, phi_half, h, steps, keep=False):
    """Classical RK4 for the radius ODE with nutrient pre-sampled at half steps."""
    R = float(R0)
    path = [R] if keep else None
    for k in range(steps):
        fa, fm, fb = phi_half[2 * k], phi_half[2 * k + 1], phi_half[2 * k + 2]
        k1 = mu * R * (fa * p0(R) - s3)
        y = R + 0.5 * h * k1
        if not y > 0:
            raise TrajectoryError(f"radius left (0, inf) at step {k}")
        k2 = mu * y * (fm * p0(y) - s3)
        y = R + 0.5 * h * k2
        if not y > 0:
            raise TrajectoryError(f"radius left (0, inf) at step {k}")
        k3 = mu * y * (fm * p0(y) - s3)
        y = R + h * k3
        if not y > 0:
            raise TrajectoryError(f"radius left (0, inf) at step {k}")
        k4 = mu * y * (fb * p0(y) - s3)
        R = R + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not R > 0:
            raise TrajectoryError(f"radius left (0, inf) at step {k}")
        if keep:
            path.append(R)
    return path if keep else R


def integrate_period(R0, params, phi, steps=DEFAULT_STEPS):
    """R(T) from R(0) = R0 by RK4 with ``steps`` fixed steps."""
    if not R0 > 0:
        raise DomainError(f"initial radius must be positive, got {R0!r}")
    if steps < 64:
        raise DomainError("at least 64 steps per period are required")
    T = params.period
    phi_half = _half_step_nutrient(phi, T, steps)
    return _rk4(R0, params.mu, params.sigma_tilde / 3.0, phi_half, T / steps, steps)


@dataclass(frozen=True, eq=False)
class PeriodicRadius:
    """Samples of the periodic orbit on ``steps + 1`` uniform nodes of [0, T]."""

    params: ModelParams
    phi: NutrientProfile
    times: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    periodicity_residual: float
    iterations: int
    _spline: CubicSpline = field(repr=False)

    @property
    def period(self):
        return self.params.period

    @property
    def steps(self):
        return self.times.size - 1

    @property
    def nutrient(self):
        """phi at the orbit nodes."""
        return np.asarray(self.phi(self.times), dtype=float)

    def __call__(self, t):
        return self._spline(np.mod(t, self.period))

    def rate(self, t):
        """dR*/dt from the ODE right-hand side at the interpolated radius."""
        R = np.asarray(self(t), dtype=float)
        return self.params.mu * R * (np.asarray(self.phi(t)) * pn_values(R, 0)[0]
                                     - self.params.sigma_tilde / 3.0)

    def ode_residual(self):
        """max_k |S'(t_k) - mu R_k (phi P_0 - sigma/3)| for the periodic spline S."""
        return float(np.max(np.abs(self._spline(self.times, 1) - self.derivs)))

    def is_constant(self, rtol=1e-12):
        return float(np.ptp(self.values)) <= rtol * float(self.values.max())


def _orbit_from_start(R0, params, phi, steps, residual, iterations):
    T = params.period
    phi_half = _half_step_nutrient(phi, T, steps)
    path = np.array(_rk4(R0, params.mu, params.sigma_tilde / 3.0, phi_half,
                         T / steps, steps, keep=True))
    times = np.linspace(0.0, T, steps + 1)
    # close the orbit by removing the sub-tolerance drift R(T) - R(0) linearly
    values = path - (path[-1] - path[0]) * (times / T)
    values[-1] = values[0]
    phi_nodes = np.asarray(phi_half[::2])
    derivs = params.mu * values * (phi_nodes * pn_values(values, 0)[0] - params.sigma_tilde / 3.0)
    spline = CubicSpline(times, values, bc_type="periodic")
    return PeriodicRadius(params=params, phi=phi, times=times, values=values, derivs=derivs,
                          periodicity_residual=float(residual), iterations=iterations,
                          _spline=spline)


def find_periodic_radius(params, phi, tol=1e-11, steps=DEFAULT_STEPS,
                         bracket=DEFAULT_BRACKET, max_iter=200):
    """Fixed point of the period map, as a sampled :class:`PeriodicRadius`.

    Log-scale bisection on ``Pi(R) - R`` narrows the bracket, then Newton
    steps with a forward-difference slope polish the root to ``tol``.
    Raises ``AdmissibilityError`` if the mean condition fails and
    ``ConvergenceError`` if the bracket does not straddle a fixed point.
    """
    check_admissible(params, phi)
    if abs(phi.period - params.period) > 1e-12 * params.period:
        raise DomainError("nutrient profile and model disagree on the period")
    T = params.period
    h = T / steps
    phi_half = _half_step_nutrient(phi, T, steps)
    mu, s3 = params.mu, params.sigma_tilde / 3.0

    def g(R):
        return _rk4(R, mu, s3, phi_half, h, steps) - R

    lo, hi = map(float, bracket)
    g_lo, g_hi = g(lo), g(hi)
    if not (g_lo > 0 > g_hi):
        raise ConvergenceError(
            f"no fixed point bracketed in [{lo:g}, {hi:g}]: "
            f"Pi(R)-R = {g_lo:.3g} at lo, {g_hi:.3g} at hi")
    evals = 2
    best_R, best_g = (lo, g_lo) if abs(g_lo) < abs(g_hi) else (hi, g_hi)
    while hi / lo - 1.0 > 1e-4 and evals < max_iter:
        mid = math.sqrt(lo * hi)
        g_mid = g(mid)
        evals += 1
        if abs(g_mid) < abs(best_g):
            best_R, best_g = mid, g_mid
        if g_mid == 0.0:
            lo = hi = mid
            break
        if g_mid > 0:
            lo = mid
        else:
            hi = mid
    R = math.sqrt(lo * hi)
    gR = g(R)
    evals += 1
    while abs(gR) > tol and evals < max_iter:
        if abs(gR) < abs(best_g):
            best_R, best_g = R, gR
        if gR > 0:
            lo = max(lo, R)
        else:
            hi = min(hi, R)
        dR = 1e-7 * R
        slope = (g(R + dR) - gR) / dR
        evals += 1
        step = -gR / slope if slope != 0 else 0.0
        candidate = R + step
        if not (lo < candidate < hi) or slope >= 0:
            candidate = 0.5 * (lo + hi)
        if candidate == R:
            break
        R = candidate
        gR = g(R)
        evals += 1
    if abs(best_g) < abs(gR):
        R, gR = best_R, best_g
    if abs(gR) > tol:
        raise ConvergenceError(
            f"period map fixed point not resolved: |Pi(R)-R| = {abs(gR):.3g} > tol {tol:g}")
    return _orbit_from_start(R, params, phi, steps, abs(gR), evals)


def stationary_radius(phi_value, sigma_tilde, tol=1e-14):
    """Root of phi P_0(R) = sigma_tilde / 3 (the orbit for constant supply)."""
    if not phi_value > sigma_tilde:
        raise AdmissibilityError(
            f"constant supply {phi_value!r} must exceed sigma_tilde {sigma_tilde!r}")
    target = sigma_tilde / (3.0 * phi_value)
    lo, hi = 1e-8, 1.0
    while p0(hi) > target:
        hi *= 2.0
    # P_0 is strictly decreasing
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if p0(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * hi:
            break
    return 0.5 * (lo + hi)
