"""Boundary perturbations, the forced mode equation and the limiting center.

A perturbed boundary is ``r = R*(t) + eps * sum rho_{n,m}(t) Y_{n,m}`` in the
real harmonic basis of :mod:`tumorstab.harmonics`.  Each coefficient obeys

    rho' = H_n(t) rho + eps Q_{n,m}(t),

solved here in variation-of-constants form

    rho(t) = rho0 exp(G(t)) + eps int_0^t Q(s) exp(G(t) - G(s)) ds,
    G(t)   = int_0^t H_n.

Degree-1 coefficients never decay (H_1 = 0); they encode a translation of
the sphere, recovered by :func:`mode1_center`.

Complex/real conventions for degree 1: with complex harmonics carrying the
Condon-Shortley phase, ``b_{m+2}`` the coefficient of the complex Y_{1,m},
and real coefficients (c_{-1}, c_0, c_1) of this package,

    b_2 = c_0,   b_1 = (c_1 + i c_{-1}) / sqrt 2,   b_3 = (-c_1 + i c_{-1}) / sqrt 2.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, NoConvergence
from .harmonics import SphereGrid, empty_table, sh_synthesize
from .mode_dynamics import ModePrimitive, log_multipliers
from .special_fn import pn_values

ENVELOPE_SCHEMA = "tumorstab.coefficients"
ENVELOPE_VERSION = 1
DEFAULT_N_MAX = 16

_GAUSS3_NODES = np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)])
_GAUSS3_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 9.0


@dataclass(eq=False)
class BoundaryPerturbation:
    n_max: int
    coeffs: np.ndarray
    epsilon: float = 1.0

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.n_max + 1, 2 * self.n_max + 1):
            raise DomainError(f"coefficient table must have shape "
                              f"{(self.n_max + 1, 2 * self.n_max + 1)}, got {self.coeffs.shape}")
        if not np.all(np.isfinite(self.coeffs)):
            raise DomainError("coefficients must be finite")
        n = np.arange(self.n_max + 1)[:, None]
        m = np.arange(-self.n_max, self.n_max + 1)[None, :]
        if np.any(self.coeffs[np.abs(m) > n] != 0):
            raise DomainError("coefficients with |m| > n must be zero")

    @classmethod
    def zeros(cls, n_max, epsilon=1.0):
        return cls(n_max, empty_table(n_max), epsilon)

    @classmethod
    def random(cls, n_max, rng, scale=1.0, epsilon=1.0, modes=None):
        table = empty_table(n_max)
        for n in (range(n_max + 1) if modes is None else modes):
            table[n, n_max - n: n_max + n + 1] = scale * rng.standard_normal(2 * n + 1)
        return cls(n_max, table, epsilon)

    def __getitem__(self, nm):
        n, m = nm
        return self.coeffs[n, self.n_max + m]

    def __setitem__(self, nm, value):
        n, m = nm
        if abs(m) > n or n > self.n_max:
            raise DomainError(f"no coefficient ({n}, {m}) at truncation {self.n_max}")
        self.coeffs[n, self.n_max + m] = value

    def mode(self, n):
        """Coefficients of degree n ordered m = -n .. n."""
        return self.coeffs[n, self.n_max - n: self.n_max + n + 1].copy()

    def items(self):
        for n in range(self.n_max + 1):
            for m in range(-n, n + 1):
                yield n, m, float(self.coeffs[n, self.n_max + m])

    def norm(self):
        """L2(S^2) norm of sum rho_{n,m} Y_{n,m} (Parseval)."""
        return float(np.sqrt(np.sum(self.coeffs**2)))

    def deviation(self):
        """Norm of everything except the translation (degree-1) part."""
        mask = np.ones(self.n_max + 1, dtype=bool)
        if self.n_max >= 1:
            mask[1] = False
        return float(np.sqrt(np.sum(self.coeffs[mask] ** 2)))

    def surface(self, R, grid=None):
        """Radius ``R + eps * rho`` sampled on a sphere grid."""
        grid = grid or SphereGrid.for_degree(self.n_max, oversample=2)
        return R + self.epsilon * sh_synthesize(self.coeffs, grid)

    def check_positive(self, R, grid=None):
        r = self.surface(R, grid)
        if not np.all(r > 0):
            raise DomainError(f"perturbed radius not positive: min {r.min():.6g}")
        return float(r.min())

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "m", "value"])
            for n, m, v in self.items():
                w.writerow([n, m, format(v, ".17g")])

    @classmethod
    def from_csv(cls, path, epsilon=1.0, n_max=None):
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = {"n", "m", "value"} - set(reader.fieldnames or [])
            if missing:
                raise DomainError(f"{path}: missing columns {sorted(missing)}")
            for row in reader:
                rows.append((int(row["n"]), int(row["m"]), float(row["value"])))
        top = max((n for n, _, _ in rows), default=0)
        out = cls.zeros(top if n_max is None else max(n_max, top), epsilon)
        for n, m, v in rows:
            out[n, m] = v
        return out

    def to_json(self, grid=None):
        envelope = {
            "schema": ENVELOPE_SCHEMA,
            "version": ENVELOPE_VERSION,
            "basis": "real orthonormal spherical harmonics, no Condon-Shortley phase",
            "n_max": self.n_max,
            "epsilon": self.epsilon,
            "coefficients": [[n, m, v] for n, m, v in self.items()],
        }
        if grid is not None:
            envelope["grid"] = {"kind": "gauss-legendre x uniform",
                                "n_theta": grid.n_theta, "n_phi": grid.n_phi}
        return json.dumps(envelope, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        if data.get("schema") != ENVELOPE_SCHEMA:
            raise DomainError(f"unexpected schema {data.get('schema')!r}")
        if data.get("version") != ENVELOPE_VERSION:
            raise DomainError(f"unsupported envelope version {data.get('version')!r}")
        out = cls.zeros(int(data["n_max"]), float(data.get("epsilon", 1.0)))
        for n, m, v in data["coefficients"]:
            out[int(n), int(m)] = float(v)
        return out


def q_forcing(n, m, t, flux_xi, flux_psi, b1, b2, b3, state):
    """Forcing of the (n, m) mode equation from BVP fluxes and boundary data."""
    R = float(state.orbit(t))
    mu = state.params.mu
    Pn = pn_values(R, n)[n]
    return mu * flux_xi - flux_psi + b1 + mu * R * Pn * b2 - n / R * b3


@dataclass(frozen=True, eq=False)
class ModeTrajectory:
    n: int
    m: int
    times: np.ndarray
    values: np.ndarray
    log_growth: np.ndarray  # G(t) = int_0^t H_n, the log multiplier history


def duhamel(times, primitive, forcing, rho0, epsilon=1.0):
    """Variation-of-constants solution on ``times`` (uniform, starting at 0).

    ``primitive`` is G(t) = int_0^t H; ``forcing`` is a callable Q(t), an
    array of Q at ``times`` (spline-interpolated), or None.  Propagates step
    by step so exp(-G) is never formed.
    """
    times = np.asarray(times, dtype=float)
    G = np.asarray(primitive(times), dtype=float)
    decay = np.exp(np.diff(G))
    if forcing is None:
        values = rho0 * np.exp(G)
        return values, G
    if not callable(forcing):
        samples = np.asarray(forcing, dtype=float)
        if samples.shape != times.shape:
            raise DomainError("forcing samples must match the time grid")
        forcing = CubicSpline(times, samples)
    h = np.diff(times)
    mid = 0.5 * (times[:-1] + times[1:])
    local = np.zeros(times.size - 1)
    for node, weight in zip(_GAUSS3_NODES, _GAUSS3_WEIGHTS):
        s = mid + 0.5 * h * node
        local += weight * np.asarray(forcing(s), dtype=float) * np.exp(G[1:] - primitive(s))
    local *= 0.5 * h * epsilon
    values = np.empty(times.size)
    values[0] = rho = float(rho0)
    for k in range(times.size - 1):
        rho = decay[k] * rho + local[k]
        values[k + 1] = rho
    return values, G


def fine_times(state, t_end):
    """Orbit-grid spacing extended periodically over [0, t_end]."""
    h = state.orbit.period / state.orbit.steps
    count = t_end / h
    k = int(round(count))
    if k < 1 or abs(count - k) > 1e-9 * max(1.0, count):
        raise DomainError(f"t_end={t_end!r} is not a multiple of the time step {h!r}")
    return np.arange(k + 1) * h


def evolve_mode(n, m, rho0, forcing, state, t_end, epsilon=1.0):
    """Trajectory of rho_{n,m} on the orbit time grid over [0, t_end]."""
    times = fine_times(state, t_end)
    values, G = duhamel(times, ModePrimitive(n, state), forcing, rho0, epsilon)
    return ModeTrajectory(n, m, times, values, G)


_SQRT_4PI_3 = math.sqrt(4.0 * math.pi / 3.0)
_SQRT_8PI_3 = math.sqrt(8.0 * math.pi / 3.0)


def _real_to_complex(c):
    cm1, c0, c1 = c
    s2 = math.sqrt(2.0)
    return np.array([(c1 + 1j * cm1) / s2, c0, (-c1 + 1j * cm1) / s2])


def _complex_to_real(b):
    b1, b2, b3 = b
    s2 = math.sqrt(2.0)
    return np.array([((b1 + b3) / (1j * s2)).real, b2.real, ((b1 - b3) / s2).real])


def mode1_center(c):
    """Cartesian center a from the degree-1 coefficients (c_{-1}, c_0, c_1).

    Solves b_1 - b_3 = a_1 sqrt(8 pi/3), i (b_1 + b_3) = -a_2 sqrt(8 pi/3),
    b_2 = a_3 sqrt(4 pi/3) for a.
    """
    b = _real_to_complex(np.asarray(c, dtype=float))
    M = np.array([[_SQRT_8PI_3, 0.0, 0.0],
                  [0.0, -_SQRT_8PI_3, 0.0],
                  [0.0, 0.0, _SQRT_4PI_3]])
    rhs = np.array([(b[0] - b[2]).real, (1j * (b[0] + b[2])).real, b[1].real])
    return np.linalg.solve(M, rhs)


def center_to_mode1(a):
    """Degree-1 coefficients (c_{-1}, c_0, c_1) of the shift a . x."""
    a1, a2, a3 = np.asarray(a, dtype=float)
    b1 = 0.5 * (a1 + 1j * a2) * _SQRT_8PI_3
    b3 = 0.5 * (-a1 + 1j * a2) * _SQRT_8PI_3
    b2 = complex(a3 * _SQRT_4PI_3)
    return _complex_to_real((b1, b2, b3))


@dataclass(frozen=True)
class CenterEstimate:
    a: np.ndarray
    residual: float
    iterations: int = 0


def _fd_jacobian(F, a, Fa, step):
    J = np.empty((Fa.size, a.size))
    for j in range(a.size):
        da = step * max(1.0, abs(a[j]))
        e = a.copy()
        e[j] += da
        J[:, j] = (np.asarray(F(e), dtype=float) - Fa) / da
    return J


def find_limiting_center(F, a0, tol=1e-12, max_iter=50, fd_step=1e-7):
    """Root of a 3-vector map F by damped Newton with finite-difference Jacobian."""
    a = np.asarray(a0, dtype=float).copy()
    Fa = np.asarray(F(a), dtype=float)
    res = float(np.linalg.norm(Fa))
    it = 0
    while res > tol:
        if it >= max_iter:
            raise NoConvergence(f"center iteration stopped after {max_iter} steps, "
                                f"|F| = {res:.3g}", res)
        J = _fd_jacobian(F, a, Fa, fd_step)
        try:
            step = np.linalg.solve(J, -Fa)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"singular Jacobian: {exc}", res) from exc
        lam = 1.0
        while True:
            trial = a + lam * step
            Ft = np.asarray(F(trial), dtype=float)
            rt = float(np.linalg.norm(Ft))
            if rt < res or lam < 1e-4:
                break
            lam *= 0.5
        a, Fa, res = trial, Ft, rt
        it += 1
    return CenterEstimate(a=a, residual=res, iterations=it)


@dataclass(frozen=True, eq=False)
class BoundaryEvolution:
    times: np.ndarray
    coeffs: np.ndarray          # (n_times, n_max + 1, 2 n_max + 1)
    deviation: np.ndarray
    centers: np.ndarray         # (n_times, 3)
    log_multipliers: np.ndarray
    decaying: bool
    epsilon: float = 1.0
    center: CenterEstimate = field(default=None)

    def snapshot(self, k):
        n_max = self.coeffs.shape[1] - 1
        return BoundaryPerturbation(n_max, self.coeffs[k].copy(), self.epsilon)


def evolve_boundary(init, state, t_end, forcings=None, samples_per_period=8):
    """Evolve every retained mode and track deviation from a translated sphere.

    ``forcings`` maps (n, m) to a forcing accepted by :func:`duhamel`.
    Output times are ``samples_per_period`` per period.  ``decaying`` is true
    when every non-translation period multiplier is below one.
    """
    forcings = forcings or {}
    n_max = init.n_max
    times = fine_times(state, t_end)
    stride = state.orbit.steps // samples_per_period
    if stride * samples_per_period != state.orbit.steps:
        raise DomainError("samples_per_period must divide the orbit step count")
    out_idx = np.arange(0, times.size, stride)
    out = np.zeros((out_idx.size, n_max + 1, 2 * n_max + 1))
    for n in range(n_max + 1):
        G = ModePrimitive(n, state)
        for m in range(-n, n + 1):
            rho0 = init[n, m]
            q = forcings.get((n, m))
            if q is None:
                if rho0 == 0.0:
                    continue
                values = rho0 * np.exp(G(times[out_idx]))
            else:
                values = duhamel(times, G, q, rho0, init.epsilon)[0][out_idx]
            out[:, n, n_max + m] = values
    mask = np.ones(n_max + 1, dtype=bool)
    if n_max >= 1:
        mask[1] = False
    deviation = np.sqrt(np.sum(out[:, mask, :] ** 2, axis=(1, 2)))
    if n_max >= 1:
        centers = np.array([mode1_center(out[k, 1, n_max - 1: n_max + 2])
                            for k in range(out_idx.size)])
    else:
        centers = np.zeros((out_idx.size, 3))
    lams = log_multipliers(n_max, state)
    decaying = bool(all(lams[n] < 0 for n in range(n_max + 1) if n != 1))
    return BoundaryEvolution(times=times[out_idx], coeffs=out, deviation=deviation,
                             centers=centers, log_multipliers=lams, decaying=decaying,
                             epsilon=init.epsilon,
                             center=CenterEstimate(a=centers[-1], residual=0.0))
