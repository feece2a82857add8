"""Radial boundary value problems of the mono-mode system.

For a harmonic degree n and ball radius R,

    -(1/r^2)(r^2 u')' + (n(n+1)/r^2 + k) u = f   on (0, R),
    u(R) = 0,  u regular at r = 0,

with k = 1 for the nutrient correction (``solve_xi``) and k = 0 for the
pressure correction (``solve_psi``).  Discretised by the conservative
finite-volume three-point scheme on a uniform grid; second order, including the boundary
flux u'(R).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.linalg import solve_banded

from .errors import DomainError, SingularMatrixError
from .special_fn import bessel_i_half

DEFAULT_NODES = 2000


@dataclass(frozen=True, eq=False)
class RadialBvpSolution:
    n: int
    grid: np.ndarray
    values: np.ndarray
    boundary_flux: float


def radial_grid(R, nodes=DEFAULT_NODES):
    return np.linspace(0.0, R, nodes + 1)


def _sample(forcing, r):
    if callable(forcing):
        return np.broadcast_to(np.asarray(forcing(r), dtype=float), r.shape).copy()
    f = np.asarray(forcing, dtype=float)
    if f.ndim == 0:
        return np.full(r.shape, float(f))
    if f.shape != r.shape:
        raise DomainError(f"forcing has {f.size} samples, grid has {r.size} nodes")
    return f


def solve_radial(n, forcing, R, k, nodes=DEFAULT_NODES):
    """Solve the degree-``n`` radial problem with zeroth-order coefficient ``k``."""
    if n < 0:
        raise DomainError("degree must be non-negative")
    if not R > 0:
        raise DomainError("boundary radius must be positive")
    if nodes < 4:
        raise SingularMatrixError(f"{nodes} radial nodes cannot resolve the problem")
    r = radial_grid(R, nodes)
    h = R / nodes
    f = _sample(forcing, r)
    if not np.all(np.isfinite(f[1:])):
        raise DomainError("forcing must be finite on (0, R]")
    u = np.zeros(nodes + 1)
    if not np.any(f[1:]) and (n > 0 or f[0] == 0):
        return RadialBvpSolution(n, r, u, 0.0)

    first = 0 if n == 0 else 1
    idx = np.arange(first, nodes)
    ri = r[idx]
    m = idx.size
    lower = np.zeros(m)
    diag = np.zeros(m)
    upper = np.zeros(m)
    rhs = f[idx].copy()
    interior = ri > 0
    rp = (ri + 0.5 * h) ** 2
    rm = (ri - 0.5 * h) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        # finite-volume scaling: cell volume / h = r^2 + h^2 / 12
        scale = np.where(interior, 1.0 / (h * h * (ri * ri + h * h / 12.0)), 0.0)
        diag[:] = np.where(interior, (rp + rm) * scale + n * (n + 1) * h * h * scale + k, 0.0)
    lower[:] = -rm * scale
    upper[:] = -rp * scale
    if n == 0:
        # -Laplacian at the centre is -3 u''(0) ~ 6 (u_0 - u_1) / h^2
        diag[0] = 6.0 / h**2 + k
        upper[0] = -6.0 / h**2
        lower[0] = 0.0
    # u_nodes = 0 on the boundary and u_0 = 0 for n >= 1 drop out of the system
    ab = np.zeros((3, m))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    if np.any(diag == 0):
        raise SingularMatrixError("zero pivot in radial system")
    try:
        sol = solve_banded((1, 1), ab, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(str(exc)) from exc
    if not np.all(np.isfinite(sol)):
        raise SingularMatrixError("radial solve produced non-finite values")
    u[idx] = sol
    flux = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * h)
    return RadialBvpSolution(n, r, u, float(flux))


def solve_xi(n, f1, R, nodes=DEFAULT_NODES):
    """Nutrient correction: -Lap xi + (n(n+1)/r^2 + 1) xi = f1, xi(R) = 0."""
    return solve_radial(n, f1, R, 1.0, nodes)


def solve_psi(n, f1, f2, mu, R, nodes=DEFAULT_NODES):
    """Pressure correction: -Lap psi + n(n+1)/r^2 psi = mu f1 + f2, psi(R) = 0."""
    r = radial_grid(R, nodes)
    forcing = mu * _sample(f1, r) + _sample(f2, r)
    return solve_radial(n, forcing, R, 0.0, nodes)


def ball_norm(forcing, R, nodes=DEFAULT_NODES):
    """L2 norm over the ball of f(r) Y_{n,m} for an orthonormal Y."""
    r = radial_grid(R, nodes)
    f = _sample(forcing, r)
    return float(np.sqrt(simpson(f * f * r * r, x=r)))


def extremal_forcing(n, R, k):
    """Forcing that maximises |u'(R)|^2 / ||f||^2: the regular homogeneous solution."""
    if k == 0:
        return lambda r: (np.asarray(r) / R) ** n
    if k == 1:
        ref = bessel_i_half(n, R, scaled=True)

        def f(r):
            r = np.asarray(r, dtype=float)
            out = np.zeros_like(r)
            for i, x in enumerate(r):
                if x > 0:
                    out[i] = bessel_i_half(n, x, scaled=True) / ref * np.exp(x - R) * np.sqrt(R / x)
                elif n == 0:
                    out[i] = R / np.sinh(R)
            return out

        return f
    raise DomainError("k must be 0 or 1")


def flux_ratio(solution, forcing_norm):
    """(n + 1) |u'(R)|^2 / ||f||^2, the quantity bounded uniformly in n."""
    return (solution.n + 1) * solution.boundary_flux**2 / forcing_norm**2
