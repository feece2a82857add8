"""Real spherical harmonics on a Gauss-Legendre x uniform-longitude grid.

Basis (orthonormal on the unit sphere, no Condon-Shortley phase)::

    Y_{n,0}  = L_n^0(cos t)
    Y_{n,m}  = sqrt(2) L_n^m(cos t) cos(m p)        m > 0
    Y_{n,-m} = sqrt(2) L_n^m(cos t) sin(m p)        m > 0

with L_n^m = sqrt((2n+1)/(4 pi) (n-m)!/(n+m)!) P_n^m.  Coefficient tables are
arrays of shape ``(n_max + 1, 2 n_max + 1)``; entry ``[n, n_max + m]`` holds
the (n, m) coefficient and entries with |m| > n are zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridError


@dataclass(frozen=True, eq=False)
class SphereGrid:
    n_theta: int
    n_phi: int

    def __post_init__(self):
        if self.n_theta < 1 or self.n_phi < 1:
            raise GridError("grid sizes must be positive")
        x, w = np.polynomial.legendre.leggauss(self.n_theta)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "theta", np.arccos(x))
        object.__setattr__(self, "phi", 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi)

    @classmethod
    def for_degree(cls, n_max, oversample=1):
        return cls(oversample * (n_max + 1), oversample * (2 * n_max + 1))

    def max_degree(self):
        return min(self.n_theta - 1, (self.n_phi - 1) // 2)

    def mesh(self):
        """(theta, phi) arrays of shape (n_theta, n_phi)."""
        return np.meshgrid(self.theta, self.phi, indexing="ij")


def empty_table(n_max):
    return np.zeros((n_max + 1, 2 * n_max + 1))


def legendre_table(n_max, x):
    """L_n^m(x) for 0 <= m <= n <= n_max, shape (n_max + 1, n_max + 1, len(x))."""
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    out = np.zeros((n_max + 1, n_max + 1) + x.shape)
    out[0, 0] = 1.0 / np.sqrt(4.0 * np.pi)
    for m in range(1, n_max + 1):
        out[m, m] = np.sqrt((2 * m + 1) / (2.0 * m)) * s * out[m - 1, m - 1]
    for m in range(0, n_max):
        out[m + 1, m] = np.sqrt(2 * m + 3.0) * x * out[m, m]
    for m in range(0, n_max + 1):
        for n in range(m + 2, n_max + 1):
            a = np.sqrt((4.0 * n * n - 1) / (n * n - m * m))
            b = np.sqrt(((n - 1.0) ** 2 - m * m) / (4.0 * (n - 1) ** 2 - 1))
            out[n, m] = a * (x * out[n - 1, m] - b * out[n - 2, m])
    return out


def _azimuthal(n_max, phi):
    """Rows indexed by n_max + m: sqrt2 sin(|m| p) for m < 0, 1 for m = 0, sqrt2 cos(m p)."""
    m = np.arange(-n_max, n_max + 1)[:, None]
    rows = np.where(m > 0, np.sqrt(2.0) * np.cos(m * phi), np.sqrt(2.0) * np.sin(-m * phi))
    rows[n_max] = 1.0
    return rows


def real_ylm(n, m, theta, phi):
    """A single real harmonic evaluated at arbitrary angles."""
    theta = np.asarray(theta, dtype=float)
    L = legendre_table(n, np.cos(theta))[n, abs(m)]
    if m > 0:
        return np.sqrt(2.0) * L * np.cos(m * np.asarray(phi))
    if m < 0:
        return np.sqrt(2.0) * L * np.sin(-m * np.asarray(phi))
    return L * np.ones_like(np.asarray(phi, dtype=float))


def sh_synthesize(coeffs, grid):
    """Field values on ``grid`` (shape (n_theta, n_phi)) from a coefficient table."""
    coeffs = np.asarray(coeffs, dtype=float)
    n_max = coeffs.shape[0] - 1
    L = legendre_table(n_max, grid.x)            # (n, |m|, theta)
    A = _azimuthal(n_max, grid.phi)               # (n_max + m, phi)
    out = np.zeros((grid.n_theta, grid.n_phi))
    for m in range(-n_max, n_max + 1):
        col = coeffs[abs(m):, n_max + m]
        if not np.any(col):
            continue
        radial = col @ L[abs(m):, abs(m)]         # (theta,)
        out += np.outer(radial, A[n_max + m])
    return out


def sh_analyze(samples, n_max, grid):
    """Coefficient table of degree ``n_max`` from samples on ``grid``.

    Exact up to rounding for fields of degree <= n_max when the grid has at
    least n_max + 1 latitudes and 2 n_max + 1 longitudes.
    """
    samples = np.asarray(samples, dtype=float)
    if grid.n_theta < n_max + 1 or grid.n_phi < 2 * n_max + 1:
        raise GridError(
            f"grid {grid.n_theta}x{grid.n_phi} too small for degree {n_max}; "
            f"need at least {n_max + 1}x{2 * n_max + 1}")
    if samples.shape != (grid.n_theta, grid.n_phi):
        raise GridError(f"samples shape {samples.shape} does not match grid")
    L = legendre_table(n_max, grid.x)
    A = _azimuthal(n_max, grid.phi)
    # longitude sums, then weighted latitude sums
    fourier = samples @ A.T * (2.0 * np.pi / grid.n_phi)   # (theta, n_max + m)
    weighted = fourier * grid.weights[:, None]
    out = empty_table(n_max)
    for m in range(-n_max, n_max + 1):
        out[abs(m):, n_max + m] = L[abs(m):, abs(m)] @ weighted[:, n_max + m]
    return out
