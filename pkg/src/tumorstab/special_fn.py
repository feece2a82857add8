"""Half-integer modified Bessel functions and the ratio family P_n.

    P_n(r) = I_{n+3/2}(r) / (r I_{n+1/2}(r)),   n = 0, 1, 2, ...

All ratios are produced by the downward recurrence

    P_n(r) = 1 / (r^2 P_{n+1}(r) + 2n + 3)

seeded far above the requested order, which is contractive in the downward
direction.  Bessel values themselves are assembled from I_{1/2} and a product
of ratios, so no upward recurrence on I is ever run.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError

# exp(r) overflows a double beyond this argument
_EXP_OVERFLOW = 709.78

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def seed_order(r, n_max):
    """Start order for the downward recurrence."""
    return int(n_max + max(20, math.ceil(r)))


def _check_r(r):
    if not r > 0 or not math.isfinite(r):
        raise DomainError(f"radius must be positive and finite, got {r!r}")


def _tail_seed(r, order, rtol=1e-17, max_terms=10_000):
    """P_order(r) from its continued fraction (modified Lentz)."""
    r2 = r * r
    b0 = 2 * order + 3
    if r2 / (b0 * (b0 + 2)) < rtol:
        return 1.0 / b0
    tiny = 1e-300
    f = float(b0)
    c, d = f, 0.0
    for j in range(1, max_terms):
        bj = 2 * (order + j) + 3
        d = bj + r2 * d
        d = 1.0 / (d if d != 0.0 else tiny)
        c = bj + r2 / c
        if c == 0.0:
            c = tiny
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < rtol:
            break
    return 1.0 / f


@dataclass(frozen=True)
class PnTable:
    """P_0(r) .. P_{max_order}(r) at a single radius."""

    r: float
    max_order: int
    values: np.ndarray

    def __getitem__(self, n):
        return self.values[n]

    def __len__(self):
        return self.max_order + 1


def pn_table(r, n_max):
    """Evaluate P_0(r) .. P_{n_max}(r) by seeded downward recurrence."""
    r = float(r)
    _check_r(r)
    if n_max < 0:
        raise DomainError("n_max must be non-negative")
    top = seed_order(r, n_max)
    r2 = r * r
    p = _tail_seed(r, top)
    values = np.empty(n_max + 1)
    for n in range(top - 1, -1, -1):
        p = 1.0 / (r2 * p + 2 * n + 3)
        if n <= n_max:
            values[n] = p
    return PnTable(r=r, max_order=int(n_max), values=values)


def pn(n, r):
    """Single value P_n(r)."""
    return pn_table(r, n).values[n]


def p0(r):
    """Fast scalar P_0(r) for use inside time-stepping loops."""
    if r >= 1.0:
        if r > 20.0:
            return 1.0 / r - 1.0 / (r * r)
        return 1.0 / (r * math.tanh(r)) - 1.0 / (r * r)
    if not r > 0:
        raise DomainError(f"radius must be positive, got {r!r}")
    # r^2 / ((2N+3)(2N+5)) < 1e-17 for N = 14 when r < 1
    r2 = r * r
    p = 1.0 / 33.0
    for n in range(14, -1, -1):
        p = 1.0 / (r2 * p + 2 * n + 3)
    return p


def pn_values(r, n_max):
    """Vectorised P_n over an array of radii.

    Returns an array of shape ``(n_max + 1,) + r.shape``.
    """
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)) or not np.all(np.isfinite(r)):
        raise DomainError("all radii must be positive and finite")
    if n_max < 0:
        raise DomainError("n_max must be non-negative")
    flat = r.ravel()
    top = seed_order(float(flat.max()) if flat.size else 0.0, n_max)
    uniq, inverse = np.unique(flat, return_inverse=True)
    p = np.array([_tail_seed(x, top) for x in uniq])[inverse]
    r2 = flat * flat
    out = np.empty((n_max + 1, flat.size))
    for n in range(top - 1, -1, -1):
        p = 1.0 / (r2 * p + (2 * n + 3))
        if n <= n_max:
            out[n] = p
    return out.reshape((n_max + 1,) + r.shape)


def bessel_i_half(n, r, scaled=False):
    """I_{n+1/2}(r) for integer ``n >= 0`` and ``r > 0``.

    With ``scaled=True`` returns ``exp(-r) * I_{n+1/2}(r)``, which never
    overflows.  The unscaled value raises ``OverflowError`` once ``e^r`` is
    not representable.
    """
    r = float(r)
    _check_r(r)
    if int(n) != n or n < 0:
        raise DomainError(f"order index must be a non-negative integer, got {n!r}")
    n = int(n)
    if scaled:
        base = _SQRT_2_OVER_PI / math.sqrt(r) * (-math.expm1(-2.0 * r)) / 2.0
    else:
        if r > _EXP_OVERFLOW:
            raise OverflowError(f"I_{{n+1/2}}({r}) overflows; use scaled=True")
        base = _SQRT_2_OVER_PI / math.sqrt(r) * math.sinh(r)
    if n == 0:
        return base
    # I_{k+3/2} = r P_k I_{k+1/2}; every factor r P_k lies in (0, 1)
    table = pn_table(r, n - 1).values
    return base * float(np.prod(r * table))


def pn_derivative_identity_residual(n, r):
    """|d/dr (I_{n+1/2}/sqrt r) - (I_{n+3/2} + (n/r) I_{n+1/2}) / sqrt r|.

    The derivative is a central difference with step max(1e-6, 1e-6 r).
    """
    r = float(r)
    _check_r(r)
    h = max(1e-6, 1e-6 * r)
    if r - h <= 0:
        h = 0.5 * r

    def g(x):
        return bessel_i_half(n, x) / math.sqrt(x)

    lhs = (g(r + h) - g(r - h)) / (2.0 * h)
    rhs = (bessel_i_half(n + 1, r) + n / r * bessel_i_half(n, r)) / math.sqrt(r)
    return abs(lhs - rhs)


def bessel_i_int_ratio(nu, r):
    """I_{nu+1}(r) / I_nu(r) for integer order ``nu >= 0`` (array aware)."""
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise DomainError("all radii must be positive")
    return special.ive(nu + 1, r) / special.ive(nu, r)
