"""Independent reference computations shared by the test modules."""
import numpy as np

from tumorstab.mode_dynamics import h_n

# one line per acceptance criterion, echoed in the pytest terminal summary
ACCEPTANCE_LINES = []


def rk4_mode(n, state, rho0, forcing, t_end, epsilon=1.0, steps_per_period=2048):
    """Classical RK4 on rho' = H_n rho + eps Q; returns (times, values) at each step.

    H_n is evaluated pointwise from the orbit, never through the mode primitive.
    """
    T = state.orbit.period
    h = T / steps_per_period
    # H is T-periodic: sample one period on the half-step lattice
    lattice = np.arange(2 * steps_per_period + 1) * (0.5 * h)
    H = np.asarray(h_n(n, lattice, state))
    total = int(round(t_end / h))
    t_half = np.arange(2 * total + 1) * (0.5 * h)
    Q = np.zeros_like(t_half) if forcing is None else np.asarray(forcing(t_half), dtype=float)
    rho = float(rho0)
    out = np.empty(total + 1)
    out[0] = rho
    period_half = 2 * steps_per_period
    for k in range(total):
        j = (2 * k) % period_half
        ha, hm, hb = H[j], H[j + 1], H[j + 2]
        qa, qm, qb = epsilon * Q[2 * k], epsilon * Q[2 * k + 1], epsilon * Q[2 * k + 2]
        k1 = ha * rho + qa
        k2 = hm * (rho + 0.5 * h * k1) + qm
        k3 = hm * (rho + 0.5 * h * k2) + qm
        k4 = hb * (rho + h * k3) + qb
        rho += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = rho
    return t_half[::2], out


def random_forcing(rng, T):
    a0, a1, a2 = rng.uniform(-1, 1, 3)
    j = int(rng.integers(1, 4))
    ph = rng.uniform(0, 2 * np.pi)
    w = 2 * np.pi / T
    return lambda t: a0 + a1 * np.cos(j * w * t + ph) + a2 * np.sin(0.37 * w * t)
