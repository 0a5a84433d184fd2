"""Reference drives and coupling schemes used for comparison."""

import warnings

import numpy as np

from .propagation import ControlPulse

DEFAULT_BOUND = 2 * np.pi * 80e-3


def gaussian_pi_pulse(T0, sigma, grid, gamma=0.0, bound=DEFAULT_BOUND):
    """In-phase Gaussian centred on T0/2 with two-level rotation angle pi.

    Samples are taken at step midpoints and zeroed after ``T0``; the amplitude
    is calibrated on the grid so that ``sum(u_x) dt = pi / 2``.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if T0 > grid.t_end * (1 + 1e-12):
        raise ValueError("T0 exceeds the grid horizon")
    t = grid.step_times - 0.5 * grid.dt
    shape = np.where(t <= T0, np.exp(-0.5 * ((t - T0 / 2) / sigma) ** 2), 0.0)
    amp = (np.pi / 2) / (np.sum(shape) * grid.dt)
    if amp > bound:
        warnings.warn(f"calibrated Gaussian amplitude {amp:.4f} rad/ns exceeds the bound {bound:.4f}",
                      RuntimeWarning, stacklevel=2)
    ux = amp * shape
    g = np.broadcast_to(np.asarray(gamma, dtype=float), ux.shape).copy()
    return ControlPulse(ux, np.zeros_like(ux), g)


def drag_pulse(gaussian, eta, dt):
    """First-order DRAG: u_y = -du_x/dt / eta (central differences), u_x unchanged."""
    if eta == 0:
        raise ValueError("DRAG needs a non-zero anharmonicity")
    uy = -np.gradient(gaussian.ux, dt) / eta
    return gaussian.replace(ux=gaussian.ux.copy(), uy=uy)


def cutoff_coupling(ideal_gamma, gamma_min, gamma_max):
    if gamma_min > gamma_max:
        raise ValueError("gamma_min must not exceed gamma_max")
    return np.clip(np.asarray(ideal_gamma, dtype=float), gamma_min, gamma_max)
