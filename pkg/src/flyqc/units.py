import numpy as np


def mhz_to_angular(nu_mhz):
    """Ordinary frequency in MHz -> angular frequency in rad/ns."""
    return 2 * np.pi * np.asarray(nu_mhz, dtype=float) * 1e-3 if np.ndim(nu_mhz) else 2 * np.pi * float(nu_mhz) * 1e-3


def angular_to_mhz(omega):
    return omega / (2 * np.pi * 1e-3)
