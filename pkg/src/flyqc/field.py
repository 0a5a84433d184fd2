"""Flying-qubit state extraction, target shapes and coupling schemes."""

from dataclasses import dataclass
from enum import Enum

import numpy as np

TAIL_FLOOR = 1e-12


class ShapeKind(str, Enum):
    EXP_DECAY = "exp_decay"
    EXP_RISE = "exp_rise"
    SECH = "sech"


@dataclass(frozen=True)
class TargetShape:
    """Target single-photon envelope.

    ``t_delay`` is the onset for ``exp_decay`` and the centre for ``sech``
    (``None`` centres it on the horizon); it is ignored for ``exp_rise``,
    which always peaks at the horizon.
    """

    kind: ShapeKind
    alpha: float
    t_delay: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ShapeKind(self.kind))
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")


@dataclass
class FlyingQubitState:
    xi0: complex
    xi1: np.ndarray
    dt: float

    @property
    def single_photon_weight(self):
        return float(np.sum(np.abs(self.xi1) ** 2) * self.dt)

    @property
    def multiphoton_weight(self):
        return 1.0 - abs(self.xi0) ** 2 - self.single_photon_weight

    def satisfies_normalization(self, tol=1e-6):
        return abs(self.xi0) ** 2 + self.single_photon_weight <= 1.0 + tol


def sample_shape(shape, grid):
    """Target samples at t_1..t_M, renormalised so sum |xi|^2 dt = 1."""
    t = grid.step_times
    alpha = shape.alpha
    T = grid.t_end
    if shape.kind is ShapeKind.EXP_DECAY:
        t0 = 0.0 if shape.t_delay is None else shape.t_delay
        s = np.where(t >= t0, np.sqrt(alpha) * np.exp(-alpha * np.clip(t - t0, 0, None) / 2), 0.0)
    elif shape.kind is ShapeKind.EXP_RISE:
        s = np.sqrt(alpha) * np.exp(alpha * (t - T) / 2)
    else:
        tc = T / 2 if shape.t_delay is None else shape.t_delay
        s = np.sqrt(alpha) / np.cosh(alpha * (t - tc) / 2)
    norm = np.sum(s ** 2) * grid.dt
    if norm <= 0:
        raise ValueError("target shape has no weight on the grid")
    return s / np.sqrt(norm)


def vacuum_amplitude(chain, psi0):
    return complex(chain.forward_states(psi0)[-1][0])


def _photon_samples(chain, gamma, phi, rows, a):
    # xi1(t_n) = sqrt(gamma_n) <0|G_{M,n} a G_{n,0}|psi0>, n = 1..M
    amp = np.einsum('ni,ij,nj->n', rows[1:], a, phi[1:])
    return np.sqrt(gamma) * amp


def single_photon_component(chain, pulse, psi0):
    a = _lowering(chain)
    phi = chain.forward_states(psi0)
    rows = chain.backward_rows(_ground(chain.dim))
    return _photon_samples(chain, pulse.gamma, phi, rows, a)


def flying_qubit_state(chain, pulse, psi0):
    a = _lowering(chain)
    phi = chain.forward_states(psi0)
    rows = chain.backward_rows(_ground(chain.dim))
    xi1 = _photon_samples(chain, pulse.gamma, phi, rows, a)
    return FlyingQubitState(complex(phi[-1][0]), xi1, chain.grid.dt)


def _ground(dim):
    g = np.zeros(dim, dtype=complex)
    g[0] = 1.0
    return g


def _lowering(chain):
    if chain.model is not None:
        return chain.model.a
    return np.diag(np.sqrt(np.arange(1, chain.dim, dtype=float)), 1).astype(complex)


def analytic_decay_shape(gamma, grid):
    """Emission of an undriven emitter starting in |1>: sqrt(g_n) exp(-sum_{k<=n} g_k dt / 2)."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("gamma must be >= 0")
    return np.sqrt(gamma) * np.exp(-0.5 * np.cumsum(gamma) * grid.dt)


def ideal_coupling(xi0, grid):
    """Coupling that releases the target shape from |1> without any drive.

    The step-averaged rate solves ``exp(-gamma_k dt) = R_{k+1} / R_k`` with
    ``R_k = sum_{j>=k} |xi0_j|^2 dt``, which reproduces exponential targets
    exactly. The last step (R_{M+1} = 0) falls back to ``|xi0_k|^2 / R_k``.
    Past the point where the tail is below ``TAIL_FLOOR`` the coupling is 0.
    """
    p = np.abs(np.asarray(xi0)) ** 2 * grid.dt
    tail = np.cumsum(p[::-1])[::-1]
    nxt = np.append(tail[1:], 0.0)
    gamma = np.zeros_like(tail)
    live = tail > TAIL_FLOOR
    logf = live & (nxt > TAIL_FLOOR)
    gamma[logf] = np.log(tail[logf] / nxt[logf]) / grid.dt
    last = live & ~logf
    gamma[last] = p[last] / tail[last] / grid.dt
    return gamma


def photon_leakage_trace(chain, psi0):
    """1 - ||G_{k,0} psi0||^2 for k = 0..M."""
    phi = chain.forward_states(psi0)
    return 1.0 - np.sum(np.abs(phi) ** 2, axis=1)


def level_leakage_trace(trajectory):
    """Population outside {|0>, |1>} along a density-matrix trajectory."""
    traj = np.asarray(trajectory)
    if traj.shape[-1] < 3:
        return np.zeros(traj.shape[0])
    pops = np.einsum('kii->ki', traj).real
    return np.sum(pops[:, 2:], axis=1)
