"""Time grids, piecewise-constant controls and their propagators."""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .emitter import effective_hamiltonians, liouvillians


class TailWarning(UserWarning):
    """The horizon is too short for the emitter to have relaxed."""


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    t_end: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")

    @classmethod
    def from_dt(cls, t_end, dt):
        n = int(round(t_end / dt))
        if n < 1 or abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
            raise ValueError(f"t_end={t_end} is not an integer multiple of dt={dt}")
        return cls(float(t_end), n)

    @property
    def dt(self):
        return self.t_end / self.n_steps

    @property
    def times(self):
        """Sample times t_0..t_M."""
        return np.arange(self.n_steps + 1) * self.dt

    @property
    def step_times(self):
        """End points t_1..t_M of the control steps."""
        return self.times[1:]


@dataclass
class ControlPulse:
    """Piecewise-constant controls; entry k acts on [t_{k-1}, t_k]."""

    ux: np.ndarray
    uy: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        self.ux = np.asarray(self.ux, dtype=float)
        self.uy = np.asarray(self.uy, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)
        if not (self.ux.shape == self.uy.shape == self.gamma.shape) or self.ux.ndim != 1:
            raise ValueError("ux, uy and gamma must be 1-D arrays of equal length")
        if np.any(self.gamma < 0):
            raise ValueError("gamma entries must be >= 0")

    @classmethod
    def zeros(cls, n_steps, gamma=0.0):
        g = np.broadcast_to(np.asarray(gamma, dtype=float), (n_steps,)).copy()
        return cls(np.zeros(n_steps), np.zeros(n_steps), g)

    def __len__(self):
        return len(self.ux)

    def replace(self, **kw):
        d = dict(ux=self.ux, uy=self.uy, gamma=self.gamma)
        d.update(kw)
        return ControlPulse(**d)


def _is_diagonal(h):
    off = h - np.einsum('...ii->...i', h)[..., None] * np.eye(h.shape[-1])
    return not np.any(off)


def step_propagator(h, dt):
    """exp(-i H dt) for a square matrix or a stack of them."""
    h = np.asarray(h, dtype=complex)
    if h.shape[-1] != h.shape[-2]:
        raise ValueError("H must be square")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if _is_diagonal(h):
        diag = np.exp(-1j * dt * np.einsum('...ii->...i', h))
        return diag[..., None] * np.eye(h.shape[-1])
    return scipy.linalg.expm(-1j * dt * h)


def expm_derivative(a, e):
    """Exact directional derivative of expm at ``a`` along ``e`` (stacks allowed)."""
    d = a.shape[-1]
    block = np.zeros(a.shape[:-2] + (2 * d, 2 * d), dtype=complex)
    block[..., :d, :d] = a
    block[..., d:, d:] = a
    block[..., :d, d:] = e
    return scipy.linalg.expm(block)[..., :d, d:]


@dataclass
class PropagatorChain:
    """Step propagators V_k with cached prefix products G_{k,0}."""

    steps: np.ndarray
    grid: TimeGrid
    hamiltonians: np.ndarray = field(repr=False)
    model: object = field(default=None, repr=False)
    forward: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m, d, _ = self.steps.shape
        fwd = np.empty((m + 1, d, d), dtype=complex)
        fwd[0] = np.eye(d)
        for k in range(m):
            fwd[k + 1] = self.steps[k] @ fwd[k]
        self.forward = fwd

    @property
    def n_steps(self):
        return self.steps.shape[0]

    @property
    def dim(self):
        return self.steps.shape[1]

    def forward_states(self, psi0):
        """phi_k = G_{k,0} psi0 for k = 0..M, shape (M+1, d)."""
        return self.forward @ np.asarray(psi0, dtype=complex)

    def backward_rows(self, bra, stop=None):
        """Rows <bra| G_{stop,k} for k = 0..stop (default stop = M)."""
        stop = self.n_steps if stop is None else stop
        rows = np.empty((stop + 1, self.dim), dtype=complex)
        rows[stop] = np.asarray(bra, dtype=complex).conj()
        for k in range(stop, 0, -1):
            rows[k - 1] = rows[k] @ self.steps[k - 1]
        return rows


def build_chain(model, pulse, grid):
    if len(pulse) != grid.n_steps:
        raise ValueError(f"pulse has {len(pulse)} steps, grid has {grid.n_steps}")
    h = effective_hamiltonians(model, pulse.ux, pulse.uy, pulse.gamma)
    if h.shape[-1] != model.dim:
        raise ValueError("dimension mismatch between model and operators")
    return PropagatorChain(step_propagator(h, grid.dt), grid, h, model)


def transition(chain, j, n):
    """G_{n,j} = V_n ... V_{j+1}; the identity when j == n."""
    if not 0 <= j <= n <= chain.n_steps:
        raise IndexError(f"need 0 <= j <= n <= {chain.n_steps}, got j={j}, n={n}")
    if j == 0:
        return chain.forward[n].copy()
    g = np.eye(chain.dim, dtype=complex)
    for k in range(j, n):
        g = chain.steps[k] @ g
    return g


def tail_population(chain, psi0):
    """Excited-state weight left in the no-jump state at the horizon."""
    phi = chain.forward_states(psi0)[-1]
    return float(np.sum(np.abs(phi[1:]) ** 2))


def check_tail(chain, psi0, tol=1e-4, strict=False):
    pop = tail_population(chain, psi0)
    if pop > tol:
        msg = (f"excited population {pop:.3e} remains at t={chain.grid.t_end} ns; "
               "horizon too short for G(T, t) to stand in for G(inf, t)")
        if strict:
            raise TailWarning(msg)
        warnings.warn(msg, TailWarning, stacklevel=2)
    return pop


def density_step_propagators(model, pulse, grid, gamma0=None):
    """Exact per-step superoperator propagators exp(L_k dt)."""
    if len(pulse) != grid.n_steps:
        raise ValueError(f"pulse has {len(pulse)} steps, grid has {grid.n_steps}")
    if gamma0 is None:
        gamma0 = float(pulse.gamma[0]) if len(pulse) else 0.0
        if not np.allclose(pulse.gamma, gamma0, rtol=0, atol=1e-15):
            raise ValueError("master-equation runs need a constant residual coupling")
    gens = liouvillians(model, pulse.ux, pulse.uy, gamma0)
    return gens, scipy.linalg.expm(grid.dt * gens)


def evolve_density(model, pulse, rho0, grid, gamma0=None, check=True):
    """Density-matrix trajectory rho(t_0..t_M), shape (M+1, d, d)."""
    rho0 = np.asarray(rho0, dtype=complex)
    d = model.dim
    if rho0.shape != (d, d):
        raise ValueError(f"rho0 must have shape {(d, d)}, got {rho0.shape}")
    _, props = density_step_propagators(model, pulse, grid, gamma0)
    traj = np.empty((grid.n_steps + 1, d * d), dtype=complex)
    traj[0] = rho0.reshape(-1)
    for k in range(grid.n_steps):
        traj[k + 1] = props[k] @ traj[k]
    traj = traj.reshape(-1, d, d)
    if not np.all(np.isfinite(traj)):
        raise IntegrationError("non-finite density matrix in master-equation propagation")
    if check:
        tr = np.einsum('kii->k', traj).real
        if np.max(np.abs(tr - tr[0])) > 1e-8:
            raise IntegrationError(f"trace drift {np.max(np.abs(tr - tr[0])):.2e}")
    return traj
