"""Objective functionals, their gradients and the control constraints.

All gradients differentiate the same discrete objectives the value functions
evaluate. With ``exact=False`` the step derivatives use the first-order rule
``dV_k/dc_k ~ -i dt (dH/dc) V_k``; with ``exact=True`` they use the exact
Frechet derivative of the step exponential instead.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg
import scipy.signal

from .emitter import liouvillian_drive_terms
from .field import TargetShape, sample_shape
from .propagation import (ControlPulse, TimeGrid, build_chain,
                          density_step_propagators, expm_derivative)

GAMMA_FLOOR = 1e-12
CHANNELS = ("ux", "uy", "gamma")


class Objective(str, Enum):
    J1_ME = "J1_ME"
    J1_QSDE = "J1_QSDE"
    J2 = "J2"
    J3 = "J3"


@dataclass
class ShapingProblem:
    """Everything an objective needs besides the controls.

    ``prep_time`` is the preparation duration T0 used by the J1 objectives;
    it defaults to the grid horizon.
    """

    model: object
    grid: TimeGrid
    objective: Objective
    target: TargetShape | None = None
    c0: complex = 0.0
    c1: complex = 1.0
    psi_target: np.ndarray | None = None
    prep_time: float | None = None
    _target_samples: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.objective = Objective(self.objective)
        norm = abs(self.c0) ** 2 + abs(self.c1) ** 2
        if abs(norm - 1) > 1e-12:
            raise ValueError(f"|c0|^2 + |c1|^2 must be 1, got {norm}")
        if self.objective in (Objective.J2, Objective.J3) and self.target is None:
            raise ValueError(f"{self.objective.value} needs a target shape")
        if self.psi_target is None:
            self.psi_target = self.model.basis(1)
        self.psi_target = np.asarray(self.psi_target, dtype=complex)

    @property
    def target_samples(self):
        if self._target_samples is None:
            self._target_samples = sample_shape(self.target, self.grid)
        return self._target_samples

    @property
    def prep_steps(self):
        t0 = self.grid.t_end if self.prep_time is None else self.prep_time
        m0 = int(round(t0 / self.grid.dt))
        if not 1 <= m0 <= self.grid.n_steps:
            raise ValueError(f"prep_time {t0} outside the grid")
        return m0


def _generator_derivative(model, channel):
    if channel == "ux":
        return model.drive_x
    if channel == "uy":
        return model.drive_y
    if channel == "gamma":
        return -0.5j * model.number
    raise ValueError(f"unknown channel {channel!r}")


def step_derivatives(chain, channel, exact=False):
    """dV_k/dc_k for every step, shape (M, d, d)."""
    dt = chain.grid.dt
    e = -1j * dt * _generator_derivative(chain.model, channel)
    if exact:
        a = -1j * dt * chain.hamiltonians
        return expm_derivative(a, np.broadcast_to(e, a.shape))
    return e[None] @ chain.steps


def _sandwich(left, d, right):
    return np.einsum('ji,jik,jk->j', left, d, right)


# ---------------------------------------------------------------- J1 (QSDE)

def j1_qsde_value(problem, pulse):
    chain = build_chain(problem.model, pulse, problem.grid)
    z = np.vdot(problem.psi_target, chain.forward_states(problem.model.basis(0))[problem.prep_steps])
    return float(1.0 - abs(z) ** 2)


def j1_qsde_gradient(problem, pulse, exact=False):
    """Returns (dJ/du_x, dJ/du_y); entries after the preparation window are 0."""
    model, m = problem.model, problem.grid.n_steps
    m0 = problem.prep_steps
    chain = build_chain(model, pulse, problem.grid)
    phi = chain.forward_states(model.basis(0))
    rows = chain.backward_rows(problem.psi_target, stop=m0)
    z = rows[m0] @ phi[m0]
    out = []
    for ch in ("ux", "uy"):
        d = step_derivatives(chain, ch, exact)[:m0]
        dz = _sandwich(rows[1:m0 + 1], d, phi[:m0])
        g = np.zeros(m)
        g[:m0] = -2.0 * np.real(np.conj(z) * dz)
        out.append(g)
    return tuple(out)


# ---------------------------------------------------------------- J1 (ME)

def _me_setup(problem, pulse):
    model = problem.model
    gens, props = density_step_propagators(model, pulse, problem.grid)
    d = model.dim
    rho = np.zeros((problem.prep_steps + 1, d * d), dtype=complex)
    rho[0] = np.outer(model.basis(0), model.basis(0).conj()).reshape(-1)
    for k in range(problem.prep_steps):
        rho[k + 1] = props[k] @ rho[k]
    proj = np.outer(problem.psi_target, problem.psi_target.conj()).reshape(-1).conj()
    return gens, props, rho, proj


def j1_me_value(problem, pulse):
    _, _, rho, proj = _me_setup(problem, pulse)
    return float(1.0 - np.real(proj @ rho[-1]))


def j1_me_value_and_gradient(problem, pulse, nodes=4):
    """Adjoint gradient of the master-equation infidelity.

    Step derivatives use the Frechet integral
    ``d exp(A)[E] = int_0^1 exp(sA) E exp((1-s)A) ds`` evaluated with
    Gauss-Legendre quadrature; for step norms below ~1 four nodes reach
    round-off level.
    """
    model, grid = problem.model, problem.grid
    m0 = problem.prep_steps
    gens, props, rho, proj = _me_setup(problem, pulse)
    value = float(1.0 - np.real(proj @ rho[-1]))
    costate = np.empty((m0 + 1, proj.size), dtype=complex)
    costate[m0] = -proj
    for k in range(m0, 0, -1):
        costate[k - 1] = costate[k] @ props[k - 1]
    s, w = np.polynomial.legendre.leggauss(nodes)
    s, w = 0.5 * (s + 1.0), 0.5 * w
    a = grid.dt * gens[:m0]
    partial = [scipy.linalg.expm(si * a) for si in s]
    # node i pairs exp(s_i A) on the left with exp((1 - s_i) A) = exp(s_{n-1-i} A) on the right
    lefts = [np.einsum('ji,jik->jk', costate[1:], e) for e in partial]
    rights = [np.einsum('jik,jk->ji', e, rho[:-1]) for e in partial]
    grads = []
    for lx in liouvillian_drive_terms(model):
        e_dir = grid.dt * lx
        acc = np.zeros(m0, dtype=complex)
        for i in range(nodes):
            acc += w[i] * np.einsum('ji,ik,jk->j', lefts[i], e_dir, rights[nodes - 1 - i])
        g = np.zeros(grid.n_steps)
        g[:m0] = np.real(acc)
        grads.append(g)
    return value, grads[0], grads[1]


def j1_me_gradient(problem, pulse):
    """(dJ/du_x, dJ/du_y) of the master-equation infidelity."""
    _, gx, gy = j1_me_value_and_gradient(problem, pulse)
    return gx, gy


# ---------------------------------------------------------------- J2 / J3

def _shaping_targets(problem):
    model = problem.model
    if problem.objective is Objective.J2:
        return model.basis(0), model.basis(0), problem.c0, problem.c1 * problem.target_samples
    if problem.objective is Objective.J3:
        return model.basis(0), model.basis(1), 1.0, problem.target_samples
    raise ValueError(f"{problem.objective.value} is not a shaping objective")


def _photon_amplitudes(chain, phi, beta):
    a = chain.model.a
    return np.einsum('ni,ij,nj->n', beta[1:], a, phi[1:])


def conditional_errors(problem, pulse):
    """(vacuum error, single-photon error, total) of a shaping objective."""
    psi_vac, psi_photon, tgt0, tgt1 = _shaping_targets(problem)
    chain = build_chain(problem.model, pulse, problem.grid)
    xi0 = chain.forward_states(psi_vac)[-1][0]
    beta = chain.backward_rows(problem.model.basis(0))
    xi1 = np.sqrt(pulse.gamma) * _photon_amplitudes(chain, chain.forward_states(psi_photon), beta)
    e_vac = float(abs(xi0 - tgt0) ** 2)
    e_photon = float(np.sum(np.abs(xi1 - tgt1) ** 2) * problem.grid.dt)
    return e_vac, e_photon, e_vac + e_photon


def j2_value(problem, pulse):
    if problem.objective is not Objective.J2:
        raise ValueError("problem is not a J2 problem")
    return conditional_errors(problem, pulse)[2]


def j3_value(problem, pulse):
    if problem.objective is not Objective.J3:
        raise ValueError("problem is not a J3 problem")
    return conditional_errors(problem, pulse)[2]


def shaping_value_and_gradient(problem, pulse, channels=CHANNELS, exact=False,
                               sqrt_coupling=False):
    """Value of J2/J3 and its gradient for the requested channels.

    With ``sqrt_coupling`` the ``gamma`` entry is the derivative with respect to
    ``sqrt(gamma)``, which stays finite where the coupling vanishes. Otherwise
    steps with ``gamma < GAMMA_FLOOR`` drop the prefactor term.
    """
    model, grid = problem.model, problem.grid
    dt, m = grid.dt, grid.n_steps
    psi_vac, psi_photon, tgt0, tgt1 = _shaping_targets(problem)
    chain = build_chain(model, pulse, grid)
    a = model.a
    beta = chain.backward_rows(model.basis(0))
    phi_v = chain.forward_states(psi_vac)
    phi_p = phi_v if psi_photon is psi_vac else chain.forward_states(psi_photon)
    amp = _photon_amplitudes(chain, phi_p, beta)
    sg = np.sqrt(pulse.gamma)
    xi0 = phi_v[-1][0]
    xi1 = sg * amp
    e_vac = abs(xi0 - tgt0) ** 2
    e_photon = np.sum(np.abs(xi1 - tgt1) ** 2) * dt
    r0 = np.conj(xi0 - tgt0)
    w = np.conj(xi1 - tgt1) * dt

    # lam_j = sum_{n>=j} w_n sqrt(g_n) <0|G_{M,n} a G_{n,j}   (row, j = 1..M)
    # chi_j = sum_{n<=j} w_n sqrt(g_n) G_{j,n} a phi_n         (column, j = 0..M)
    src = (w * sg)[:, None]
    lam = np.zeros((m + 1, model.dim), dtype=complex)
    lam[m] = src[m - 1] * (beta[m] @ a)
    for j in range(m - 1, 0, -1):
        lam[j] = src[j - 1] * (beta[j] @ a) + lam[j + 1] @ chain.steps[j]
    chi = np.zeros((m + 1, model.dim), dtype=complex)
    for k in range(1, m + 1):
        chi[k] = chain.steps[k - 1] @ chi[k - 1] + src[k - 1] * (a @ phi_p[k])

    grads = {}
    for ch in channels:
        d = step_derivatives(chain, ch, exact)
        total = (r0 * _sandwich(beta[1:], d, phi_v[:-1])
                 + _sandwich(lam[1:], d, phi_p[:-1])
                 + _sandwich(beta[1:], d, chi[:-1]))
        if ch == "gamma":
            if sqrt_coupling:
                total = 2.0 * sg * total + w * amp
            else:
                live = pulse.gamma >= GAMMA_FLOOR
                pref = np.zeros(m, dtype=complex)
                pref[live] = w[live] * amp[live] / (2.0 * sg[live])
                total = total + pref
        grads[ch] = 2.0 * np.real(total)
    return float(e_vac + e_photon), grads


def shaping_gradient(problem, pulse, exact=False, sqrt_coupling=False):
    """(dJ/du_x, dJ/du_y, dJ/dgamma) for a J2 or J3 problem."""
    _, g = shaping_value_and_gradient(problem, pulse, CHANNELS, exact, sqrt_coupling)
    return g["ux"], g["uy"], g["gamma"]


def objective_value(problem, pulse):
    kind = problem.objective
    if kind is Objective.J1_ME:
        return j1_me_value(problem, pulse)
    if kind is Objective.J1_QSDE:
        return j1_qsde_value(problem, pulse)
    return conditional_errors(problem, pulse)[2]


def objective_value_and_gradient(problem, pulse, channels=CHANNELS, exact=True,
                                 sqrt_coupling=True):
    """Value and a dict of per-channel gradients for any objective."""
    kind = problem.objective
    if kind in (Objective.J2, Objective.J3):
        return shaping_value_and_gradient(problem, pulse, channels, exact, sqrt_coupling)
    if "gamma" in channels:
        raise ValueError("J1 objectives have a fixed residual coupling")
    if kind is Objective.J1_ME:
        val, gx, gy = j1_me_value_and_gradient(problem, pulse)
    else:
        gx, gy = j1_qsde_gradient(problem, pulse, exact)
        val = j1_qsde_value(problem, pulse)
    full = {"ux": gx, "uy": gy}
    return val, {ch: full[ch] for ch in channels}


# ---------------------------------------------------------------- constraints

def tukey_envelope(n, ramp_fraction=0.1):
    """Tapered-cosine window with exact zeros at both ends."""
    if n < 3:
        return np.zeros(n)
    s = scipy.signal.windows.tukey(n, alpha=ramp_fraction, sym=True)
    s[0] = s[-1] = 0.0
    return s


def gaussian_filter_matrix(n, std_steps, truncate=4.0):
    """Row-normalised Gaussian smoothing matrix; the identity when std_steps == 0."""
    if std_steps <= 0:
        return np.eye(n)
    idx = np.arange(n)
    diff = idx[:, None] - idx[None, :]
    k = np.exp(-0.5 * (diff / std_steps) ** 2)
    k[np.abs(diff) > truncate * std_steps] = 0.0
    return k / k.sum(axis=1, keepdims=True)


@dataclass
class ConstraintTransform:
    """u = clip(S_en F_LP v, -B, B)."""

    envelope: np.ndarray
    filter: np.ndarray
    bound: float = 2 * np.pi * 80e-3

    @classmethod
    def build(cls, grid, ramp_fraction=0.1, filter_std=1.0, bound=2 * np.pi * 80e-3):
        n = grid.n_steps
        return cls(tukey_envelope(n, ramp_fraction),
                   gaussian_filter_matrix(n, filter_std / grid.dt), float(bound))

    @property
    def matrix(self):
        return self.envelope[:, None] * self.filter

    def raw(self, v):
        return self.envelope * (self.filter @ np.asarray(v, dtype=float))

    def saturated(self, v):
        return np.abs(self.raw(v)) >= self.bound


def apply_constraints(transform, vx, vy):
    b = transform.bound
    return np.clip(transform.raw(vx), -b, b), np.clip(transform.raw(vy), -b, b)


def pullback_gradient(transform, grad_u, saturated=None):
    """(S_en F_LP)^T dJ/du, with saturated entries of dJ/du zeroed first."""
    g = np.asarray(grad_u, dtype=float)
    if saturated is not None:
        g = np.where(saturated, 0.0, g)
    return transform.filter.T @ (transform.envelope * g)
