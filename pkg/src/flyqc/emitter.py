"""Truncated anharmonic-oscillator emitter and its generators."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class EmitterModel:
    """A transmon-like emitter truncated to ``dim`` levels.

    Parameters
    ----------
    dim : int
        Number of retained levels (>= 2).
    eta : float
        Anharmonicity in rad/ns (negative for transmons).
    """

    dim: int = 5
    eta: float = 0.0

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"dim must be an integer >= 2, got {self.dim!r}")

    @cached_property
    def a(self):
        return np.diag(np.sqrt(np.arange(1, self.dim, dtype=float)), 1).astype(complex)

    @cached_property
    def adag(self):
        return self.a.conj().T

    @cached_property
    def number(self):
        return self.adag @ self.a

    @cached_property
    def kerr(self):
        # built from operator products so truncation matches the operator model
        return 0.5 * self.eta * (self.adag @ self.adag @ self.a @ self.a)

    @cached_property
    def drive_x(self):
        """dH/du_x = a^dag + a."""
        return self.adag + self.a

    @cached_property
    def drive_y(self):
        """dH/du_y = i (a^dag - a)."""
        return 1j * (self.adag - self.a)

    def basis(self, n):
        psi = np.zeros(self.dim, dtype=complex)
        psi[n] = 1.0
        return psi


def lowering_operator(model):
    return model.a.copy()


def effective_hamiltonian(model, u_x, u_y, gamma):
    """Non-Hermitian no-jump generator for one set of control values.

    ``H = (eta/2) a^dag^2 a^2 + u a^dag + u^* a - (i gamma / 2) a^dag a`` with
    ``u = u_x + i u_y``.
    """
    if gamma < 0:
        raise ValueError(f"coupling gamma must be >= 0, got {gamma}")
    u = complex(u_x, u_y)
    return (model.kerr + u * model.adag + np.conj(u) * model.a
            - 0.5j * gamma * model.number)


def effective_hamiltonians(model, ux, uy, gamma):
    """Stack of effective Hamiltonians, one per control step (shape (M, d, d))."""
    ux = np.asarray(ux, dtype=float)
    uy = np.asarray(uy, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("coupling gamma must be >= 0")
    u = ux + 1j * uy
    return (model.kerr[None] + u[:, None, None] * model.adag[None]
            + np.conj(u)[:, None, None] * model.a[None]
            - 0.5j * gamma[:, None, None] * model.number[None])


def _check_rho(model, rho):
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"rho must be a square matrix, got shape {rho.shape}")
    if rho.shape[0] != model.dim:
        raise ValueError(f"rho has dimension {rho.shape[0]}, model has {model.dim}")
    return rho


def lindblad_rhs(model, rho, u_x, u_y, gamma0):
    """Time derivative of rho under the decay master equation."""
    if gamma0 < 0:
        raise ValueError(f"gamma0 must be >= 0, got {gamma0}")
    rho = _check_rho(model, rho)
    u = complex(u_x, u_y)
    h = model.kerr + u * model.adag + np.conj(u) * model.a
    a, ad, n = model.a, model.adag, model.number
    return (-1j * (h @ rho - rho @ h)
            + gamma0 * (a @ rho @ ad - 0.5 * rho @ n - 0.5 * n @ rho))


def _superop(left, right):
    """Row-major vectorisation: vec(L rho R) = kron(L, R^T) vec(rho)."""
    return np.kron(left, right.T)


def _commutator_superop(h):
    eye = np.eye(h.shape[0])
    return _superop(h, eye) - _superop(eye, h)


def liouvillians(model, ux, uy, gamma0):
    """Stack of Liouvillian superoperators (M, d^2, d^2) acting on row-major vec(rho)."""
    ux = np.asarray(ux, dtype=float)
    uy = np.asarray(uy, dtype=float)
    eye = np.eye(model.dim)
    a, ad, n = model.a, model.adag, model.number
    base = -1j * _commutator_superop(model.kerr)
    base = base + gamma0 * (_superop(a, ad) - 0.5 * _superop(eye, n) - 0.5 * _superop(n, eye))
    lx, ly = liouvillian_drive_terms(model)
    return base[None] + ux[:, None, None] * lx[None] + uy[:, None, None] * ly[None]


def liouvillian_drive_terms(model):
    """Derivatives of the Liouvillian with respect to u_x and u_y."""
    return (-1j * _commutator_superop(model.drive_x),
            -1j * _commutator_superop(model.drive_y))
