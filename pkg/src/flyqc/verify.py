"""Verification runs: finite-difference gradient checks and undriven simulation."""

from dataclasses import dataclass

import numpy as np

from .emitter import EmitterModel
from .field import TargetShape, analytic_decay_shape, flying_qubit_state, ideal_coupling, sample_shape
from .objectives import (ConstraintTransform, Objective, ShapingProblem, apply_constraints,
                         objective_value, objective_value_and_gradient, pullback_gradient)
from .optimize import finite_difference_gradient
from .propagation import ControlPulse, TimeGrid, build_chain
from .units import mhz_to_angular

# free channels per objective in the gradient check
CHECK_CHANNELS = {
    Objective.J1_QSDE: ("ux", "uy"),
    Objective.J2: ("ux", "uy", "gamma"),
    Objective.J3: ("ux", "uy", "gamma"),
}


@dataclass(frozen=True)
class SmoothPulse:
    """Random band-limited drive and coupling, defined in continuous time.

    Sampling the same functions on two grids lets the gradient error be
    compared at dt and dt/2.
    """

    t_end: float
    coeffs: np.ndarray          # (3, n_modes) sine-series coefficients for ux, uy, gamma
    u_scale: float
    gamma_mean: float

    @classmethod
    def draw(cls, rng, t_end, n_modes=6, u_scale=2 * np.pi * 10e-3, gamma_mean=2 * np.pi * 5e-3):
        return cls(t_end, rng.uniform(-1, 1, size=(3, n_modes)), u_scale, gamma_mean)

    def sample(self, grid):
        t = grid.times[:-1] + 0.5 * grid.dt
        k = np.arange(1, self.coeffs.shape[1] + 1)
        basis = np.sin(np.pi * np.outer(t, k) / self.t_end)
        scale = 1.0 / np.sqrt(self.coeffs.shape[1])
        ux = self.u_scale * scale * basis @ self.coeffs[0]
        uy = self.u_scale * scale * basis @ self.coeffs[1]
        gamma = self.gamma_mean * (1.0 + 0.5 * scale * basis @ self.coeffs[2])
        return ControlPulse(ux, uy, np.clip(gamma, 0.1 * self.gamma_mean, None))


def _problem(kind, model, grid):
    if kind is Objective.J1_QSDE:
        return ShapingProblem(model, grid, kind)
    shape = TargetShape("exp_rise", 2 * np.pi * 6e-3)
    c0, c1 = (np.sqrt(0.5), np.sqrt(0.5)) if kind is Objective.J2 else (0.0, 1.0)
    return ShapingProblem(model, grid, kind, shape, c0=c0, c1=c1)


def channel_errors(problem, pulse, exact=False, h=1e-6):
    """Relative L2 error of the analytic gradient per channel and over all channels."""
    channels = CHECK_CHANNELS[problem.objective]
    _, grads = objective_value_and_gradient(problem, pulse, channels, exact=exact,
                                            sqrt_coupling=False)
    out, num, den = {}, 0.0, 0.0
    for ch in channels:
        base = getattr(pulse, ch)
        fd = finite_difference_gradient(
            lambda x, ch=ch: objective_value(problem, pulse.replace(**{ch: x})), base, h)
        diff = np.linalg.norm(grads[ch] - fd)
        out[ch] = float(diff / np.linalg.norm(fd))
        num += diff ** 2
        den += np.linalg.norm(fd) ** 2
    out["all"] = float(np.sqrt(num / den))
    return out


def pullback_error(n_steps=200, dt=0.1, seed=0, h=1e-3):
    """Error of the constraint pullback against finite differences of the composite map."""
    rng = np.random.default_rng(seed)
    grid = TimeGrid.from_dt(n_steps * dt, dt)
    transform = ConstraintTransform.build(grid, bound=0.3)
    v = rng.normal(0, 0.3, n_steps)
    g = rng.normal(size=n_steps)

    def f(x):
        return float(g @ apply_constraints(transform, x, x)[0])

    analytic = pullback_gradient(transform, g, transform.saturated(v))
    fd = finite_difference_gradient(f, v, h)
    return float(np.linalg.norm(analytic - fd) / np.linalg.norm(fd))


def gradient_check(dim=5, n_steps=200, dt=0.1, eta_mhz=-200.0, seed=0, exact=False):
    """First-order gradient errors at dt and dt/2 (same horizon) for each objective."""
    model = EmitterModel(dim, mhz_to_angular(eta_mhz))
    t_end = n_steps * dt
    rng = np.random.default_rng(seed)
    report = {}
    for kind in CHECK_CHANNELS:
        smooth = SmoothPulse.draw(rng, t_end)
        errs = []
        for step in (dt, dt / 2):
            grid = TimeGrid.from_dt(t_end, step)
            errs.append(channel_errors(_problem(kind, model, grid), smooth.sample(grid), exact))
        report[kind.value] = {
            "dt_ns": [dt, dt / 2],
            "error_dt": errs[0],
            "error_half_dt": errs[1],
            "ratio": {ch: errs[0][ch] / errs[1][ch] for ch in errs[0]},
        }
    report["pullback_error"] = pullback_error(n_steps, dt, seed)
    return report


def simulate_ideal_emission(shape, grid, dim=5, eta=0.0):
    """Undriven emitter in |1> with the ideal coupling for ``shape``.

    Returns (gamma, emitted xi1, discrete analytic shape, samples of the target).
    """
    model = EmitterModel(dim, eta)
    target = sample_shape(shape, grid)
    gamma = ideal_coupling(target, grid)
    pulse = ControlPulse(np.zeros(grid.n_steps), np.zeros(grid.n_steps), gamma)
    state = flying_qubit_state(build_chain(model, pulse, grid), pulse, model.basis(1))
    return gamma, state, analytic_decay_shape(gamma, grid), target
