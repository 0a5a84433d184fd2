"""Flat optimisation variables <-> constrained control pulses."""

from dataclasses import dataclass, field

import numpy as np

from .objectives import apply_constraints, objective_value_and_gradient, pullback_gradient
from .propagation import ControlPulse


@dataclass
class ControlSpace:
    """Free variables for an objective.

    The drive is parametrised by unconstrained ``v_x, v_y`` through the
    constraint transform. A free coupling is parametrised by ``s = sqrt(gamma)``
    with box bounds; otherwise ``gamma_fixed`` is used.
    """

    problem: object
    transform: object
    gamma_fixed: np.ndarray
    free_u: bool = True
    free_gamma: bool = False
    gamma_min: float = 0.0
    gamma_max: float = np.inf
    exact: bool = True
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self.gamma_fixed = np.broadcast_to(np.asarray(self.gamma_fixed, dtype=float),
                                           (self.n_steps,)).copy()
        if not (self.free_u or self.free_gamma):
            raise ValueError("nothing to optimise")

    @property
    def n_steps(self):
        return self.problem.grid.n_steps

    @property
    def size(self):
        return self.n_steps * (2 * self.free_u + self.free_gamma)

    def split(self, x):
        m = self.n_steps
        x = np.asarray(x, dtype=float)
        vx = vy = s = None
        off = 0
        if self.free_u:
            vx, vy = x[:m], x[m:2 * m]
            off = 2 * m
        if self.free_gamma:
            s = x[off:off + m]
        return vx, vy, s

    def bounds(self):
        lo = np.full(self.size, -np.inf)
        hi = np.full(self.size, np.inf)
        if self.free_gamma:
            lo[-self.n_steps:] = np.sqrt(self.gamma_min)
            hi[-self.n_steps:] = np.sqrt(self.gamma_max)
        return lo, hi

    def pulse(self, x):
        vx, vy, s = self.split(x)
        m = self.n_steps
        if self.free_u:
            ux, uy = apply_constraints(self.transform, vx, vy)
        else:
            ux = uy = np.zeros(m)
        gamma = s ** 2 if self.free_gamma else self.gamma_fixed
        return ControlPulse(ux, uy, gamma)

    def pack(self, vx=None, vy=None, gamma=None):
        parts = []
        if self.free_u:
            parts += [np.zeros(self.n_steps) if vx is None else vx,
                      np.zeros(self.n_steps) if vy is None else vy]
        if self.free_gamma:
            g = self.gamma_fixed if gamma is None else gamma
            parts.append(np.sqrt(np.clip(g, self.gamma_min, self.gamma_max)))
        return np.concatenate(parts)

    def initial_guess(self, rng, scale=0.5):
        """Uniform random v in [-scale, scale] * B; the coupling starts at gamma_fixed."""
        b = self.transform.bound if self.transform is not None else 1.0
        vx = rng.uniform(-scale * b, scale * b, self.n_steps) if self.free_u else None
        vy = rng.uniform(-scale * b, scale * b, self.n_steps) if self.free_u else None
        return self.pack(vx, vy)

    def _evaluate(self, x):
        key = np.asarray(x, dtype=float).tobytes()
        hit = self._cache.get("key")
        if hit == key:
            return self._cache["val"], self._cache["grad"]
        vx, vy, s = self.split(x)
        pulse = self.pulse(x)
        channels = (("ux", "uy") if self.free_u else ()) + (("gamma",) if self.free_gamma else ())
        val, grads = objective_value_and_gradient(self.problem, pulse, channels,
                                                  exact=self.exact, sqrt_coupling=True)
        parts = []
        if self.free_u:
            parts.append(pullback_gradient(self.transform, grads["ux"], self.transform.saturated(vx)))
            parts.append(pullback_gradient(self.transform, grads["uy"], self.transform.saturated(vy)))
        if self.free_gamma:
            parts.append(grads["gamma"])
        grad = np.concatenate(parts)
        self._cache.update(key=key, val=val, grad=grad)
        return val, grad

    def value(self, x):
        return self._evaluate(x)[0]

    def gradient(self, x):
        return self._evaluate(x)[1]
