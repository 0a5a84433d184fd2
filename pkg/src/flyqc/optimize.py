"""Box-projected L-BFGS with a strong-Wolfe line search."""

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np


class OptimizationError(RuntimeError):
    """The objective or its gradient is not finite at the starting point."""


@dataclass
class OptimizerConfig:
    memory: int = 10
    max_iters: int = 500
    grad_tol: float = 1e-6
    objective_tol: float = 1e-10
    c1: float = 1e-4
    c2: float = 0.9
    max_ls: int = 25
    rng_seed: int = 0
    restarts: int = 4
    init_scale: float = 0.5

    def __post_init__(self):
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("line-search constants need 0 < c1 < c2 < 1")
        if self.memory < 0 or self.max_iters < 0:
            raise ValueError("memory and max_iters must be non-negative")


@dataclass
class OptimizationResult:
    x: np.ndarray
    fun: float
    trace: list = field(default_factory=list)
    reason: str = "max_iters"
    n_iters: int = 0
    n_evals: int = 0
    wall_time: float = 0.0


def finite_difference_gradient(value_fn, x, h=1e-6):
    """Central differences, one coordinate at a time."""
    if not h > 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    e = np.zeros_like(x)
    for i in range(x.size):
        e[i] = h
        g[i] = (value_fn(x + e) - value_fn(x - e)) / (2 * h)
        e[i] = 0.0
    return g


def _bounds_arrays(bounds, n):
    if bounds is None:
        return np.full(n, -np.inf), np.full(n, np.inf)
    lo, hi = bounds
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,)).copy()
    if np.any(lo > hi):
        raise ValueError("lower bound exceeds upper bound")
    return lo, hi


def projected_gradient(x, g, lo, hi):
    """Zero the components that push against an active bound."""
    pg = g.copy()
    pg[(x <= lo) & (g > 0)] = 0.0
    pg[(x >= hi) & (g < 0)] = 0.0
    return pg


def two_loop(g, pairs):
    """Approximate inverse-Hessian product -H g from stored (s, y, rho) pairs."""
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def _cubic_min(a, fa, ga, b, fb, gb):
    d1 = ga + gb - 3 * (fa - fb) / (a - b)
    rad = d1 * d1 - ga * gb
    if rad < 0:
        return None
    d2 = np.sign(b - a) * np.sqrt(rad)
    t = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2 * d2)
    return t if np.isfinite(t) else None


def strong_wolfe(phi, f0, g0, step, c1, c2, max_ls):
    """Search ``phi(alpha) -> (f, dphi)`` for a strong-Wolfe step.

    Returns ``(alpha, f, extra, ok)``; ``ok`` is False when only sufficient
    decrease (or nothing) could be established within ``max_ls`` trials.
    """
    best = None
    prev_a, prev_f, prev_g = 0.0, f0, g0
    a = step
    lo = hi = None
    for i in range(max_ls):
        f, g, extra = phi(a)
        if np.isfinite(f) and f <= f0 + c1 * a * g0 and (best is None or f < best[1]):
            best = (a, f, extra)
        if lo is None:
            if not np.isfinite(f) or f > f0 + c1 * a * g0 or (i > 0 and f >= prev_f):
                lo, hi = (prev_a, prev_f, prev_g), (a, f, g)
            elif abs(g) <= -c2 * g0:
                return a, f, extra, True
            elif g >= 0:
                lo, hi = (a, f, g), (prev_a, prev_f, prev_g)
            else:
                prev_a, prev_f, prev_g = a, f, g
                a = 2.0 * a
                continue
        else:
            if not np.isfinite(f) or f > f0 + c1 * a * g0 or f >= lo[1]:
                hi = (a, f, g)
            else:
                if abs(g) <= -c2 * g0:
                    return a, f, extra, True
                if g * (hi[0] - lo[0]) >= 0:
                    hi = lo
                lo = (a, f, g)
        # zoom: interpolate inside the bracket, safeguarded towards the middle
        x0, x1 = lo[0], hi[0]
        t = None
        if np.isfinite(hi[1]) and np.isfinite(hi[2]):
            t = _cubic_min(lo[0], lo[1], lo[2], hi[0], hi[1], hi[2])
        left, right = min(x0, x1), max(x0, x1)
        width = right - left
        if t is None or not (left + 0.1 * width <= t <= right - 0.1 * width):
            t = 0.5 * (x0 + x1)
        if width <= 1e-16 * max(1.0, abs(right)):
            break
        a = t
    if best is not None:
        return best[0], best[1], best[2], False
    return 0.0, f0, None, False


def minimize(value_fn, gradient_fn, x0, bounds=None, config=None):
    """Minimise ``value_fn`` from ``x0`` inside optional box ``bounds = (lo, hi)``.

    Iterates stay feasible by clamping; gradient components that point out of
    an active bound are zeroed before the quasi-Newton update.
    """
    cfg = config or OptimizerConfig()
    start = time.perf_counter()
    x = np.asarray(x0, dtype=float).copy()
    lo, hi = _bounds_arrays(bounds, x.size)
    if np.any(x < lo) or np.any(x > hi):
        raise ValueError("x0 lies outside the bounds")
    n_evals = [0]

    def evaluate(xa):
        n_evals[0] += 1
        return float(value_fn(xa)), np.asarray(gradient_fn(xa), dtype=float)

    f, g = evaluate(x)
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise OptimizationError(f"objective or gradient not finite at the initial point (f={f})")
    pairs = deque(maxlen=cfg.memory) if cfg.memory > 0 else deque(maxlen=0)
    trace = [f]
    reason = "max_iters"
    it = 0
    while it < cfg.max_iters:
        pg = projected_gradient(x, g, lo, hi)
        if np.max(np.abs(pg), initial=0.0) <= cfg.grad_tol:
            reason = "grad_tol"
            break
        d = two_loop(pg, list(pairs))
        blocked = ((x <= lo) & (d < 0)) | ((x >= hi) & (d > 0))
        d[blocked] = 0.0
        slope = d @ pg
        if not slope < 0:
            pairs.clear()
            d = -pg
            slope = d @ pg
        step = 1.0 if pairs else min(1.0, 1.0 / np.linalg.norm(pg))

        def phi(alpha):
            xa = np.clip(x + alpha * d, lo, hi)
            fa, ga = evaluate(xa)
            moved = (xa - x) != 0
            return fa, float(ga[moved] @ d[moved]), (xa, ga)

        alpha, f_new, extra, _ok = strong_wolfe(phi, f, slope, step, cfg.c1, cfg.c2, cfg.max_ls)
        if extra is None or not f_new < f:
            if pairs:
                pairs.clear()
                continue
            reason = "line_search_failure"
            break
        x_new, g_new = extra
        s = x_new - x
        y = g_new - g
        sy = s @ y
        if sy > 1e-12:
            pairs.append((s, y, 1.0 / sy))
        decrease = f - f_new
        x, f, g = x_new, f_new, g_new
        trace.append(f)
        it += 1
        if decrease <= cfg.objective_tol * max(abs(f), 1e-300):
            reason = "objective_tol"
            break
    return OptimizationResult(x, f, trace, reason, it, n_evals[0], time.perf_counter() - start)
