import numpy as np
import pytest

from conftest import MHZ
from flyqc.baselines import cutoff_coupling, drag_pulse, gaussian_pi_pulse
from flyqc.emitter import EmitterModel
from flyqc.objectives import Objective, ShapingProblem, j1_qsde_value
from flyqc.propagation import TimeGrid

GRID = TimeGrid.from_dt(10.0, 0.05)


def test_gaussian_area_is_half_pi():
    p = gaussian_pi_pulse(10.0, 10.0 / 6.5, GRID)
    assert np.sum(p.ux) * GRID.dt == pytest.approx(np.pi / 2)
    assert np.all(p.uy == 0)
    assert GRID.step_times[np.argmax(p.ux)] == pytest.approx(5.0, abs=GRID.dt)


def test_gaussian_inverts_a_qubit():
    m = EmitterModel(2)
    p = gaussian_pi_pulse(10.0, 1.5, GRID)
    assert j1_qsde_value(ShapingProblem(m, GRID, Objective.J1_QSDE), p) < 1e-12


def test_gaussian_bound_warning():
    with pytest.warns(RuntimeWarning):
        gaussian_pi_pulse(10.0, 0.2, GRID, bound=0.5)
    with pytest.raises(ValueError):
        gaussian_pi_pulse(10.0, 0.0, GRID)
    with pytest.raises(ValueError):
        gaussian_pi_pulse(20.0, 1.0, GRID)


def test_drag_quadrature_is_scaled_derivative():
    eta = -200 * MHZ
    g = gaussian_pi_pulse(10.0, 1.5, GRID)
    d = drag_pulse(g, eta, GRID.dt)
    assert np.array_equal(d.ux, g.ux)
    assert np.allclose(d.uy, -np.gradient(g.ux, GRID.dt) / eta)
    with pytest.raises(ValueError):
        drag_pulse(g, 0.0, GRID.dt)


def test_drag_beats_gaussian_on_transmon():
    m = EmitterModel(5, -200 * MHZ)
    problem = ShapingProblem(m, GRID, Objective.J1_QSDE)
    g = gaussian_pi_pulse(10.0, 10.0 / 6.5, GRID, gamma=0.5 * MHZ)
    assert j1_qsde_value(problem, drag_pulse(g, m.eta, GRID.dt)) < j1_qsde_value(problem, g)


def test_cutoff_clamps():
    assert np.array_equal(cutoff_coupling([0.0, 0.5, 3.0], 0.1, 1.0), [0.1, 0.5, 1.0])
    with pytest.raises(ValueError):
        cutoff_coupling([1.0], 2.0, 1.0)
