import warnings

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import MHZ, random_pulse
from flyqc.emitter import EmitterModel, effective_hamiltonian
from flyqc.propagation import (ControlPulse, IntegrationError, TailWarning, TimeGrid, build_chain,
                               check_tail, evolve_density, expm_derivative, step_propagator,
                               transition)


def test_time_grid_from_dt():
    g = TimeGrid.from_dt(10.0, 0.05)
    assert g.n_steps == 200
    assert g.times[0] == 0 and g.times[-1] == pytest.approx(10.0)
    assert len(g.step_times) == 200 and g.step_times[0] == pytest.approx(0.05)
    with pytest.raises(ValueError):
        TimeGrid.from_dt(10.0, 0.3)


def test_control_pulse_validation():
    with pytest.raises(ValueError):
        ControlPulse([0.0, 0.0], [0.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        ControlPulse([0.0], [0.0], [-0.1])
    p = ControlPulse.zeros(4, gamma=0.2)
    assert len(p) == 4 and np.all(p.gamma == 0.2)
    assert p.replace(ux=np.ones(4)).ux.sum() == 4


def test_step_propagator_unitary_without_decay(transmon):
    v = step_propagator(effective_hamiltonian(transmon, 0.3, -0.1, 0.0), 0.1)
    assert np.allclose(v @ v.conj().T, np.eye(5), atol=1e-12)


def test_step_propagator_contracts_with_decay(transmon):
    v = step_propagator(effective_hamiltonian(transmon, 0.3, -0.1, 0.05), 0.1)
    assert np.linalg.norm(v, 2) <= 1 + 1e-12


def test_diagonal_fast_path_matches_expm():
    h = np.diag([0.0, -0.5j, 1.0 - 1j])
    assert np.allclose(step_propagator(h, 0.3), scipy.linalg.expm(-0.3j * h))


def test_step_propagator_rejects_bad_input():
    with pytest.raises(ValueError):
        step_propagator(np.ones((2, 3)), 0.1)
    with pytest.raises(ValueError):
        step_propagator(np.eye(2), 0.0)


@settings(max_examples=20)
@given(st.integers(0, 2 ** 32 - 1))
def test_expm_derivative_matches_finite_difference(seed):
    r = np.random.default_rng(seed)
    a = 0.3 * (r.normal(size=(4, 4)) + 1j * r.normal(size=(4, 4)))
    e = r.normal(size=(4, 4)) + 1j * r.normal(size=(4, 4))
    h = 1e-6
    fd = (scipy.linalg.expm(a + h * e) - scipy.linalg.expm(a - h * e)) / (2 * h)
    assert np.allclose(expm_derivative(a, e), fd, atol=1e-8)


def test_chain_forward_products(transmon, rng, short_grid):
    p = random_pulse(rng, short_grid.n_steps)
    chain = build_chain(transmon, p, short_grid)
    g = np.eye(5)
    for k in range(short_grid.n_steps):
        g = chain.steps[k] @ g
    assert np.allclose(chain.forward[-1], g)
    assert np.allclose(transition(chain, 0, short_grid.n_steps), g)


def test_transition_composition(transmon, rng, short_grid):
    chain = build_chain(transmon, random_pulse(rng, short_grid.n_steps), short_grid)
    g = transition(chain, 3, 17) @ transition(chain, 0, 3)
    assert np.allclose(g, transition(chain, 0, 17))
    assert np.allclose(transition(chain, 5, 5), np.eye(5))
    with pytest.raises(IndexError):
        transition(chain, 6, 5)


def test_backward_rows_equal_bra_times_transition(transmon, rng, short_grid):
    chain = build_chain(transmon, random_pulse(rng, short_grid.n_steps), short_grid)
    bra = transmon.basis(0)
    rows = chain.backward_rows(bra)
    for k in (0, 7, short_grid.n_steps):
        assert np.allclose(rows[k], bra.conj() @ transition(chain, k, short_grid.n_steps))


def test_build_chain_length_mismatch(transmon, short_grid):
    with pytest.raises(ValueError):
        build_chain(transmon, ControlPulse.zeros(3), short_grid)


def test_free_decay_of_first_level():
    m = EmitterModel(3, -1.0)
    grid = TimeGrid.from_dt(100.0, 0.1)
    gamma = 5 * MHZ
    chain = build_chain(m, ControlPulse.zeros(grid.n_steps, gamma), grid)
    phi = chain.forward_states(m.basis(1))
    assert np.allclose(np.abs(phi[:, 1]) ** 2, np.exp(-gamma * grid.times), rtol=1e-12)


def test_tail_check_warns_and_escalates():
    m = EmitterModel(2)
    grid = TimeGrid.from_dt(10.0, 1.0)
    chain = build_chain(m, ControlPulse.zeros(10, 0.01), grid)
    with pytest.warns(TailWarning):
        check_tail(chain, m.basis(1))
    with pytest.raises(TailWarning):
        check_tail(chain, m.basis(1), strict=True)
    long = TimeGrid.from_dt(2000.0, 1.0)
    chain = build_chain(m, ControlPulse.zeros(2000, 0.01), long)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert check_tail(chain, m.basis(1)) < 1e-4


def test_density_evolution_trace_and_positivity(transmon, rng):
    grid = TimeGrid.from_dt(10.0, 0.05)
    p = random_pulse(rng, grid.n_steps, u_max=0.4).replace(gamma=np.full(grid.n_steps, 0.5 * MHZ))
    rho0 = np.outer(transmon.basis(0), transmon.basis(0))
    traj = evolve_density(transmon, p, rho0, grid)
    assert traj.shape == (201, 5, 5)
    assert np.allclose(np.einsum('kii->k', traj), 1, atol=1e-10)
    assert min(np.linalg.eigvalsh(r).min() for r in traj) > -1e-10


def test_density_without_decay_matches_pure_state(transmon, rng, short_grid):
    p = random_pulse(rng, short_grid.n_steps).replace(gamma=np.zeros(short_grid.n_steps))
    psi = transmon.basis(0)
    traj = evolve_density(transmon, p, np.outer(psi, psi), short_grid)
    phi = build_chain(transmon, p, short_grid).forward_states(psi)[-1]
    assert np.allclose(traj[-1], np.outer(phi, phi.conj()), atol=1e-10)


def test_density_needs_constant_coupling(transmon, short_grid, rng):
    p = random_pulse(rng, short_grid.n_steps)
    with pytest.raises(ValueError):
        evolve_density(transmon, p, np.eye(5) / 5, short_grid)


def test_density_non_finite_raises(transmon, short_grid):
    p = ControlPulse.zeros(short_grid.n_steps, 0.01)
    rho0 = np.full((5, 5), np.nan)
    with pytest.raises(IntegrationError):
        evolve_density(transmon, p, rho0, short_grid)
