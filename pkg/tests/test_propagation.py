import math

import numpy as np
import pytest

from nm_regress import oracles
from nm_regress.bath import BathSpec, build_tables
from nm_regress.generators import SolverMode, SystemModel, rhs_effective
from nm_regress.operators import projector
from nm_regress.propagation import (
    ConvergenceError,
    IntegrationError,
    SimConfig,
    integrate_effective,
    integrate_grid,
    integrate_physical,
    markovian_propagate,
    steady_state,
    steady_state_algebraic,
    tau_grid,
    witness_grid,
)

from conftest import random_density

FREE = BathSpec(0.0, 2.2, 4.0)


def _free(rabi, detuning, gamma):
    model = SystemModel.quantum_dot(rabi, detuning, gamma)
    return model, build_tables(FREE, model.bohr_frequencies)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(atol=0.0)
    with pytest.raises(ValueError):
        SimConfig(rtol=-1.0)
    assert SimConfig().replace(tau_end=10.0).tau_end == 10.0


def test_tau_grid_layout():
    grid = tau_grid(SimConfig())
    assert grid[0] == 0.0 and grid[-1] == pytest.approx(3000.0)
    assert np.all(np.diff(grid) > 0)
    dense = np.diff(grid[grid <= 25.0 + 1e-9])
    assert np.allclose(dense, 0.01)
    assert np.allclose(np.diff(grid[grid >= 25.0 - 1e-9]), 0.25)


def test_witness_grid_layout():
    grid = witness_grid(20.0, SimConfig())
    assert np.allclose(np.diff(grid[grid <= 5.0 + 1e-9]), 0.005)
    assert grid[-1] == pytest.approx(20.0)


def test_rejects_bad_grid_and_state(free_model, free_tables):
    with pytest.raises(ValueError):
        integrate_grid(lambda t, y: y, np.eye(2), np.array([0.0, 1.0, 1.0]), SimConfig())
    with pytest.raises(ValueError):
        integrate_physical(2 * projector(0), 5.0, free_model, free_tables)
    with pytest.raises(ValueError):
        integrate_physical(np.diag([1.5, -0.5]), 5.0, free_model, free_tables)


def test_step_underflow_is_reported():
    config = SimConfig(atol=1e-30, rtol=0.0, min_step=1e-3)
    with pytest.raises(IntegrationError):
        integrate_grid(lambda t, y: 1j * 50.0 * y, np.eye(2, dtype=complex),
                       np.array([0.0, 1.0]), config)


def test_rabi_oscillation():
    rabi = 0.12
    model, tables = _free(rabi, 0.0, 0.0)
    grid = np.linspace(0.0, 2 * math.pi / rabi, 201)
    traj = integrate_physical(projector(0), grid[-1], model, tables,
                              SolverMode.FULL, grid=grid)
    pop = traj.states[:, 1, 1].real
    assert np.max(np.abs(pop - 0.5 * (1 - np.cos(rabi * grid)))) < 1e-10
    assert 2 * math.pi / rabi == pytest.approx(52.36, abs=5e-3)


def test_bloch_dynamics():
    model, tables = _free(0.12, 0.03, 0.01)
    grid = np.linspace(0.0, 200.0, 401)
    rho0 = random_density(np.random.default_rng(5))
    traj = integrate_physical(rho0, 200.0, model, tables, grid=grid)
    ref = oracles.bloch_trajectory(rho0, grid, 0.12, 0.03, 0.01)
    assert np.max(np.abs(traj.states - ref)) < 1e-8


@pytest.fixture(scope="module")
def undriven(paper_spec):
    model = SystemModel.quantum_dot(0.0, 0.1415, 0.01)
    return model, build_tables(paper_spec, model.bohr_frequencies)


@pytest.mark.parametrize("mode", list(SolverMode))
def test_dark_state_constant(undriven, mode):
    model, tables = undriven
    traj = integrate_physical(projector(0), 50.0, model, tables, mode)
    assert np.max(np.abs(traj.states - projector(0))) < 1e-15


def test_physical_invariants_and_positivity(paper_model, paper_tables):
    traj = integrate_physical(projector(0), 100.0, paper_model, paper_tables)
    assert traj.metadata["trace_error"] < 1e-10
    assert traj.metadata["hermiticity_defect"] < 1e-10
    assert traj.metadata["min_eigenvalue"] > -1e-6


def test_steady_state_phonon_free():
    model, tables = _free(0.12, 0.0, 0.01)
    rho = steady_state(model, tables)
    assert rho[1, 1].real == pytest.approx(oracles.bloch_excited_population(0.12, 0.0, 0.01), abs=1e-9)
    assert rho[1, 1].real == pytest.approx(0.498270, abs=1e-6)
    assert np.max(np.abs(rho - oracles.bloch_steady_state(0.12, 0.0, 0.01))) < 1e-9
    assert np.max(np.abs(rho - steady_state_algebraic(model, tables))) < 1e-9


def test_steady_state_undriven(undriven):
    model, tables = undriven
    assert np.allclose(steady_state(model, tables), projector(0), atol=1e-12)


def test_steady_state_unique(paper_model, paper_tables):
    rng = np.random.default_rng(9)
    a = steady_state(paper_model, paper_tables, "full", rho0=random_density(rng))
    b = steady_state(paper_model, paper_tables, "full", rho0=random_density(rng))
    assert np.max(np.abs(a - b)) < 1e-9
    # after the bath memory the full generator is the saturated one
    assert np.max(np.abs(a - steady_state_algebraic(paper_model, paper_tables))) < 1e-9


def test_steady_state_budget(paper_model, paper_tables):
    with pytest.raises(ConvergenceError):
        steady_state(paper_model, paper_tables, config=SimConfig(steady_t_max=100.0))


@pytest.mark.parametrize("mode", ["markovian", "naive"])
def test_effective_trace_conserved(paper_model, paper_tables, mode):
    rho = steady_state_algebraic(paper_model, paper_tables)
    traj = integrate_effective(rho, 1500.0, math.inf, paper_model, paper_tables, mode)
    tr0 = np.trace(paper_model.emission_op @ rho)
    assert np.max(np.abs(traj.traces() - tr0)) < 1e-9
    assert np.array_equal(traj.states[0], paper_model.emission_op @ rho)


def test_markovian_dual_path_short(paper_model, paper_tables):
    rho = steady_state_algebraic(paper_model, paper_tables)
    grid = np.linspace(0.0, 60.0, 121)
    traj = integrate_effective(rho, 60.0, math.inf, paper_model, paper_tables,
                               "markovian", grid=grid)
    ref = markovian_propagate(paper_model.emission_op @ rho, grid, paper_model, paper_tables)
    assert np.max(np.abs(traj.states - ref)) < 1e-10


def test_full_zero_anchor_equals_naive(paper_model, paper_tables):
    rho = random_density(np.random.default_rng(2))
    grid = np.linspace(0.0, 10.0, 101)
    full = integrate_effective(rho, 10.0, 0.0, paper_model, paper_tables, "full", grid=grid)
    naive = integrate_effective(rho, 10.0, 0.0, paper_model, paper_tables, "naive", grid=grid)
    assert np.array_equal(full.states, naive.states)


def test_convergence_order(paper_model, paper_tables):
    # fixed steps: a huge tolerance accepts every step at h = max_step
    rho = steady_state_algebraic(paper_model, paper_tables)
    lam0 = paper_model.emission_op @ rho
    grid = np.linspace(0.0, 5.0, 11)

    def f(tau, y):
        return rhs_effective(y, rho, tau, math.inf, paper_model, paper_tables, "full")

    def run(h):
        return integrate_grid(f, lam0, grid, SimConfig(atol=1e6, rtol=0.0,
                                                       initial_step=h, max_step=h))

    ref = run(0.2 / 64)
    errs = [np.max(np.abs(run(h) - ref)) for h in (0.2, 0.1, 0.05)]
    # extrapolated step doubling is locally fifth order
    assert errs[0] / errs[1] > 16 and errs[1] / errs[2] > 16
