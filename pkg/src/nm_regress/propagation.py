"""Time integration of the physical state and of the effective operator."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .bath import CorrelationTables
from .generators import (
    SolverMode,
    SystemModel,
    markovian_superoperator,
    rhs_effective,
    rhs_physical,
)
from .operators import as_operator, hermiticity_defect, projector

__all__ = [
    "IntegrationError",
    "InvariantError",
    "ConvergenceError",
    "SimConfig",
    "Trajectory",
    "tau_grid",
    "witness_grid",
    "integrate_grid",
    "integrate_physical",
    "integrate_effective",
    "steady_state",
    "steady_state_algebraic",
    "markovian_propagate",
]


class IntegrationError(RuntimeError):
    """The adaptive integrator could not make progress."""


class InvariantError(IntegrationError):
    """A conserved quantity drifted beyond ten times its tolerance."""


class ConvergenceError(IntegrationError):
    """Long-time integration did not reach a steady state."""


@dataclass(frozen=True)
class SimConfig:
    """Integrator, grid and steady-state settings (times in ps)."""

    atol: float = 1e-12
    rtol: float = 1e-12
    initial_step: float = 0.005
    max_step: float = 10.0
    min_step: float = 1e-9
    dense_end: float = 25.0
    dense_step: float = 0.01
    tau_end: float = 3000.0
    sparse_step: float = 0.25
    steady_window: float = 50.0
    steady_tol: float = 1e-12
    steady_t_max: float = 20000.0
    invariant_tol: float = 1e-9
    witness_dense_end: float = 5.0
    witness_dense_step: float = 0.005
    witness_sparse_step: float = 0.05

    def __post_init__(self):
        for name in ("atol", "initial_step", "max_step", "min_step",
                     "dense_step", "sparse_step", "steady_window",
                     "steady_tol", "steady_t_max", "invariant_tol",
                     "witness_dense_step", "witness_sparse_step"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.rtol < 0:
            raise ValueError("rtol must be >= 0")
        if not (self.dense_end > 0 and self.tau_end > 0):
            raise ValueError("dense_end and tau_end must be > 0")

    def replace(self, **changes) -> "SimConfig":
        return SimConfig(**{**asdict(self), **changes})


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: np.ndarray
    states: np.ndarray          # (n, d, d)
    mode: SolverMode
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.grid.size

    def traces(self) -> np.ndarray:
        return np.einsum("kii->k", self.states)

    def expect(self, op) -> np.ndarray:
        """``Tr[op x(t)]`` along the trajectory."""
        return np.einsum("ij,kji->k", np.asarray(op), self.states)


def _two_segment(dense_end: float, dense_step: float, end: float,
                 sparse_step: float) -> np.ndarray:
    n1 = int(round(dense_end / dense_step))
    dense = np.linspace(0.0, n1 * dense_step, n1 + 1)
    if end <= dense[-1] + 1e-12:
        n = int(round(end / dense_step))
        return dense[: n + 1]
    n2 = int(math.ceil((end - dense[-1]) / sparse_step - 1e-9))
    sparse = dense[-1] + sparse_step * np.arange(1, n2 + 1)
    return np.concatenate([dense, sparse])


def tau_grid(config: SimConfig) -> np.ndarray:
    """Two-scale delay grid: fine over the bath memory, coarse afterwards."""
    return _two_segment(config.dense_end, config.dense_step, config.tau_end,
                        config.sparse_step)


def witness_grid(t_end: float, config: SimConfig) -> np.ndarray:
    return _two_segment(min(config.witness_dense_end, t_end),
                        config.witness_dense_step, t_end,
                        config.witness_sparse_step)


Rhs = Callable[[float, np.ndarray], np.ndarray]


def _rk4(f: Rhs, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _advance(f: Rhs, t0: float, y0: np.ndarray, t1: float, h: float,
             config: SimConfig) -> tuple[np.ndarray, float]:
    """Adaptive RK4 with step doubling from ``t0`` to exactly ``t1``.

    Accepted steps are Richardson-extrapolated (local order five).  Returns
    the state at ``t1`` and the suggested next step.
    """
    t, y = t0, y0
    h = min(h, config.max_step)
    while t < t1:
        last = t + h >= t1 - 1e-12 * max(1.0, abs(t1))
        step = t1 - t if last else h
        full = _rk4(f, t, y, step)
        half = _rk4(f, t, y, 0.5 * step)
        two = _rk4(f, t + 0.5 * step, half, 0.5 * step)
        diff = two - full
        err = float(np.max(np.abs(diff))) / 15.0
        tol = config.atol + config.rtol * float(np.max(np.abs(two)))
        if err <= tol:
            t = t1 if last else t + step
            y = two + diff / 15.0
            if not last or step >= h:
                grow = 4.0 if err == 0 else min(4.0, 0.9 * (tol / err) ** 0.2)
                h = min(config.max_step, step * max(1.0, grow))
        else:
            h = step * max(0.2, 0.9 * (tol / err) ** 0.2)
            if h < config.min_step:
                raise IntegrationError(
                    f"step size underflow at t={t:.6g} ps (h={h:.3e})")
    return y, h


def integrate_grid(f: Rhs, y0: np.ndarray, grid: np.ndarray,
                   config: SimConfig) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    out = np.empty((grid.size,) + y0.shape, dtype=complex)
    out[0] = y0
    y, h = y0, config.initial_step
    for k in range(1, grid.size):
        y, h = _advance(f, grid[k - 1], y, grid[k], h, config)
        out[k] = y
    return out


def _check_physical(states: np.ndarray, grid: np.ndarray, tol: float) -> dict:
    traces = np.einsum("kii->k", states)
    trace_err = float(np.max(np.abs(traces - 1.0)))
    herm = float(max(hermiticity_defect(s) for s in states))
    if trace_err > 10 * tol or herm > 10 * tol:
        k = int(np.argmax(np.abs(traces - 1.0)))
        raise InvariantError(
            f"physical invariants breached: |Tr rho - 1| = {trace_err:.3e}, "
            f"Hermiticity defect {herm:.3e} (worst near t={grid[k]:.4g} ps)")
    min_eig = float(min(np.linalg.eigvalsh(0.5 * (s + s.conj().T))[0]
                        for s in states))
    return {"trace_error": trace_err, "hermiticity_defect": herm,
            "min_eigenvalue": min_eig}


def integrate_physical(rho0, t_end: float, model: SystemModel,
                       tables: CorrelationTables, mode=SolverMode.FULL,
                       config: SimConfig | None = None,
                       grid: np.ndarray | None = None) -> Trajectory:
    """Propagate ``rho(t)`` under the homogeneous second-order equation.

    Raises
    ------
    ValueError
        If ``rho0`` is not a Hermitian unit-trace positive operator.
    InvariantError
        If trace or Hermiticity drift beyond ``10 * config.invariant_tol``.
    """
    config = config or SimConfig()
    mode = SolverMode.parse(mode)
    rho0 = as_operator(rho0, model.dim)
    if hermiticity_defect(rho0) > 1e-12 or abs(np.trace(rho0) - 1) > 1e-12:
        raise ValueError("rho0 must be Hermitian with unit trace")
    if np.linalg.eigvalsh(0.5 * (rho0 + rho0.conj().T))[0] < -1e-12:
        raise ValueError("rho0 must be positive semidefinite")
    if grid is None:
        grid = witness_grid(t_end, config)
    f = lambda t, y: rhs_physical(y, t, model, tables, mode)  # noqa: E731
    states = integrate_grid(f, rho0, grid, config)
    meta = _check_physical(states, grid, config.invariant_tol)
    return Trajectory(np.asarray(grid, dtype=float), states, mode, meta)


def integrate_effective(rho_anchor, tau_end: float, t: float,
                        model: SystemModel, tables: CorrelationTables,
                        mode=SolverMode.FULL,
                        config: SimConfig | None = None,
                        grid: np.ndarray | None = None) -> Trajectory:
    """Propagate ``Lambda(t, tau)`` in ``tau`` from ``Lambda(t, 0) = B rho(t)``.

    ``t`` is the anchor time, ``math.inf`` for the steady-state correlator.
    """
    config = config or SimConfig()
    mode = SolverMode.parse(mode)
    rho_anchor = as_operator(rho_anchor, model.dim)
    if grid is None:
        grid = tau_grid(config.replace(tau_end=tau_end))
    lam0 = model.emission_op @ rho_anchor
    f = lambda tau, y: rhs_effective(y, rho_anchor, tau, t, model, tables, mode)  # noqa: E731
    states = integrate_grid(f, lam0, grid, config)
    traces = np.einsum("kii->k", states)
    drift = float(np.max(np.abs(traces - np.trace(lam0))))
    if drift > 10 * config.invariant_tol:
        raise InvariantError(f"Tr Lambda drifted by {drift:.3e}")
    return Trajectory(np.asarray(grid, dtype=float), states, mode,
                      {"trace_drift": drift, "anchor_time": t})


def steady_state(model: SystemModel, tables: CorrelationTables,
                 mode=SolverMode.FULL, config: SimConfig | None = None,
                 rho0=None) -> np.ndarray:
    """Long-time limit of the physical equation.

    Integrates in windows of ``config.steady_window`` until the state moves
    by less than ``config.steady_tol`` (max-norm) across a window.

    Raises
    ------
    ConvergenceError
        If the criterion is not met by ``config.steady_t_max``.
    """
    config = config or SimConfig()
    mode = SolverMode.parse(mode)
    rho = projector(0, model.dim) if rho0 is None else as_operator(rho0, model.dim)
    f = lambda t, y: rhs_physical(y, t, model, tables, mode)  # noqa: E731
    t, h = 0.0, config.initial_step
    while t < config.steady_t_max:
        nxt, h = _advance(f, t, rho, t + config.steady_window, h, config)
        change = float(np.max(np.abs(nxt - rho)))
        rho, t = nxt, t + config.steady_window
        if change < config.steady_tol and t > tables.s_max:
            return 0.5 * (rho + rho.conj().T)
    raise ConvergenceError(
        f"no steady state by t={config.steady_t_max} ps (last window change "
        f"{change:.3e} > {config.steady_tol:.0e})")


def steady_state_algebraic(model: SystemModel,
                           tables: CorrelationTables) -> np.ndarray:
    """Null vector of the saturated generator, normalised to unit trace."""
    lmat = markovian_superoperator(model, tables)
    w, v = np.linalg.eig(lmat)
    k = int(np.argmin(np.abs(w)))
    rho = v[:, k].reshape(model.dim, model.dim)
    rho = rho / np.trace(rho)
    return 0.5 * (rho + rho.conj().T)


def markovian_propagate(x0, grid, model: SystemModel,
                        tables: CorrelationTables) -> np.ndarray:
    """Apply ``exp(L tau)`` of the saturated generator to ``x0`` on ``grid``."""
    lmat = markovian_superoperator(model, tables)
    x0 = as_operator(x0, model.dim).ravel()
    d = model.dim
    return np.array([(expm(lmat * tau) @ x0).reshape(d, d) for tau in grid])
