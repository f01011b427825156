"""Built-in oracle suite run by ``nm-regress validate``."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import oracles
from .bath import BathSpec, TableGrid, build_tables, polaron_shift
from .generators import SolverMode, SystemModel
from .observables import g1, g1_from_anchor, spectrum
from .propagation import SimConfig, integrate_physical, steady_state

__all__ = ["Check", "run_suite", "mollow_checks", "ibm_check"]


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name}: {self.value:.3e} "
                f"(tolerance {self.tolerance:.1e}) {self.detail}").rstrip()


RABI, GAMMA = 0.12, 0.01


def _phonon_free(rabi=RABI, detuning=0.0, gamma=GAMMA):
    model = SystemModel.quantum_dot(rabi, detuning, gamma)
    tables = build_tables(BathSpec(0.0, 2.2, 4.0), model.bohr_frequencies)
    return model, tables


def bloch_checks(config: SimConfig | None = None) -> list[Check]:
    config = config or SimConfig()
    model, tables = _phonon_free()
    rho = steady_state(model, tables, SolverMode.FULL, config)
    pop = rho[1, 1].real
    exact = oracles.bloch_excited_population(RABI, 0.0, GAMMA)
    out = [Check("bloch_steady_population", abs(pop - exact) < 1e-6,
                 abs(pop - exact), 1e-6, f"rho_ee={pop:.8f}")]
    model, tables = _phonon_free(detuning=0.03)
    grid = np.linspace(0.0, 200.0, 401)
    rho0 = np.diag([1.0, 0.0]).astype(complex)
    traj = integrate_physical(rho0, 200.0, model, tables, SolverMode.FULL,
                              config, grid)
    ref = oracles.bloch_trajectory(rho0, grid, RABI, 0.03, GAMMA)
    err = float(np.max(np.abs(traj.states - ref)))
    out.append(Check("bloch_dynamics", err < 1e-8, err, 1e-8))
    return out


def mollow_checks(config: SimConfig | None = None) -> list[Check]:
    """Peak positions, linewidths and sum rule of the phonon-free triplet."""
    config = config or SimConfig()
    model, tables = _phonon_free()
    trace = g1(model, tables, SolverMode.FULL, config)
    coarse = spectrum(trace, 8.0, 3201)
    cell = coarse.domega_grid[1] - coarse.domega_grid[0]
    x, y = coarse.domega_grid, coarse.values
    out = []
    worst = 0.0
    for centre in (-RABI, 0.0, RABI):
        sel = np.abs(x - centre) <= 0.05
        peak = x[sel][np.argmax(y[sel])]
        worst = max(worst, abs(peak - centre))
    out.append(Check("mollow_peak_positions", worst <= cell, worst, cell))

    fine = spectrum(trace, 0.4, 8001)
    ref = oracles.bloch_spectrum(fine.domega_grid, RABI, 0.0, GAMMA)
    worst = 0.0
    for centre in (-RABI, 0.0, RABI):
        w_num = oracles.lorentzian_fwhm(fine.domega_grid, fine.values, centre, 0.05)
        w_ref = oracles.lorentzian_fwhm(fine.domega_grid, ref, centre, 0.05)
        worst = max(worst, abs(w_num - w_ref) / w_ref)
    out.append(Check("mollow_linewidths", worst < 0.10, worst, 0.10))

    total = float(np.trapezoid(coarse.values, coarse.domega_grid))
    expected = math.pi * (trace.values[0] - trace.g1_infinity).real
    rel = abs(total - expected) / abs(expected)
    out.append(Check("spectrum_sum_rule", rel < 0.02, rel, 0.02))
    return out


def ibm_check(spec: BathSpec | None = None, tau_end: float = 10.0) -> Check:
    """Pure dephasing: ``|g1|`` against ``exp(-Re Phi)``."""
    spec = spec or BathSpec(0.03, 2.2, 4.0)
    model = SystemModel.quantum_dot(0.0, polaron_shift(spec), 0.0)
    tables = build_tables(spec, model.bohr_frequencies, TableGrid())
    config = SimConfig(tau_end=tau_end)
    taus, vals = g1_from_anchor(np.diag([0.0, 1.0]), 0.0, model, tables,
                                SolverMode.FULL, config)
    pick = slice(None, None, 10)
    ref = np.exp(-np.array([oracles.ibm_phase(t, spec).real for t in taus[pick]]))
    rel = float(np.max(np.abs(np.abs(vals[pick]) - ref) / ref))
    return Check("independent_boson", rel < 1e-4, rel, 1e-4)


def run_suite(config: SimConfig | None = None) -> list[Check]:
    return [*bloch_checks(config), *mollow_checks(config), ibm_check()]
