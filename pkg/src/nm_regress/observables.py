"""First-order correlation function, emission spectrum and sideband metrics."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bath import CorrelationTables
from .generators import SolverMode, SystemModel
from .propagation import SimConfig, integrate_effective, steady_state, tau_grid

__all__ = [
    "PlateauError",
    "GridResolutionError",
    "SpectralNegativityWarning",
    "G1Trace",
    "Spectrum",
    "g1",
    "g1_from_anchor",
    "spectrum",
    "sideband_fraction",
    "sideband_asymmetry",
    "band_power",
]

log = logging.getLogger(__name__)

PLATEAU_WINDOW = 50.0
PLATEAU_TOL = 1e-6


class PlateauError(RuntimeError):
    """g1 has not settled by the end of the delay grid; extend ``tau_end``."""


class GridResolutionError(ValueError):
    """The delay or frequency grid cannot support the requested transform."""


class SpectralNegativityWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class G1Trace:
    tau_grid: np.ndarray
    values: np.ndarray
    g1_infinity: complex
    mode: SolverMode
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class Spectrum:
    domega_grid: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)


def g1_from_anchor(rho_anchor, t: float, model: SystemModel,
                   tables: CorrelationTables, mode=SolverMode.FULL,
                   config: SimConfig | None = None,
                   grid: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``Tr[B^dagger Lambda(t, tau)]`` on the delay grid for a given anchor."""
    config = config or SimConfig()
    traj = integrate_effective(rho_anchor, config.tau_end, t, model, tables,
                               mode, config, grid)
    return traj.grid, traj.expect(model.emission_op.conj().T)


def g1(model: SystemModel, tables: CorrelationTables, mode=SolverMode.FULL,
       config: SimConfig | None = None, rho_ss=None) -> G1Trace:
    """Steady-state first-order correlation ``<B^dag(t + tau) B(t)>``.

    Raises
    ------
    PlateauError
        If ``|g1(tau_end) - g1(inf)| >= 1e-6 |g1(0)|``.
    """
    config = config or SimConfig()
    mode = SolverMode.parse(mode)
    if rho_ss is None:
        rho_ss = steady_state(model, tables, mode, config)
    grid = tau_grid(config)
    taus, values = g1_from_anchor(rho_ss, math.inf, model, tables, mode,
                                  config, grid)
    tail = taus >= taus[-1] - PLATEAU_WINDOW
    g_inf = complex(np.mean(values[tail]))
    coherent = complex(np.trace(model.emission_op @ rho_ss))
    g_coh = abs(coherent) ** 2
    residual = abs(values[-1] - g_inf)
    meta = {
        "mode": mode.value,
        "dense_end": config.dense_end,
        "dense_step": config.dense_step,
        "g1_zero": complex(values[0]),
        "plateau_residual": residual,
        "coherent_plateau": g_coh,
        "plateau_vs_coherent": abs(g_inf - g_coh),
    }
    log.info("g1 plateau %.6e vs |<B>|^2 %.6e (mode %s)", g_inf.real, g_coh,
             mode.value)
    if residual >= PLATEAU_TOL * abs(values[0]):
        raise PlateauError(
            f"g1 not settled at tau={taus[-1]} ps: residual {residual:.2e} "
            f">= {PLATEAU_TOL:.0e} * |g1(0)|; increase tau_end")
    return G1Trace(taus, values, g_inf, mode, meta)


def spectrum(trace: G1Trace, omega_max: float = 8.0,
             n_points: int = 3201) -> Spectrum:
    """``Re int_0^inf dtau (g1 - g1(inf)) exp(-i dw tau)`` by the trapezoid rule.

    Evaluated on ``n_points`` uniformly spaced detunings in
    ``[-omega_max, omega_max]``.  Negative values are kept.
    """
    if omega_max <= 0 or n_points < 3:
        raise GridResolutionError("need omega_max > 0 and n_points >= 3")
    taus = np.asarray(trace.tau_grid, dtype=float)
    steps = np.diff(taus)
    dense_end = trace.metadata.get("dense_end", taus[-1])
    dense_steps = steps[taus[1:] <= dense_end + 1e-12]
    if dense_steps.size == 0:
        dense_steps = steps
    limit = math.pi / (4.0 * omega_max)
    if np.max(dense_steps) > limit * (1 + 1e-9):
        raise GridResolutionError(
            f"dense delay step {np.max(dense_steps):.4g} ps exceeds "
            f"pi/(4 omega_max) = {limit:.4g} ps")
    weights = np.zeros_like(taus)
    weights[:-1] += 0.5 * steps
    weights[1:] += 0.5 * steps
    f = (np.asarray(trace.values) - trace.g1_infinity) * weights
    dw = np.linspace(-omega_max, omega_max, n_points)
    values = np.empty(n_points)
    for start in range(0, n_points, 128):
        sl = slice(start, start + 128)
        values[sl] = (np.exp(-1j * np.outer(dw[sl], taus)) @ f).real
    smax, smin = float(np.max(values)), float(np.min(values))
    if smin < -0.01 * smax:
        warnings.warn(
            f"spectrum takes negative values (min {smin:.3e}, max {smax:.3e})",
            SpectralNegativityWarning, stacklevel=2)
    meta = {"mode": trace.mode.value, "omega_max": omega_max,
            "min_value": smin, "max_value": smax}
    return Spectrum(dw, values, meta)


def band_power(spec: Spectrum, lo: float, hi: float) -> float:
    """Trapezoid integral of the spectrum over ``[lo, hi]``.

    End points falling between grid nodes are handled by linear interpolation.
    """
    x, y = spec.domega_grid, spec.values
    lo, hi = max(lo, x[0]), min(hi, x[-1])
    if hi <= lo:
        return 0.0
    inside = (x > lo) & (x < hi)
    xs = np.concatenate([[lo], x[inside], [hi]])
    ys = np.concatenate([[np.interp(lo, x, y)], y[inside], [np.interp(hi, x, y)]])
    return float(np.trapezoid(ys, xs))


def _check_window(spec: Spectrum, window: float):
    if not window > 0:
        raise GridResolutionError("window half-width must be > 0")
    if window >= min(-spec.domega_grid[0], spec.domega_grid[-1]):
        raise GridResolutionError(
            f"window half-width {window} exceeds the spectrum grid")


def sideband_fraction(spec: Spectrum, window_halfwidth: float = 0.5) -> float:
    """Fraction of emitted power outside ``|dw| <= window_halfwidth``."""
    _check_window(spec, window_halfwidth)
    total = band_power(spec, -math.inf, math.inf)
    centre = band_power(spec, -window_halfwidth, window_halfwidth)
    return 1.0 - centre / total


def sideband_asymmetry(spec: Spectrum, window_halfwidth: float = 0.5) -> float:
    """``(P_red - P_blue) / (P_red + P_blue)`` outside the central window.

    Positive values mean more power at lower emission frequencies.
    """
    _check_window(spec, window_halfwidth)
    red = band_power(spec, -math.inf, -window_halfwidth)
    blue = band_power(spec, window_halfwidth, math.inf)
    return (red - blue) / (red + blue)
