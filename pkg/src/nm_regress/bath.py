"""Super-Ohmic phonon bath: spectral density, correlation function, rates.

Conventions (hbar = 1, times in ps, frequencies in ps^-1)::

    J(w)  = eta w^3 exp(-(w / w_c)^2)
    C(s)  = int_0^inf dw J(w) [coth(w / 2 k_B T) cos(w s) - i sin(w s)]
    G(w; a, b) = int_a^b ds C(s) exp(i w s)

``C(s)`` is the bath autocorrelation ``<X(s) X(0)>`` of the displacement
operator, so ``C(-s) = C(s)^*``.  With this ordering the Markovian rates obey
``Re G(w; 0, inf) = (pi/2) J(w) [coth(w / 2 k_B T) + 1] >= 0``.

The half-line transforms are evaluated in frequency space, where the time
integral is elementary, so the tabulated values carry no time-step error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate

__all__ = [
    "KB_OVER_HBAR",
    "BathSpec",
    "QuadratureError",
    "TableAccuracyError",
    "MissingFrequencyError",
    "TableGrid",
    "CorrelationTables",
    "spectral_density",
    "thermal_weighted_density",
    "polaron_shift",
    "polaron_shift_closed_form",
    "correlation",
    "correlation_fixed_rule",
    "frequency_rule",
    "build_tables",
]

#: k_B / hbar in ps^-1 K^-1.
KB_OVER_HBAR = 0.1309


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested accuracy."""


class TableAccuracyError(RuntimeError):
    """The correlation tables cannot deliver the requested tail accuracy."""


class MissingFrequencyError(KeyError):
    """A rate was requested for a frequency that was not tabulated."""


@dataclass(frozen=True)
class BathSpec:
    """Parameters of the Gaussian-cutoff super-Ohmic bath.

    Parameters
    ----------
    eta : float
        Coupling strength (ps^2).
    omega_c : float
        Cutoff frequency (ps^-1).
    temperature : float
        Temperature (K).  ``0`` selects the vacuum branch.
    kB_over_hbar : float
        Boltzmann constant over hbar (ps^-1 K^-1).  Only unit tests should
        change it.
    omega_max_factor : float
        Frequency integrals are truncated at ``omega_max_factor * omega_c``.
    """

    eta: float
    omega_c: float
    temperature: float
    kB_over_hbar: float = KB_OVER_HBAR
    omega_max_factor: float = 12.0

    def __post_init__(self):
        if not self.eta >= 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if not self.omega_c > 0:
            raise ValueError(f"omega_c must be > 0, got {self.omega_c}")
        if not self.temperature >= 0:
            raise ValueError(
                f"temperature must be >= 0, got {self.temperature}")

    @property
    def thermal_frequency(self) -> float:
        """``k_B T / hbar`` in ps^-1."""
        return self.kB_over_hbar * self.temperature

    @property
    def omega_max(self) -> float:
        return self.omega_max_factor * self.omega_c


def spectral_density(omega, spec: BathSpec):
    """``eta w^3 exp(-(w/w_c)^2)``; rejects negative frequencies."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ValueError("spectral density is defined for omega >= 0")
    out = spec.eta * w**3 * np.exp(-(w / spec.omega_c) ** 2)
    return out if out.ndim else float(out)


def thermal_weighted_density(omega, spec: BathSpec):
    """Return ``(J coth(w/2kT), J n(w))`` with the finite ``w -> 0`` limits.

    ``n`` is the Bose occupation.  At ``T = 0`` coth is taken as 1 and n as 0.
    """
    w = np.asarray(omega, dtype=float)
    j = spec.eta * w**3 * np.exp(-(w / spec.omega_c) ** 2)
    kt = spec.thermal_frequency
    if kt == 0.0:
        return j, np.zeros_like(j)
    x = w / kt
    safe = np.where(w > 0, x, 1.0)
    # J n = eta w^3 e^{..} / (e^x - 1) -> eta w^2 kT e^{..}
    jn = np.where(w > 0,
                  j / np.expm1(safe),
                  spec.eta * w**2 * kt * np.exp(-(w / spec.omega_c) ** 2))
    return j + 2.0 * jn, jn


def polaron_shift_closed_form(spec: BathSpec) -> float:
    return spec.eta * math.sqrt(math.pi) / 4.0 * spec.omega_c**3


def polaron_shift(spec: BathSpec) -> float:
    """``int_0^inf J(w)/w dw`` by adaptive quadrature.

    The result is checked against the Gaussian moment
    ``eta sqrt(pi)/4 w_c^3``.
    """
    if spec.eta == 0:
        return 0.0
    val, err = integrate.quad(
        lambda w: spec.eta * w**2 * math.exp(-(w / spec.omega_c) ** 2),
        0.0, spec.omega_max, epsabs=0.0, epsrel=1e-13, limit=200)
    exact = polaron_shift_closed_form(spec)
    if abs(val - exact) > 1e-8 * abs(exact):
        raise QuadratureError(
            f"polaron shift quadrature {val} disagrees with {exact}")
    return val


def _coth_density_scalar(w: float, spec: BathSpec) -> float:
    return float(thermal_weighted_density(w, spec)[0])


def correlation(s: float, spec: BathSpec, epsabs: float = 1e-14,
                epsrel: float = 1e-12) -> complex:
    """Bath correlation ``C(s)`` by adaptive (oscillatory) quadrature.

    Raises
    ------
    QuadratureError
        If the estimated error exceeds ``max(epsabs, epsrel |C|) * 100``.
    """
    if s < 0:
        raise ValueError("correlation is evaluated for s >= 0")
    if spec.eta == 0:
        return 0j
    wmax = spec.omega_max
    re_f = lambda w: _coth_density_scalar(w, spec)  # noqa: E731
    im_f = lambda w: spec.eta * w**3 * math.exp(-(w / spec.omega_c) ** 2)  # noqa: E731
    if s == 0:
        re, re_err = integrate.quad(re_f, 0.0, wmax, epsabs=epsabs,
                                    epsrel=epsrel, limit=400)
        im, im_err = 0.0, 0.0
    else:
        re, re_err = integrate.quad(re_f, 0.0, wmax, weight="cos", wvar=s,
                                    epsabs=epsabs, epsrel=epsrel, limit=400)
        im, im_err = integrate.quad(im_f, 0.0, wmax, weight="sin", wvar=s,
                                    epsabs=epsabs, epsrel=epsrel, limit=400)
        im = -im
    val = complex(re, im)
    err = math.hypot(re_err, im_err)
    if err > 100 * max(epsabs, epsrel * abs(val)):
        raise QuadratureError(
            f"C({s}) did not converge: value {val}, error estimate {err:.3e}")
    return val


def frequency_rule(spec: BathSpec, panels: int = 48, order: int = 24):
    """Composite Gauss-Legendre nodes and weights on ``[0, omega_max]``."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, spec.omega_max, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def correlation_fixed_rule(s, spec: BathSpec, rule=None) -> np.ndarray:
    """``C(s)`` on an array of times with a fixed composite frequency rule."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    nodes, weights = rule if rule is not None else frequency_rule(spec)
    jc, _ = thermal_weighted_density(nodes, spec)
    j = spectral_density(nodes, spec)
    out = np.empty(s.shape, dtype=complex)
    for start in range(0, s.size, 512):
        sl = slice(start, start + 512)
        phase = np.outer(s[sl], nodes)
        out[sl] = np.cos(phase) @ (weights * jc) - 1j * (np.sin(phase) @ (weights * j))
    return out


def _half_line_kernel(x: np.ndarray, s: np.ndarray) -> np.ndarray:
    """``int_0^s exp(i x u) du`` evaluated stably, broadcast over x and s."""
    xs = x * s
    return s * np.exp(0.5j * xs) * np.sinc(xs / (2.0 * np.pi))


@dataclass(frozen=True)
class TableGrid:
    """Time grid for the tabulated half-line transforms (ps)."""

    s_step: float = 0.005
    s_max: float = 25.0
    tail_tol: float = 1e-12

    def __post_init__(self):
        if not (self.s_step > 0 and self.s_max > self.s_step):
            raise ValueError("table grid needs 0 < s_step < s_max")
        if not self.tail_tol > 0:
            raise ValueError("tail_tol must be > 0")

    def points(self) -> np.ndarray:
        n = int(round(self.s_max / self.s_step))
        return np.linspace(0.0, n * self.s_step, n + 1)


@dataclass(frozen=True)
class CorrelationTables:
    """Tabulated ``C(s)`` and cumulative rates ``G(w; 0, s)``.

    Off-grid values of the cumulative rate use cubic Hermite interpolation
    with the integrand ``C(s) exp(i w s)`` as the slope.  Beyond ``s_max``
    the cumulative rate equals its ``s -> inf`` limit (the remainder was
    bounded below ``tail_tol`` at construction).
    """

    spec: BathSpec
    s_grid: np.ndarray
    c_values: np.ndarray
    frequencies: np.ndarray
    cumulative: np.ndarray       # (n_freq, n_s)
    integrand: np.ndarray        # (n_freq, n_s)
    total: np.ndarray            # (n_freq,)  G(w; 0, inf)
    tail_bound: float = 0.0
    _index: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def s_max(self) -> float:
        return float(self.s_grid[-1])

    @property
    def s_step(self) -> float:
        return float(self.s_grid[1] - self.s_grid[0])

    @property
    def rate_cumulative(self) -> dict:
        return {float(w): self.cumulative[k] for k, w in enumerate(self.frequencies)}

    @property
    def rate_tail(self) -> dict:
        return {float(w): self.total[k] - self.cumulative[k]
                for k, w in enumerate(self.frequencies)}

    def row(self, omega: float) -> int:
        key = round(omega, 8)
        if key in self._index:
            return self._index[key]
        hits = np.nonzero(np.abs(self.frequencies - omega) <= 1e-9)[0]
        if hits.size == 0:
            raise MissingFrequencyError(
                f"no rate table for frequency {omega!r}; tabulated: "
                f"{self.frequencies.tolist()}")
        self._index[key] = int(hits[0])
        return int(hits[0])

    def rows(self, omegas: Sequence[float]) -> np.ndarray:
        return np.array([self.row(w) for w in omegas], dtype=int)

    def cumulative_at(self, a: float, rows: np.ndarray | None = None) -> np.ndarray:
        """``G(w; 0, a)`` for the selected rows (all rows by default)."""
        if rows is None:
            rows = slice(None)
        if a == math.inf or a >= self.s_max:
            return self.total[rows]
        if a < 0:
            raise ValueError("rate integrals need a >= 0")
        h = self.s_step
        k = min(int(a / h), self.s_grid.size - 2)
        u = (a - self.s_grid[k]) / h
        if u == 0.0:
            return self.cumulative[rows, k]
        g0 = self.cumulative[rows, k]
        g1 = self.cumulative[rows, k + 1]
        f0 = self.integrand[rows, k]
        f1 = self.integrand[rows, k + 1]
        u2, u3 = u * u, u * u * u
        return ((2 * u3 - 3 * u2 + 1) * g0 + (u3 - 2 * u2 + u) * h * f0
                + (-2 * u3 + 3 * u2) * g1 + (u3 - u2) * h * f1)

    def rate(self, omega: float, a: float, b: float) -> complex:
        """``G(w; a, b)``; ``b`` may be ``math.inf``."""
        if b < a:
            raise ValueError("rate integral needs a <= b")
        r = np.array([self.row(omega)])
        return complex(self.cumulative_at(b, r)[0] - self.cumulative_at(a, r)[0])


def build_tables(spec: BathSpec, bohr_freqs: Sequence[float],
                 grid: TableGrid | None = None,
                 rule=None) -> CorrelationTables:
    """Tabulate ``C(s)`` and ``G(w; 0, s)`` for ``w`` in ``bohr_freqs``.

    Negated frequencies are added so that every ``G(-w)`` is available.

    Raises
    ------
    TableAccuracyError
        If the remainder beyond ``s_max`` exceeds ``tail_tol`` of the rates.
    """
    grid = grid or TableGrid()
    s = grid.points()
    freqs = sorted({round(float(w), 12) for w in bohr_freqs}
                   | {round(-float(w), 12) for w in bohr_freqs})
    freqs = np.array([0.0 if abs(w) < 1e-12 else w for w in freqs])
    if spec.eta == 0:
        zeros = np.zeros((freqs.size, s.size), dtype=complex)
        for arr in (s, zeros, freqs):
            arr.flags.writeable = False
        return CorrelationTables(
            spec=spec, s_grid=s, c_values=zeros[0] if freqs.size else
            np.zeros(s.size, dtype=complex), frequencies=freqs,
            cumulative=zeros, integrand=zeros, total=np.zeros(freqs.size,
                                                               dtype=complex))
    nodes, weights = rule if rule is not None else frequency_rule(spec)
    jc, jn = thermal_weighted_density(nodes, spec)
    jn1 = jn + spectral_density(nodes, spec)  # J (n + 1)

    c_values = correlation_fixed_rule(s, spec, (nodes, weights))
    cumulative = np.empty((freqs.size, s.size), dtype=complex)
    for k, w in enumerate(freqs):
        xp = (w + nodes)[None, :]
        xm = (w - nodes)[None, :]
        for start in range(0, s.size, 256):
            sl = slice(start, start + 256)
            ss = s[sl, None]
            cumulative[k, sl] = (_half_line_kernel(xp, ss) @ (weights * jn)
                                 + _half_line_kernel(xm, ss) @ (weights * jn1))
    cumulative[:, 0] = 0.0
    integrand = c_values[None, :] * np.exp(1j * freqs[:, None] * s[None, :])

    # remainder beyond s_max, bounded by |C| integrated over a long window
    far = np.linspace(grid.s_max, 4.0 * grid.s_max, 601)
    c_far = np.abs(correlation_fixed_rule(far, spec, frequency_rule(spec, 240, 40)))
    tail = float(integrate.trapezoid(c_far, far) + c_far[-1] * far[-1] / 3.0)
    scale = max(float(np.max(np.abs(cumulative[:, -1]), initial=0.0)),
                float(integrate.trapezoid(np.abs(c_values), s)))
    if spec.eta > 0 and tail > grid.tail_tol * scale:
        raise TableAccuracyError(
            f"remainder beyond s_max={grid.s_max} ps estimated at {tail:.2e} "
            f"(> {grid.tail_tol:.0e} of {scale:.3e}); increase s_max")
    for arr in (s, c_values, cumulative, integrand, freqs):
        arr.flags.writeable = False
    return CorrelationTables(
        spec=spec, s_grid=s, c_values=c_values, frequencies=freqs,
        cumulative=cumulative, integrand=integrand,
        total=cumulative[:, -1].copy(), tail_bound=tail)
