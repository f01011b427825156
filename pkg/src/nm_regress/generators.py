"""Right-hand sides of the second-order (TCL2) equations of motion.

For a coupling ``H_I = S (x) X`` the bath trace of the double commutators
reduces, with ``C(s) = <X(s) X(0)>``, to the shared kernel::

    K_W(x; M) = -[S, W (M x - x M^dagger)]

where ``M = int ds C(s) S(-s)`` is assembled from the eigenoperator
components ``S(-s) = sum_j A_j exp(-i w_j s)``, so that
``M = sum_j G(-w_j; a, b) A_j``.  ``W`` is the identity for the dissipator
and the rotated emission operator for the inhomogeneous term.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .bath import CorrelationTables
from .operators import (
    BohrDecomposition,
    EigenFrame,
    OperatorError,
    as_operator,
    bohr_decompose,
    eigendecompose,
    frame_rotate,
    is_hermitian,
    sigma_minus,
)

__all__ = [
    "SolverMode",
    "SystemModel",
    "dissipator",
    "inhomogeneous",
    "lindblad",
    "rhs_physical",
    "rhs_effective",
    "superoperator",
    "markovian_superoperator",
]


class SolverMode(str, enum.Enum):
    """Which generator propagates the effective density operator.

    ``markovian``: rates integrated to infinity, no inhomogeneous term.
    ``naive``: time-dependent rates, no inhomogeneous term.
    ``full``: time-dependent rates plus the inhomogeneous term.
    """

    MARKOVIAN = "markovian"
    NAIVE = "naive"
    FULL = "full"

    @classmethod
    def parse(cls, value) -> "SolverMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown mode {value!r}; expected one of "
                f"{', '.join(m.value for m in cls)}") from None


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Finite-dimensional system coupled linearly to one bosonic bath.

    Parameters
    ----------
    h_s : array_like
        System Hamiltonian (ps^-1).
    coupling : array_like
        Hermitian system factor of the bath interaction.
    emission_op : array_like
        Operator ``B`` that seeds the effective operator, ``Lambda(0) = B rho``.
    lindblad : sequence of (operator, rate)
        Markovian decay channels (rates in ps^-1).
    """

    h_s: np.ndarray
    coupling: np.ndarray
    emission_op: np.ndarray
    lindblad: tuple = ()
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        h = as_operator(self.h_s)
        d = h.shape[0]
        object.__setattr__(self, "h_s", h)
        object.__setattr__(self, "coupling", as_operator(self.coupling, d))
        object.__setattr__(self, "emission_op", as_operator(self.emission_op, d))
        channels = tuple((as_operator(op, d), float(rate))
                         for op, rate in self.lindblad)
        object.__setattr__(self, "lindblad", channels)
        if not is_hermitian(h):
            raise OperatorError("h_s must be Hermitian")
        if not is_hermitian(self.coupling):
            raise OperatorError("coupling must be Hermitian")
        if any(rate < 0 for _, rate in channels):
            raise ValueError("Lindblad rates must be >= 0")

    @classmethod
    def quantum_dot(cls, rabi: float, detuning: float, gamma: float) -> "SystemModel":
        """Driven two-level emitter in the laser frame.

        ``H_S = detuning s^dag s + (rabi/2)(s^dag + s)``, phonons couple to
        ``s^dag s`` and spontaneous emission is the channel ``(s, gamma)``.
        """
        sm = sigma_minus()
        n = sm.conj().T @ sm
        h = detuning * n + 0.5 * rabi * (sm + sm.conj().T)
        return cls(h, n, sm, ((sm, gamma),),
                   params={"rabi": rabi, "detuning": detuning, "gamma": gamma})

    @property
    def dim(self) -> int:
        return self.h_s.shape[0]

    @cached_property
    def frame(self) -> EigenFrame:
        return eigendecompose(self.h_s)

    @cached_property
    def coupling_bohr(self) -> BohrDecomposition:
        return bohr_decompose(self.coupling, self.frame)

    @property
    def bohr_frequencies(self) -> tuple[float, ...]:
        return self.coupling_bohr.frequencies

    @cached_property
    def _components(self) -> np.ndarray:
        return np.stack(self.coupling_bohr.components)

    def _rows(self, tables: CorrelationTables) -> np.ndarray:
        # rates are needed at -w_j for component A_j
        cache = self.__dict__.setdefault("_row_cache", {})
        key = id(tables)
        if key not in cache:
            cache[key] = (tables, tables.rows([-w for w in self.bohr_frequencies]))
        return cache[key][1]


def _rate_operator(model: SystemModel, rates: np.ndarray) -> np.ndarray:
    return np.tensordot(rates, model._components, axes=1)


def _bath_kernel(x: np.ndarray, s_op: np.ndarray, m: np.ndarray,
                 w: np.ndarray | None = None) -> np.ndarray:
    """``-[S, W (M x - x M^dagger)]``."""
    y = m @ x - x @ m.conj().T
    if w is not None:
        y = w @ y
    return y @ s_op - s_op @ y


def dissipator(x, tau: float, model: SystemModel, tables: CorrelationTables,
               mode=SolverMode.FULL) -> np.ndarray:
    """Second-order bath dissipator with rates integrated over ``[0, tau]``.

    In the Markovian mode the rates are integrated to infinity and ``tau`` is
    ignored.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    mode = SolverMode.parse(mode)
    rows = model._rows(tables)
    upper = math.inf if mode is SolverMode.MARKOVIAN else tau
    m = _rate_operator(model, tables.cumulative_at(upper, rows))
    return _bath_kernel(x, model.coupling, m)


def inhomogeneous(rho_frame, tau: float, t: float, model: SystemModel,
                  tables: CorrelationTables) -> np.ndarray:
    """Inhomogeneous source from system-bath correlations built up before ``t``.

    Parameters
    ----------
    rho_frame : array_like
        The anchor state rotated to ``tau``, ``U(tau) rho(t) U(tau)^dagger``.
    tau : float
        Delay (ps).
    t : float
        Anchor time (ps); ``math.inf`` for the steady-state limit.
    """
    if t < 0:
        raise ValueError("anchor time t must be >= 0")
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if t == 0 or (math.isinf(t) and tau >= tables.s_max):
        return np.zeros((model.dim, model.dim), dtype=complex)
    rows = model._rows(tables)
    upper = math.inf if math.isinf(t) else tau + t
    rates = tables.cumulative_at(upper, rows) - tables.cumulative_at(tau, rows)
    n = _rate_operator(model, rates)
    b_rot = frame_rotate(model.emission_op, model.frame, tau)
    return _bath_kernel(rho_frame, model.coupling, n, b_rot)


def lindblad(x, model: SystemModel) -> np.ndarray:
    out = np.zeros_like(x, dtype=complex)
    for op, rate in model.lindblad:
        if rate == 0:
            continue
        opd = op.conj().T
        ld = opd @ op
        out = out + rate * (op @ x @ opd - 0.5 * (ld @ x + x @ ld))
    return out


def rhs_physical(rho, t: float, model: SystemModel, tables: CorrelationTables,
                 mode=SolverMode.FULL) -> np.ndarray:
    """``-i[H_S, rho] + D_t(rho) + Lindblad(rho)``."""
    h = model.h_s
    return (-1j * (h @ rho - rho @ h) + dissipator(rho, t, model, tables, mode)
            + lindblad(rho, model))


def rhs_effective(lam, rho_t, tau: float, t: float, model: SystemModel,
                  tables: CorrelationTables, mode=SolverMode.FULL) -> np.ndarray:
    """Right-hand side for the effective operator ``Lambda(t, tau)``.

    ``rho_t`` is the physical state at the anchor time ``t`` and is only used
    in the full mode.
    """
    mode = SolverMode.parse(mode)
    out = rhs_physical(lam, tau, model, tables, mode)
    if mode is SolverMode.FULL:
        rho_frame = frame_rotate(rho_t, model.frame, tau)
        out = out + inhomogeneous(rho_frame, tau, t, model, tables)
    return out


def superoperator(fn, dim: int) -> np.ndarray:
    """Matrix of a linear map on ``dim x dim`` operators (row-major vec)."""
    cols = []
    for k in range(dim * dim):
        e = np.zeros(dim * dim, dtype=complex)
        e[k] = 1.0
        cols.append(np.asarray(fn(e.reshape(dim, dim))).ravel())
    return np.array(cols).T


def markovian_superoperator(model: SystemModel,
                            tables: CorrelationTables) -> np.ndarray:
    """Saturated (Markovian) generator as a ``d^2 x d^2`` matrix."""
    return superoperator(
        lambda x: rhs_physical(x, math.inf, model, tables, SolverMode.MARKOVIAN),
        model.dim)
