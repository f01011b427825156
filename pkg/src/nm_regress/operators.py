"""Dense operator algebra for small open-system models.

Operators are plain complex ``numpy`` arrays of shape ``(d, d)``.  Time
evolution under a Hermitian Hamiltonian is always evaluated through its
eigenframe, so the same frame rotates states, builds eigenoperator
decompositions and exponentiates the Hamiltonian.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "HERMITIAN_TOL",
    "BOHR_MERGE_TOL",
    "OperatorError",
    "EigenFrame",
    "BohrDecomposition",
    "as_operator",
    "is_hermitian",
    "dag",
    "commutator",
    "anticommutator",
    "eigendecompose",
    "frame_rotate",
    "bohr_decompose",
    "trace_distance",
    "sigma_minus",
    "sigma_y",
    "projector",
]

HERMITIAN_TOL = 1e-12
BOHR_MERGE_TOL = 1e-9


class OperatorError(ValueError):
    """Raised for malformed operators (shape, Hermiticity, dimension)."""


def as_operator(x, dim: int | None = None) -> np.ndarray:
    """Return ``x`` as a square complex array, checking the dimension."""
    arr = np.asarray(x, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise OperatorError(f"operator must be square, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise OperatorError(
            f"dimension mismatch: expected {dim}, got {arr.shape[0]}")
    return arr


def dag(x: np.ndarray) -> np.ndarray:
    return x.conj().T


def hermiticity_defect(x: np.ndarray) -> float:
    return float(np.max(np.abs(x - x.conj().T)))


def is_hermitian(x: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return hermiticity_defect(x) < tol


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b + b @ a


def sigma_minus() -> np.ndarray:
    """Lowering operator ``|g><e|`` in the basis ``(|g>, |e>)``."""
    return np.array([[0, 1], [0, 0]], dtype=complex)


def sigma_y() -> np.ndarray:
    """``-i|e><g| + i|g><e|`` in the basis ``(|g>, |e>)``."""
    return np.array([[0, 1j], [-1j, 0]], dtype=complex)


def projector(index: int, dim: int = 2) -> np.ndarray:
    p = np.zeros((dim, dim), dtype=complex)
    p[index, index] = 1.0
    return p


@dataclass(frozen=True)
class EigenFrame:
    """Eigendecomposition ``h = V diag(eps) V^dagger`` of a Hermitian operator.

    Attributes
    ----------
    eigenvalues : ndarray of float
        Ascending eigenvalues (ps^-1).
    eigenvectors : ndarray of complex
        Unitary matrix whose columns are the eigenvectors.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def unitary(self, s: float) -> np.ndarray:
        """``exp(-i h s)``."""
        v = self.eigenvectors
        return (v * np.exp(-1j * self.eigenvalues * s)) @ v.conj().T

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def eigendecompose(h, hermitian: bool = True) -> EigenFrame:
    """Diagonalise a Hermitian operator.

    Raises
    ------
    OperatorError
        If ``h`` is not Hermitian to ``HERMITIAN_TOL`` or has dimension < 2.
    """
    h = as_operator(h)
    if h.shape[0] < 2:
        raise OperatorError("eigendecompose needs dim >= 2")
    if not hermitian:
        raise OperatorError("only Hermitian operators are supported")
    defect = hermiticity_defect(h)
    if defect >= HERMITIAN_TOL * max(1.0, float(np.max(np.abs(h)))):
        raise OperatorError(f"operator is not Hermitian (defect {defect:.3e})")
    evals, evecs = np.linalg.eigh(0.5 * (h + dag(h)))
    evals = np.ascontiguousarray(evals)
    evals.flags.writeable = False
    evecs.flags.writeable = False
    return EigenFrame(evals, evecs)


def frame_rotate(x, frame: EigenFrame, s: float) -> np.ndarray:
    """Return ``U(s) x U(s)^dagger`` with ``U(s) = exp(-i h s)``."""
    x = as_operator(x, frame.dim)
    u = frame.unitary(s)
    return u @ x @ u.conj().T


@dataclass(frozen=True)
class BohrDecomposition:
    """Eigenoperator expansion ``a = sum_j A_j``.

    Each component satisfies ``frame_rotate(A_j, s) = exp(-i w_j s) A_j``
    where ``w_j`` is a difference of eigenvalues of the frame Hamiltonian.
    """

    frequencies: tuple[float, ...]
    components: tuple[np.ndarray, ...]

    def __iter__(self):
        return iter(zip(self.frequencies, self.components))

    def __len__(self) -> int:
        return len(self.frequencies)

    def reconstruct(self) -> np.ndarray:
        return sum(self.components)

    def rotated(self, s: float) -> np.ndarray:
        return sum(np.exp(-1j * w * s) * a for w, a in self)

    def weighted(self, weights: Sequence[complex]) -> np.ndarray:
        """``sum_j weights[j] * A_j``."""
        out = np.zeros_like(self.components[0])
        for c, a in zip(weights, self.components):
            out = out + c * a
        return out


def _merge_frequencies(diffs: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Cluster sorted frequency values; returns (labels, representatives)."""
    flat = diffs.ravel()
    order = np.argsort(flat, kind="stable")
    labels = np.empty(flat.shape, dtype=int)
    reps: list[list[float]] = []
    for idx in order:
        w = flat[idx]
        if reps and w - reps[-1][-1] <= tol:
            reps[-1].append(w)
        else:
            reps.append([w])
        labels[idx] = len(reps) - 1
    centres = np.array([np.mean(r) for r in reps])
    # exact antisymmetry of the frequency set under w -> -w
    centres = 0.5 * (centres - centres[::-1])
    return labels.reshape(diffs.shape), centres


def bohr_decompose(a, frame: EigenFrame,
                   tol: float = BOHR_MERGE_TOL) -> BohrDecomposition:
    """Split ``a`` into components of definite Bohr frequency.

    Frequencies closer than ``tol`` (ps^-1) are merged, and components that
    vanish identically are dropped.
    """
    a = as_operator(a, frame.dim)
    v = frame.eigenvectors
    eps = frame.eigenvalues
    a_eig = v.conj().T @ a @ v
    diffs = eps[:, None] - eps[None, :]
    labels, centres = _merge_frequencies(diffs, tol)
    freqs, comps = [], []
    scale = max(1.0, float(np.max(np.abs(a))))
    for k, w in enumerate(centres):
        block = np.where(labels == k, a_eig, 0.0)
        if np.max(np.abs(block)) <= 1e-14 * scale:
            continue
        freqs.append(0.0 if abs(w) <= tol else float(w))
        comps.append(v @ block @ v.conj().T)
    if not comps:
        freqs, comps = [0.0], [np.zeros_like(a)]
    return BohrDecomposition(tuple(freqs), tuple(comps))


def trace_distance(a, b) -> float:
    """Half the trace norm of ``a - b`` for Hermitian ``a`` and ``b``."""
    a = as_operator(a)
    b = as_operator(b, a.shape[0])
    diff = a - b
    scale = max(1.0, float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    if hermiticity_defect(diff) >= 1e-10 * scale:
        raise OperatorError("trace_distance requires Hermitian inputs")
    w = np.linalg.eigvalsh(0.5 * (diff + dag(diff)))
    return float(0.5 * np.sum(np.abs(w)))
