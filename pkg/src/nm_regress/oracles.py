"""Independent reference solutions used by the validation suite and tests.

None of these routines touch the table-driven generators: the optical Bloch
equations are written in the real Bloch-vector form, and the pure-dephasing
oracle is the closed-form independent-boson decoherence function.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.linalg import expm

from .bath import BathSpec, spectral_density, thermal_weighted_density

__all__ = [
    "bloch_matrix",
    "bloch_steady_state",
    "bloch_excited_population",
    "bloch_trajectory",
    "bloch_g1",
    "bloch_spectrum",
    "ibm_phase",
    "ibm_phase_discrete",
    "ibm_single_mode_exact",
    "ibm_single_mode_closed_form",
    "lorentzian_fwhm",
]


def bloch_matrix(rabi: float, detuning: float, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Optical Bloch equations ``d/dt r = A r + b Tr(rho)`` for ``r = (u, v, w)``.

    ``u = 2 Re rho_eg``, ``v = 2 Im rho_eg``, ``w = rho_ee - rho_gg`` with
    ``H = detuning |e><e| + (rabi/2) sigma_x`` and decay ``gamma`` from
    ``|e>`` to ``|g>``.
    """
    g2 = 0.5 * gamma
    a = np.array([
        [-g2, detuning, 0.0],
        [-detuning, -g2, rabi],
        [0.0, -rabi, -gamma],
    ])
    b = np.array([0.0, 0.0, -gamma])
    return a, b


def _augmented(rabi, detuning, gamma) -> np.ndarray:
    # linear map on (u, v, w, trace), valid for non-Hermitian operators too
    a, b = bloch_matrix(rabi, detuning, gamma)
    aug = np.zeros((4, 4))
    aug[:3, :3] = a
    aug[:3, 3] = b
    return aug


def bloch_excited_population(rabi: float, detuning: float, gamma: float) -> float:
    """Closed-form steady-state ``rho_ee``."""
    return (rabi**2 / 4.0) / (detuning**2 + rabi**2 / 2.0 + gamma**2 / 4.0)


def bloch_steady_state(rabi: float, detuning: float, gamma: float) -> np.ndarray:
    """Steady-state density matrix in the basis ``(|g>, |e>)``."""
    a, b = bloch_matrix(rabi, detuning, gamma)
    return _from_bloch(np.concatenate([np.linalg.solve(a, -b), [1.0]]))


def _to_bloch(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    eg, ge = x[1, 0], x[0, 1]
    return np.array([eg + ge, -1j * (eg - ge), x[1, 1] - x[0, 0],
                     x[1, 1] + x[0, 0]])


def _from_bloch(r) -> np.ndarray:
    u, v, w, c = r
    eg = 0.5 * (u + 1j * v)
    ge = 0.5 * (u - 1j * v)
    return np.array([[0.5 * (c - w), ge], [eg, 0.5 * (c + w)]], dtype=complex)


def bloch_trajectory(rho0, grid, rabi: float, detuning: float,
                     gamma: float) -> np.ndarray:
    """Integrate the Bloch equations with scipy's DOP853."""
    aug = _augmented(rabi, detuning, gamma)
    r0 = _to_bloch(rho0).real
    sol = integrate.solve_ivp(lambda t, r: aug @ r, (grid[0], grid[-1]), r0,
                              method="DOP853", t_eval=grid, rtol=1e-13,
                              atol=1e-15)
    if not sol.success:
        raise RuntimeError(sol.message)
    return np.array([_from_bloch(r) for r in sol.y.T])


def _seed(rabi, detuning, gamma) -> np.ndarray:
    sm = np.array([[0, 1], [0, 0]], dtype=complex)
    return _to_bloch(sm @ bloch_steady_state(rabi, detuning, gamma))


def bloch_g1(taus, rabi: float, detuning: float, gamma: float) -> np.ndarray:
    """``<s^dag(tau) s(0)>`` in steady state via the regression theorem.

    ``Tr[s^dag Lambda] = Lambda_ge = (u - i v)/2`` for the complexified
    Bloch vector of ``Lambda(tau) = exp(L tau)[s rho_ss]``.
    """
    aug = _augmented(rabi, detuning, gamma)
    x = _seed(rabi, detuning, gamma)
    out = []
    for tau in np.atleast_1d(taus):
        u, v, _, _ = expm(aug * tau) @ x
        out.append(0.5 * (u - 1j * v))
    return np.array(out)


def bloch_spectrum(domega, rabi: float, detuning: float, gamma: float) -> np.ndarray:
    """Exact incoherent spectrum from the Bloch-equation eigenmodes.

    ``S = Re sum_k c_k / (i dw - lambda_k)`` over the decaying modes.
    """
    aug = _augmented(rabi, detuning, gamma)
    lam, vec = np.linalg.eig(aug)
    coef = np.linalg.solve(vec, _seed(rabi, detuning, gamma))
    amp = 0.5 * (vec[0, :] - 1j * vec[1, :]) * coef
    keep = np.abs(lam) > 1e-12
    dw = np.atleast_1d(domega)[:, None]
    return np.real(np.sum(amp[keep] / (1j * dw - lam[keep]), axis=1))


def lorentzian_fwhm(x: np.ndarray, y: np.ndarray, centre: float,
                    search: float) -> float:
    """Full width at half maximum of the peak nearest ``centre``."""
    sel = np.abs(x - centre) <= search
    xs, ys = x[sel], y[sel]
    k = int(np.argmax(ys))
    half = 0.5 * ys[k]
    left = k
    while left > 0 and ys[left] > half:
        left -= 1
    right = k
    while right < ys.size - 1 and ys[right] > half:
        right += 1
    xl = np.interp(half, [ys[left], ys[left + 1]], [xs[left], xs[left + 1]])
    xr = np.interp(half, [ys[right], ys[right - 1]], [xs[right], xs[right - 1]])
    return float(xr - xl)


def ibm_phase(tau: float, spec: BathSpec) -> complex:
    """Independent-boson decoherence function.

    ``Phi(tau) = int dw J(w)/w^2 [coth(w/2kT)(1 - cos w tau) + i sin w tau]``
    so that the exciton coherence decays as ``exp(-Phi)`` (after removing the
    polaron phase ``exp(-i delta tau)``).
    """
    if tau == 0:
        return 0j
    wmax = spec.omega_max

    def re_f(w):
        if w == 0.0:
            return 0.0
        jc, _ = thermal_weighted_density(w, spec)
        return float(jc) * (1.0 - math.cos(w * tau)) / w**2

    def im_f(w):
        if w == 0.0:
            return spec.eta * tau
        return spectral_density(w, spec) * math.sin(w * tau) / w**2

    re = integrate.quad(re_f, 0.0, wmax, epsabs=1e-14, epsrel=1e-12, limit=500)[0]
    im = integrate.quad(im_f, 0.0, wmax, epsabs=1e-14, epsrel=1e-12, limit=500)[0]
    return complex(re, im)


def ibm_phase_discrete(taus, spec: BathSpec, n_modes: int = 200) -> np.ndarray:
    """``Phi(tau)`` for a bath of ``n_modes`` discrete oscillators.

    Mode ``k`` sits at the midpoint ``w_k`` of a uniform partition of
    ``(0, omega_max)`` with ``g_k^2 = J(w_k) dw``.
    """
    dw = spec.omega_max / n_modes
    wk = (np.arange(n_modes) + 0.5) * dw
    g2 = spectral_density(wk, spec) * dw
    jc, _ = thermal_weighted_density(wk, spec)
    coth = jc / np.where(g2 > 0, spectral_density(wk, spec), 1.0)
    taus = np.atleast_1d(taus)[:, None]
    return np.sum(g2 / wk**2 * (coth * (1 - np.cos(wk * taus))
                                + 1j * np.sin(wk * taus)), axis=1)


def ibm_single_mode_closed_form(tau: float, omega: float, g: float,
                                kt: float) -> complex:
    """``<e^{i H_g tau} e^{-i H_e tau}>_th`` for one displaced oscillator.

    ``H_g = w b^dag b`` and ``H_e = w b^dag b + g (b + b^dag)``.  The result is
    ``exp(i g^2 tau / w - phi)`` with the per-mode decoherence
    ``phi = (g/w)^2 [coth(w/2kT)(1 - cos w tau) + i sin w tau]``.
    """
    coth = 1.0 if kt == 0 else 1.0 / math.tanh(omega / (2 * kt))
    phi = (g / omega) ** 2 * (coth * (1 - math.cos(omega * tau))
                              + 1j * math.sin(omega * tau))
    return complex(np.exp(1j * g**2 * tau / omega - phi))


def ibm_single_mode_exact(tau: float, omega: float, g: float, kt: float,
                          n_max: int = 60) -> complex:
    """Same quantity by brute force in a truncated Fock space."""
    n = np.arange(n_max)
    b = np.diag(np.sqrt(n[1:]), 1).astype(complex)
    hg = omega * np.diag(n).astype(complex)
    he = hg + g * (b + b.conj().T)
    if kt == 0:
        p = np.zeros(n_max)
        p[0] = 1.0
    else:
        p = np.exp(-omega * n / kt)
        p /= p.sum()
    rho = np.diag(p).astype(complex)
    op = expm(1j * hg * tau) @ expm(-1j * he * tau)
    return complex(np.trace(op @ rho))
