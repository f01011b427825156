"""Direct s-quadrature versions of the bath generators.

These evaluate the double commutators by integrating ``C(s)`` times
frame-rotated operators over ``s`` with scipy's adaptive vector quadrature.
No eigenoperator decomposition and no rate tables are involved; ``C(s)`` comes
from a dense 10^4-node frequency rule.
"""
import math

import numpy as np
from scipy.integrate import quad_vec
from scipy.linalg import expm

from nm_regress.bath import correlation_fixed_rule, frequency_rule

from conftest import PAPER_BATH

DENSE_RULE = frequency_rule(PAPER_BATH, panels=250, order=40)


def rotate(h, x, s):
    u = expm(-1j * h * s)
    return u @ x @ u.conj().T


def brute_rate_operator(model, a, b):
    """``int_a^b C(s) U(s) S U(s)^dag ds`` by adaptive quadrature in s."""
    h, s_op = model.h_s, model.coupling

    def f(s):
        v = correlation_fixed_rule(s, PAPER_BATH, DENSE_RULE)[0] * rotate(h, s_op, s)
        return np.concatenate([v.real.ravel(), v.imag.ravel()])

    r, _ = quad_vec(f, a, b, epsabs=1e-14, epsrel=1e-12, limit=400)
    d = model.dim
    return (r[: d * d] + 1j * r[d * d:]).reshape(d, d)


def brute_dissipator(x, tau, model):
    # D(x) = -int_0^tau ds [S, C(s) S(-s) x - C(s)^* x S(-s)]
    m = brute_rate_operator(model, 0.0, tau)
    y = m @ x - x @ m.conj().T
    return -(model.coupling @ y - y @ model.coupling)


def brute_inhomogeneous(rho, tau, t, model):
    upper = 30.0 if math.isinf(t) else tau + t
    n = brute_rate_operator(model, tau, upper)
    rho_f = rotate(model.h_s, rho, tau)
    b_rot = rotate(model.h_s, model.emission_op, tau)
    y = b_rot @ (n @ rho_f - rho_f @ n.conj().T)
    return -(model.coupling @ y - y @ model.coupling)
