import math
import time

import numpy as np
import pytest

from nm_regress.bath import BathSpec, build_tables, polaron_shift
from nm_regress.generators import SolverMode, SystemModel
from nm_regress.observables import g1, spectrum
from nm_regress.propagation import SimConfig

PAPER_BATH = BathSpec(0.03, 2.2, 4.0)
RABI, GAMMA = 0.12, 0.01


@pytest.fixture(scope="session")
def paper_spec():
    return PAPER_BATH


@pytest.fixture(scope="session")
def paper_model():
    return SystemModel.quantum_dot(RABI, polaron_shift(PAPER_BATH), GAMMA)


@pytest.fixture(scope="session")
def paper_tables(paper_model):
    return build_tables(PAPER_BATH, paper_model.bohr_frequencies)


@pytest.fixture(scope="session")
def free_model():
    return SystemModel.quantum_dot(RABI, 0.0, GAMMA)


@pytest.fixture(scope="session")
def free_tables(free_model):
    return build_tables(BathSpec(0.0, 2.2, 4.0), free_model.bohr_frequencies)


class _Pipelines:
    """Lazily computed g1 traces and spectra shared across test modules."""

    def __init__(self, paper_model, paper_tables, free_model, free_tables):
        self._inputs = {"paper": (paper_model, paper_tables),
                        "free": (free_model, free_tables)}
        self._cache = {}

    def trace(self, case, mode):
        key = (case, SolverMode.parse(mode))
        if key not in self._cache:
            model, tables = self._inputs[case]
            self._cache[key] = g1(model, tables, key[1], SimConfig())
        return self._cache[key]

    def spectrum(self, case, mode):
        return spectrum(self.trace(case, mode))

    def timed_spectrum(self, case, mode):
        """Recompute g1 and the spectrum from scratch and report wall time."""
        start = time.perf_counter()
        model, tables = self._inputs[case]
        trace = g1(model, tables, mode, SimConfig())
        spec = spectrum(trace)
        self._cache[(case, SolverMode.parse(mode))] = trace
        return trace, spec, time.perf_counter() - start


@pytest.fixture(scope="session")
def pipelines(paper_model, paper_tables, free_model, free_tables):
    return _Pipelines(paper_model, paper_tables, free_model, free_tables)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_operator(rng, dim=2):
    return rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))


def random_hermitian(rng, dim=2):
    x = random_operator(rng, dim)
    return 0.5 * (x + x.conj().T)


def random_density(rng, dim=2):
    x = random_operator(rng, dim)
    rho = x @ x.conj().T
    return rho / np.trace(rho).real


def sum_rule_error(trace, spec):
    total = float(np.trapezoid(spec.values, spec.domega_grid))
    expected = math.pi * (trace.values[0] - trace.g1_infinity).real
    return abs(total - expected) / abs(expected)
