"""Non-Markovian quantum regression for a phonon-coupled two-level emitter.

The package computes steady-state first-order correlation functions, the
incoherent emission spectrum and a trace-distance witness of information
backflow in three flavours (``SolverMode``):

``markovian``
    Saturated second-order rates; the regression theorem holds exactly.
``naive``
    Time-dependent second-order generator, without the inhomogeneous term.
``full``
    Time-dependent generator plus the inhomogeneous correlation term.

Typical use::

    from nm_regress import load_preset, build_tables, g1, spectrum
    cfg = load_preset("paper-fig1")
    model = cfg.model()
    tables = build_tables(cfg.bath_spec(), model.bohr_frequencies)
    trace = g1(model, tables, "full")
    s = spectrum(trace)
"""
from .bath import BathSpec, CorrelationTables, TableGrid, build_tables, polaron_shift
from .config import RunConfig, load_preset, parse_config
from .generators import SolverMode, SystemModel
from .observables import g1, sideband_asymmetry, sideband_fraction, spectrum
from .propagation import SimConfig, integrate_effective, integrate_physical, steady_state
from .witness import witness_trace

__version__ = "0.1.0"

__all__ = [
    "BathSpec", "CorrelationTables", "TableGrid", "build_tables", "polaron_shift",
    "RunConfig", "load_preset", "parse_config",
    "SolverMode", "SystemModel",
    "g1", "spectrum", "sideband_fraction", "sideband_asymmetry",
    "SimConfig", "integrate_physical", "integrate_effective", "steady_state",
    "witness_trace",
]
