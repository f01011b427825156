"""Run configuration: INI-style text with unit-suffixed keys.

Example::

    [system]
    rabi_ps_inv = 0.12
    detuning_ps_inv = auto-polaron
    gamma_ps_inv = 0.01

    [bath]
    eta_ps2 = 0.03
    omega_c_ps_inv = 2.2
    temperature_k = 4

    [solver]
    mode = full

Only the ``system`` and ``bath`` keys are required; ``solver`` and ``output``
keys fall back to the defaults in ``SCHEMA``.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from typing import Any

from .bath import BathSpec, TableGrid, polaron_shift
from .generators import SolverMode, SystemModel
from .propagation import SimConfig

__all__ = ["ConfigError", "RunConfig", "SCHEMA", "PRESETS", "parse_config",
           "load_preset"]

AUTO_POLARON = "auto-polaron"
REQUIRED = object()


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


@dataclass(frozen=True)
class Key:
    stem: str
    unit: str           # suffix including the leading underscore, or ""
    kind: str           # "float", "int", "str", "mode", "detuning"
    default: Any = REQUIRED
    nonnegative: bool = False
    positive: bool = False

    @property
    def name(self) -> str:
        return self.stem + self.unit


def _k(stem, unit, kind="float", default=REQUIRED, **kw) -> Key:
    return Key(stem, unit, kind, default, **kw)


_sim = SimConfig()
_grid = TableGrid()

SCHEMA: dict[str, dict[str, Key]] = {
    "system": {k.name: k for k in [
        _k("rabi", "_ps_inv", nonnegative=True),
        _k("detuning", "_ps_inv", "detuning"),
        _k("gamma", "_ps_inv", nonnegative=True),
    ]},
    "bath": {k.name: k for k in [
        _k("eta", "_ps2", nonnegative=True),
        _k("omega_c", "_ps_inv", positive=True),
        _k("temperature", "_k", nonnegative=True),
    ]},
    "solver": {k.name: k for k in [
        _k("mode", "", "mode", "full"),
        _k("atol", "", default=_sim.atol, positive=True),
        _k("rtol", "", default=_sim.rtol, nonnegative=True),
        _k("initial_step", "_ps", default=_sim.initial_step, positive=True),
        _k("max_step", "_ps", default=_sim.max_step, positive=True),
        _k("dense_end", "_ps", default=_sim.dense_end, positive=True),
        _k("dense_step", "_ps", default=_sim.dense_step, positive=True),
        _k("tau_end", "_ps", default=_sim.tau_end, positive=True),
        _k("sparse_step", "_ps", default=_sim.sparse_step, positive=True),
        _k("steady_t_max", "_ps", default=_sim.steady_t_max, positive=True),
        _k("steady_tol", "", default=_sim.steady_tol, positive=True),
        _k("s_step", "_ps", default=_grid.s_step, positive=True),
        _k("s_max", "_ps", default=_grid.s_max, positive=True),
        _k("witness_t_end", "_ps", default=20.0, positive=True),
        _k("witness_threshold", "_ps_inv", default=1e-8, positive=True),
    ]},
    "output": {k.name: k for k in [
        _k("directory", "", "str", "."),
        _k("omega_max", "_ps_inv", default=8.0, positive=True),
        _k("spectrum_points", "", "int", 3201, positive=True),
        _k("sideband_window", "_ps_inv", default=0.5, positive=True),
    ]},
}

PRESETS: dict[str, dict[str, dict[str, Any]]] = {
    "paper-fig1": {
        "system": {"rabi_ps_inv": 0.12, "detuning_ps_inv": AUTO_POLARON,
                   "gamma_ps_inv": 0.01},
        "bath": {"eta_ps2": 0.03, "omega_c_ps_inv": 2.2, "temperature_k": 4.0},
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration, grouped by section."""

    system: dict
    bath: dict
    solver: dict
    output: dict
    source: str = field(default="text", compare=False)

    @property
    def mode(self) -> SolverMode:
        return SolverMode.parse(self.solver["mode"])

    def bath_spec(self) -> BathSpec:
        b = self.bath
        return BathSpec(b["eta_ps2"], b["omega_c_ps_inv"], b["temperature_k"])

    def detuning(self) -> float:
        d = self.system["detuning_ps_inv"]
        return polaron_shift(self.bath_spec()) if d == AUTO_POLARON else d

    def model(self) -> SystemModel:
        s = self.system
        return SystemModel.quantum_dot(s["rabi_ps_inv"], self.detuning(),
                                       s["gamma_ps_inv"])

    def table_grid(self) -> TableGrid:
        return TableGrid(self.solver["s_step_ps"], self.solver["s_max_ps"])

    def sim_config(self) -> SimConfig:
        s = self.solver
        return SimConfig(
            atol=s["atol"], rtol=s["rtol"], initial_step=s["initial_step_ps"],
            max_step=s["max_step_ps"], dense_end=s["dense_end_ps"],
            dense_step=s["dense_step_ps"], tau_end=s["tau_end_ps"],
            sparse_step=s["sparse_step_ps"],
            steady_t_max=s["steady_t_max_ps"], steady_tol=s["steady_tol"])

    def sections(self) -> dict:
        return {"system": self.system, "bath": self.bath,
                "solver": self.solver, "output": self.output}

    def with_overrides(self, overrides: dict[str, Any]) -> "RunConfig":
        """Return a copy with ``{"section.key": value}`` replacements."""
        raw = {name: dict(vals) for name, vals in self.sections().items()}
        for dotted, value in overrides.items():
            section, key = _split_dotted(dotted)
            raw[section][key] = value
        return _validate(raw, self.source)

    def to_text(self) -> str:
        """Echo the full configuration, defaults included."""
        lines = []
        for name, vals in self.sections().items():
            lines.append(f"[{name}]")
            for key in SCHEMA[name]:
                lines.append(f"{key} = {_format_value(vals[key])}")
            lines.append("")
        return "\n".join(lines)


def _format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _split_dotted(dotted: str) -> tuple[str, str]:
    if "." not in dotted:
        raise ConfigError(f"override {dotted!r} must look like section.key")
    section, key = dotted.split(".", 1)
    if section not in SCHEMA:
        raise ConfigError(f"unknown section [{section}]")
    _check_key(section, key)
    return section, key


def _check_key(section: str, key: str) -> Key:
    keys = SCHEMA[section]
    if key in keys:
        return keys[key]
    for spec in keys.values():
        if spec.unit and (key == spec.stem or key.startswith(spec.stem + "_")):
            raise ConfigError(
                f"unit-suffix mismatch in [{section}]: got {key!r}, "
                f"expected {spec.name!r}")
    raise ConfigError(f"unknown key {key!r} in [{section}]; allowed: "
                      f"{', '.join(keys)}")


def _coerce(section: str, spec: Key, value) -> Any:
    where = f"[{section}] {spec.name}"
    if spec.kind == "str":
        return str(value)
    if spec.kind == "mode":
        try:
            return SolverMode.parse(value).value
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    if spec.kind == "detuning" and str(value).strip().lower() == AUTO_POLARON:
        return AUTO_POLARON
    try:
        if spec.kind == "int":
            out = int(str(value).strip())
        else:
            out = float(str(value).strip()) if isinstance(value, str) else float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number, got {value!r}") from None
    if isinstance(out, float) and not math.isfinite(out):
        raise ConfigError(f"{where}: value must be finite")
    if spec.nonnegative and out < 0:
        raise ConfigError(f"{where}: negative physical parameter {out}")
    if spec.positive and out <= 0:
        raise ConfigError(f"{where}: must be > 0, got {out}")
    return out


def _validate(raw: dict[str, dict[str, Any]], source: str) -> RunConfig:
    for section in raw:
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]; allowed: "
                              f"{', '.join(SCHEMA)}")
    missing = []
    out: dict[str, dict[str, Any]] = {}
    for section, keys in SCHEMA.items():
        given = raw.get(section, {})
        for key in given:
            _check_key(section, key)
        vals = {}
        for name, spec in keys.items():
            if name in given:
                vals[name] = _coerce(section, spec, given[name])
            elif spec.default is REQUIRED:
                missing.append(f"{section}.{name}")
            else:
                vals[name] = spec.default
        out[section] = vals
    if missing:
        raise ConfigError("missing required keys: " + ", ".join(missing))
    return RunConfig(out["system"], out["bath"], out["solver"], out["output"],
                     source)


def load_preset(name: str) -> RunConfig:
    try:
        raw = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available: "
                          f"{', '.join(PRESETS)}") from None
    return _validate({k: dict(v) for k, v in raw.items()}, f"preset:{name}")


def parse_config(text: str) -> RunConfig:
    """Parse configuration text, or a bare preset name such as ``paper-fig1``."""
    stripped = text.strip()
    if stripped in PRESETS:
        return load_preset(stripped)
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    raw = {s: dict(parser.items(s)) for s in parser.sections()}
    return _validate(raw, "text")
