"""Line-based ``key = value`` experiment configuration.

Frequencies and rates are entered as ``value / 2 pi`` in GHz (the way
parameter tables are usually quoted); an optional unit suffix ``GHz``,
``MHz``, ``kHz`` or ``Hz`` overrides the default. Numbers are parsed as plain
decimals (``float`` syntax, no locale). ``#`` starts a comment.

Example::

    n_qubits = 2
    omega_r = 10
    epsilon = 10
    g = 20 MHz
    Omega_x = 2
    omega_x = 9.98
    gamma = 0.05 MHz
    kappa = 0.012 MHz
"""

from __future__ import annotations

import math
import re
import warnings

from .model import SystemParams, check_regime
from .protocols import ENGINES, MODES, PROTOCOLS, ExperimentConfig

__all__ = ["ConfigError", "parse_config", "read_config", "FREQUENCY_KEYS", "REQUIRED_KEYS"]

FREQUENCY_KEYS = ("omega_r", "epsilon", "g", "Omega_x", "omega_x", "Omega_z", "omega_z", "gamma", "kappa")
REQUIRED_KEYS = ("n_qubits", "omega_r", "epsilon", "g", "Omega_x", "omega_x")
OTHER_KEYS = ("protocol", "horizon_periods", "samples", "modes", "engine", "trajectories", "seed",
              "fock_dim", "counter_rotating", "check_convergence", "step_scale", "out")
KNOWN_KEYS = frozenset(("n_qubits",) + FREQUENCY_KEYS + OTHER_KEYS)
UNITS = {"ghz": 1e9, "mhz": 1e6, "khz": 1e3, "hz": 1.0}
PROTOCOL_ALIASES = {"scan": "fidelity_scan", "fidelity_scan": "fidelity_scan",
                    "gate": "gate", "cat": "cat", "ghz": "ghz"}

_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")
_QUANTITY = re.compile(r"^([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z]*)$")


class ConfigError(ValueError):
    """Malformed, incomplete or physically invalid configuration."""


def read_config(text: str) -> dict[str, str]:
    """Split the text into raw ``key -> value`` strings, rejecting unknown or repeated keys."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0]
        if not line.strip():
            continue
        m = _LINE.match(line)
        if not m:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, value = m.groups()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: key {key!r} given twice")
        if not value:
            raise ConfigError(f"line {lineno}: key {key!r} has no value")
        raw[key] = value
    return raw


def _frequency(key: str, value: str) -> float:
    if "," in value:
        raise ConfigError(f"{key}: per-qubit lists are not supported (qubits are uniform)")
    m = _QUANTITY.match(value)
    if not m:
        raise ConfigError(f"{key}: cannot parse {value!r} as a number with optional unit")
    number, unit = m.groups()
    scale = UNITS.get(unit.lower() if unit else "ghz")
    if scale is None:
        raise ConfigError(f"{key}: unknown unit {unit!r}")
    x = float(number)
    if not math.isfinite(x):
        raise ConfigError(f"{key}: value must be finite")
    return 2 * math.pi * x * scale


def _integer(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


def _number(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


def _boolean(key: str, value: str) -> bool:
    v = value.lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {value!r}")


def parse_config(text: str, protocol: str | None = None, **overrides) -> ExperimentConfig:
    """Validate the text and build an :class:`ExperimentConfig`.

    ``protocol`` (e.g. from a CLI subcommand) takes precedence over a
    ``protocol`` key; the default is ``ghz``. Keyword ``overrides`` replace
    configuration fields after parsing (``seed``, ``n_traj``, ``fock_dim``).
    Regime warnings are emitted as :class:`UserWarning`; hard regime failures
    raise :class:`ConfigError`.
    """
    raw = read_config(text)
    missing = [k for k in REQUIRED_KEYS if k not in raw]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")
    if "," in raw["n_qubits"]:
        raise ConfigError("n_qubits: expected a single integer")
    values: dict = {"n_qubits": _integer("n_qubits", raw["n_qubits"])}
    for key in FREQUENCY_KEYS:
        if key in raw:
            values[key] = _frequency(key, raw[key])
    try:
        params = SystemParams(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    name = protocol or raw.get("protocol", "ghz")
    if name not in PROTOCOL_ALIASES:
        raise ConfigError(f"unknown protocol {name!r}; choose from {sorted(PROTOCOL_ALIASES)}")
    kwargs: dict = {"protocol": PROTOCOL_ALIASES[name]}
    if "horizon_periods" in raw:
        kwargs["horizon_periods"] = _number("horizon_periods", raw["horizon_periods"])
    if "samples" in raw:
        kwargs["samples"] = _integer("samples", raw["samples"])
    if "modes" in raw:
        modes = tuple(m.strip() for m in raw["modes"].split(",") if m.strip())
        unknown = [m for m in modes if m not in MODES]
        if unknown:
            raise ConfigError(f"modes: unknown mode(s) {unknown}; choose from {MODES}")
        kwargs["modes"] = modes
    if "engine" in raw:
        if raw["engine"] not in ENGINES:
            raise ConfigError(f"engine: choose from {ENGINES}")
        kwargs["engine"] = raw["engine"]
    if "trajectories" in raw:
        kwargs["n_traj"] = _integer("trajectories", raw["trajectories"])
    if "seed" in raw:
        kwargs["seed"] = _integer("seed", raw["seed"])
    if "fock_dim" in raw:
        kwargs["fock_dim"] = _integer("fock_dim", raw["fock_dim"])
    for key in ("counter_rotating", "check_convergence"):
        if key in raw:
            kwargs[key] = _boolean(key, raw[key])
    if "step_scale" in raw:
        kwargs["step_scale"] = _number("step_scale", raw["step_scale"])
    kwargs.update({k: v for k, v in overrides.items() if v is not None})

    if params.omega_x == params.omega_r:
        raise ConfigError("omega_x equals omega_r: the effective mode frequency vanishes")
    try:
        cfg = ExperimentConfig(params=params, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    report = check_regime(params)
    if report.hard_failures:
        raise ConfigError(f"parameters outside the effective-model regime: {report.summary()}")
    for c in report.conditions:
        if not c.passed:
            warnings.warn(f"regime condition '{c.name}' has a weak margin {c.margin:.3g}", stacklevel=2)
    return cfg
