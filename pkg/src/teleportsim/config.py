"""Flat ``key = value`` experiment files.

Keys carry their unit in the name.  Lists are comma separated.  Unknown keys
are rejected so that typos surface immediately::

    # measured setup
    v = 0.75
    v1 = 0.92
    v2 = 0.91
    g2 = 0.02
    n_phases = 12
    trials_per_phase = 1000000
    seed = 7
"""

from __future__ import annotations

import configparser
import json
import math
import re
from pathlib import Path
from typing import Any, Callable, Mapping

from .elements import ImperfectionModel
from .montecarlo import ExperimentConfig, default_phases

SECTION = "experiment"


class ConfigError(ValueError):
    """Malformed experiment configuration."""


def _float(text: Any) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("must be finite")
    return value


def _int(text: Any) -> int:
    if isinstance(text, float) and not text.is_integer():
        raise ValueError("must be an integer")
    return int(text)


def _floats(text: Any) -> tuple[float, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(_float(x) for x in text)
    return tuple(_float(x) for x in str(text).split(",") if x.strip())


def _pair(text: Any) -> tuple[float, float]:
    values = _floats(text)
    if len(values) != 2:
        raise ValueError("expects two comma-separated numbers")
    return values


FIELDS: dict[str, Callable[[Any], Any]] = {
    "v": _float,
    "v1": _float,
    "v2": _float,
    "g2": _float,
    "dark_rate": _float,
    "transmission": _float,
    "phases_rad": _floats,
    "n_phases": _int,
    "trials_per_phase": _int,
    "rep_period_ns": _float,
    "delay_ss_ns": _float,
    "delay_ll_ns": _float,
    "delay_sl_ns": _float,
    "central_window_ns": _pair,
    "broad_window_ns": _pair,
    "bin_width_ns": _float,
    "rate_calibration_hz": _float,
    "seed": _int,
}
MODEL_KEYS = ("v", "v1", "v2", "g2", "dark_rate", "transmission")


def _line_of(text: str, key: str) -> int | None:
    pattern = re.compile(rf"^\s*{re.escape(key)}\s*[=:]", re.IGNORECASE)
    for number, line in enumerate(text.splitlines(), start=1):
        if pattern.match(line):
            return number
    return None


def _where(source: str, text: str | None, key: str) -> str:
    line = _line_of(text, key) if text else None
    return f"{source}:{line}" if line else source


def config_from_mapping(values: Mapping[str, Any], source: str = "<config>", text: str | None = None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from flat keys, with field-level diagnostics."""
    parsed: dict[str, Any] = {}
    for key, raw in values.items():
        if key not in FIELDS:
            raise ConfigError(f"{_where(source, text, key)}: unknown key {key!r}")
        try:
            parsed[key] = FIELDS[key](raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{_where(source, text, key)}: {key}: cannot parse {raw!r} ({exc})") from None
    if "phases_rad" in parsed and "n_phases" in parsed:
        raise ConfigError(f"{source}: give either phases_rad or n_phases, not both")
    try:
        model = ImperfectionModel(**{k: parsed[k] for k in MODEL_KEYS if k in parsed})
    except ValueError as exc:
        name = str(exc).split()[0]
        raise ConfigError(f"{_where(source, text, name)}: {exc}") from None
    kwargs: dict[str, Any] = {"imperfections": model}
    if "phases_rad" in parsed:
        kwargs["phases"] = parsed["phases_rad"]
    elif "n_phases" in parsed:
        if parsed["n_phases"] < 1:
            raise ConfigError(f"{_where(source, text, 'n_phases')}: n_phases must be positive")
        kwargs["phases"] = default_phases(parsed["n_phases"])
    for key in ("trials_per_phase", "rep_period_ns", "central_window_ns", "broad_window_ns",
                "bin_width_ns", "rate_calibration_hz", "seed"):
        if key in parsed:
            kwargs[key] = parsed[key]
    offsets = dict(ExperimentConfig().delay_offsets_ns)
    for combo in ("SS", "LL", "SL"):
        key = f"delay_{combo.lower()}_ns"
        if key in parsed:
            offsets[combo] = parsed[key]
    kwargs["delay_offsets_ns"] = offsets
    try:
        return ExperimentConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        # Header on the first line keeps reported line numbers aligned.
        parser.read_string(f"[{SECTION}]\n" + text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{source}: {exc.message}") from None
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        if lineno is None and getattr(exc, "errors", None):
            lineno = exc.errors[0][0]
        where = f"{source}:{lineno - 1}" if lineno else source
        raise ConfigError(f"{where}: {exc.message.splitlines()[0]}") from None
    if parser.sections() != [SECTION]:
        extra = [s for s in parser.sections() if s != SECTION]
        raise ConfigError(f"{source}: sections are not supported (found [{extra[0]}])")
    return config_from_mapping(dict(parser[SECTION]), source, text)


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a ``key = value`` file, or the ``config`` echo of a JSON run summary."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    if path.suffix == ".json":
        try:
            document = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
        if not isinstance(document, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return config_from_mapping(document.get("config", document), str(path))
    return parse_config(text, str(path))


def config_to_mapping(config: ExperimentConfig) -> dict[str, Any]:
    """Flat keys that reproduce ``config`` exactly."""
    out: dict[str, Any] = dict(config.imperfections.to_dict())
    out["phases_rad"] = list(config.phases)
    out["trials_per_phase"] = config.trials_per_phase
    out["rep_period_ns"] = config.rep_period_ns
    for combo in ("SS", "LL", "SL"):
        out[f"delay_{combo.lower()}_ns"] = config.delay_offsets_ns[combo]
    out["central_window_ns"] = list(config.central_window_ns)
    out["broad_window_ns"] = list(config.broad_window_ns)
    out["bin_width_ns"] = config.bin_width_ns
    out["rate_calibration_hz"] = config.rate_calibration_hz
    out["seed"] = config.seed
    return out


def dump_config(config: ExperimentConfig) -> str:
    lines = []
    for key, value in config_to_mapping(config).items():
        if isinstance(value, list):
            value = ", ".join(repr(float(x)) for x in value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
