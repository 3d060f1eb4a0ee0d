"""JSON scenario configuration: defaults, deep merge, dotted overrides, validation."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import fields, is_dataclass, replace
from pathlib import Path
from typing import Any, Iterable, Mapping

from .cbf import calibrate_lambda
from .exceptions import ConfigError
from .sim import ScenarioConfig, config_to_dict, generate_reference

AUTO = "auto"


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def deep_merge(base: Mapping, update: Mapping) -> dict:
    """Recursive dict merge; values in ``update`` win, nested objects merge."""
    out = dict(base)
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), Mapping):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def parse_override(text: str) -> tuple[list[str], Any]:
    """``"mpc.horizon=20"`` -> (["mpc", "horizon"], 20). Values parse as JSON, else stay strings."""
    key, sep, raw = text.partition("=")
    key = key.strip()
    if not sep or not key or any(not part for part in key.split(".")):
        raise ConfigError(f"override {text!r}: expected KEY=VALUE with a dotted key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def apply_overrides(data: Mapping, overrides: Iterable[str]) -> dict:
    out = dict(data)
    for text in overrides:
        keys, value = parse_override(text)
        patch: Any = value
        for key in reversed(keys):
            patch = {key: patch}
        cursor = out
        for i, key in enumerate(keys[:-1]):
            node = cursor.get(key)
            if node is not None and not isinstance(node, Mapping):
                raise ConfigError(f"{'.'.join(keys[: i + 1])}: cannot set a field inside a non-object value")
            cursor = node if isinstance(node, Mapping) else {}
        out = deep_merge(out, patch)
    return out


def _number(value: Any, path: str, integer: bool) -> float | int:
    if isinstance(value, str) and not integer and value.strip().lower() in ("inf", "+inf", "-inf"):
        return -math.inf if value.strip().startswith("-") else math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        kind = "an integer" if integer else "a number"
        raise ConfigError(f"{path}: expected {kind}, got {value!r}")
    if integer:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return int(value)
    if math.isnan(value):
        raise ConfigError(f"{path}: NaN is not allowed")
    return float(value)


def _coerce(value: Any, default: Any, path: str) -> Any:
    if is_dataclass(default):
        return _build(type(default), value, path)
    if isinstance(default, enum.Enum):
        try:
            return type(default)(value)
        except ValueError:
            options = ", ".join(m.value for m in type(default))
            raise ConfigError(f"{path}: {value!r} is not one of {options}") from None
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true or false, got {value!r}")
        return value
    if isinstance(default, int):
        return _number(value, path, integer=True)
    if isinstance(default, float):
        return _number(value, path, integer=False)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        if len(value) != len(default):
            raise ConfigError(f"{path}: expected {len(default)} entries, got {len(value)}")
        return tuple(_coerce(v, d, f"{path}[{i}]") for i, (v, d) in enumerate(zip(value, default)))
    raise ConfigError(f"{path}: unsupported field type {type(default).__name__}")


def _qualify(path: str, message: str, names: Iterable[str]) -> str:
    # dataclass checks open with the field name ("mass must be positive")
    for name in sorted(names, key=len, reverse=True):
        if message.startswith(name + " ") or message == name:
            return _join(path, message)
    return f"{path}: {message}" if path else message


def _build(cls, data: Any, path: str):
    if not isinstance(data, Mapping):
        raise ConfigError(f"{path or 'config'}: expected an object, got {data!r}")
    defaults = cls()
    names = [f.name for f in fields(cls)]
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"{_join(path, unknown[0])}: unknown key (allowed: {', '.join(names)})")
    kwargs = {name: _coerce(value, getattr(defaults, name), _join(path, name)) for name, value in data.items()}
    try:
        return replace(defaults, **kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(_qualify(path, str(exc), names)) from None


def _resolve_lambda(data: dict) -> tuple[dict, bool]:
    cbf = data.get("cbf")
    if isinstance(cbf, Mapping) and cbf.get("lam") == AUTO:
        cbf = dict(cbf)
        del cbf["lam"]
        return {**data, "cbf": cbf}, True
    return data, False


def config_from_dict(data: Mapping) -> ScenarioConfig:
    """Validate a (partial) config mapping against the defaults.

    ``cbf.lam = "auto"`` replaces the margin with the harness-calibrated value
    for the configured ``d_m``.
    """
    data, auto = _resolve_lambda(dict(data))
    config = _build(ScenarioConfig, data, "")
    if auto:
        lam, _ = calibrate_lambda(config.cbf, config.d_m)
        config = replace(config, cbf=replace(config.cbf, lam=lam))
    # the reference generator owns the tunnel-confinement check
    generate_reference(config.case, config.geometry, config.trajectory, config.total_time, config.mpc.t_s)
    return config


def load_config(path: str | Path | None = None, overrides: Iterable[str] = ()) -> ScenarioConfig:
    """Defaults <- JSON file <- dotted ``KEY=VALUE`` overrides, then full validation."""
    data: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
        if text.strip():
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
            if not isinstance(data, dict):
                raise ConfigError(f"{path}: top level must be a JSON object")
    data = apply_overrides(data, overrides)
    return config_from_dict(data)


def dump_config(config: ScenarioConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2, sort_keys=True)
