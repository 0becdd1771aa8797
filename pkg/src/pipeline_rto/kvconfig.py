"""Flat ``key=value`` config files, shared by the CLI and the synthetic generator."""

from __future__ import annotations

import dataclasses
import types
import typing
from pathlib import Path
from typing import Any, Mapping

TRUE_WORDS = {"1", "true", "yes", "on"}
FALSE_WORDS = {"0", "false", "no", "off"}


class ConfigError(ValueError):
    """Invalid configuration value or incompatible combination of settings."""


def parse_kv_file(path: str | Path) -> dict[str, str]:
    """Read ``key = value`` lines; ``#`` starts a comment, blank lines are skipped.

    Keys are normalized so that ``batch-size`` and ``batch_size`` are the same key.
    """
    out: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = normalize_key(key)
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        out[key] = value.strip()
    return out


def normalize_key(key: str) -> str:
    return key.strip().lstrip("-").replace("-", "_")


def parse_bool(value: str | bool) -> bool:
    if isinstance(value, bool):
        return value
    word = value.strip().lower()
    if word in TRUE_WORDS:
        return True
    if word in FALSE_WORDS:
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def coerce(value: Any, annotation: Any) -> Any:
    """Convert a config-file string to ``annotation`` (int, float, bool, str, tuples, optionals)."""
    if not isinstance(value, str):
        return value
    origin = typing.get_origin(annotation)
    args = typing.get_args(annotation)
    if origin in (typing.Union, types.UnionType):
        if value.strip().lower() in {"", "none", "null"} and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return coerce(value, inner[0])
    if origin is tuple:
        item = args[0] if args else str
        parts = [p for p in value.replace(" ", "").split(",") if p]
        return tuple(coerce(p, item) for p in parts)
    if annotation is bool:
        return parse_bool(value)
    try:
        if annotation is int:
            return int(value)
        if annotation is float:
            return float(value)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {value!r} as {annotation.__name__}") from exc
    return value


def dataclass_from_mapping(cls: type, values: Mapping[str, Any], *, strict: bool = True):
    """Build dataclass ``cls`` from a flat mapping, coercing strings by field annotation."""
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in values.items():
        key = normalize_key(key)
        if key not in names:
            if strict:
                raise ConfigError(f"unknown key {key!r} for {cls.__name__}")
            continue
        kwargs[key] = coerce(value, hints[key])
    return cls(**kwargs)
