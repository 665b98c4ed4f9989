"""Layered tool configuration: flags > environment > config file > defaults.

The config file is flat ``key=value`` lines (``#`` comments and blank
lines allowed), the format cluster job scripts can generate trivially.
Unknown keys and unparseable values are reported with the offending key
named.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Any, Callable, Mapping

from .errors import ConfigError
from .pagetable import Backend


@dataclass(frozen=True)
class OptionSpec:
    name: str  # snake_case key (flag is --name with - for _)
    parse: Callable[[str], Any]
    default: Any
    env_var: str | None = None
    help: str = ""
    is_flag: bool = False  # boolean toggle

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")


def parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_sizes(text: str) -> list[int]:
    """``100..1000:100`` (inclusive range) or ``100,200,300`` (list), in MB."""
    text = text.strip()
    if ".." in text:
        span, _, step = text.partition(":")
        start_s, _, stop_s = span.partition("..")
        step_i = int(step) if step else 100
        start_i, stop_i = int(start_s), int(stop_s)
        if step_i < 1 or stop_i < start_i:
            raise ValueError(f"bad size range: {text!r}")
        return list(range(start_i, stop_i + 1, step_i))
    return [int(part) for part in text.split(",") if part.strip()]


def parse_backends(text: str) -> list[Backend]:
    backends = []
    for part in text.split(","):
        part = part.strip().lower()
        if not part:
            continue
        try:
            backends.append(Backend(part))
        except ValueError:
            raise ValueError(
                f"unknown backend {part!r} (choose from local, vfs, remote)"
            ) from None
    if not backends:
        raise ValueError("no backends given")
    return backends


_SIZE_SUFFIXES = {
    "kb": 10**3,
    "mb": 10**6,
    "gb": 10**9,
    "kib": 1 << 10,
    "mib": 1 << 20,
    "gib": 1 << 30,
}


def parse_byte_size(text: str) -> int:
    """Plain byte count, or with a KB/MB/GB (decimal) or KiB/MiB/GiB suffix."""
    text = text.strip().lower()
    for suffix, factor in sorted(_SIZE_SUFFIXES.items(), key=lambda x: -len(x[0])):
        if text.endswith(suffix):
            return int(float(text[: -len(suffix)]) * factor)
    return int(text)


def parse_byte_sizes(text: str) -> list[int]:
    return [parse_byte_size(part) for part in text.split(",") if part.strip()]


def read_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            values[key.strip()] = value.strip()
    return values


def merge_config(
    specs: list[OptionSpec],
    flag_values: Mapping[str, Any],
    env: Mapping[str, str] | None = None,
    file_values: Mapping[str, str] | None = None,
) -> dict[str, Any]:
    """Resolve each option at the highest-precedence layer that sets it.

    ``flag_values`` holds already-parsed values for flags the user passed;
    env and file layers hold raw strings that are parsed here. Unknown file
    keys are errors.
    """
    env = os.environ if env is None else env
    file_values = dict(file_values or {})
    known = {spec.name for spec in specs}
    for key in file_values:
        if key not in known:
            raise ConfigError(f"unknown config key: {key}")
    merged: dict[str, Any] = {}
    for spec in specs:
        if spec.name in flag_values:
            merged[spec.name] = flag_values[spec.name]
            continue
        if spec.env_var and spec.env_var in env:
            raw, layer = env[spec.env_var], f"environment {spec.env_var}"
        elif spec.name in file_values:
            raw, layer = file_values[spec.name], f"config key {spec.name}"
        else:
            merged[spec.name] = spec.default
            continue
        parser = parse_bool if spec.is_flag else spec.parse
        try:
            merged[spec.name] = parser(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {layer}: {raw!r} ({exc})") from None
    return merged
