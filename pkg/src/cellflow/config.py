"""Runtime configuration merged from flags > environment > TOML file.

Unknown keys in the config file are rejected outright; silently ignoring a
typo in a scientific parameter is worse than failing at startup.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .diffusion import SCHEDULE_KINDS
from .errors import CellflowError
from .flow import FlowParams
from .patches import PatchSpec

ENV_CONFIG = "CELLFLOW_CONFIG"
ENV_PORT = "CELLFLOW_PORT"

DEFAULT_PORT = 8571


class ConfigError(CellflowError):
    """Bad configuration file or setting."""


@dataclass
class Config:
    flow: FlowParams
    patches: PatchSpec
    schedule_kind: str = "cosine"
    schedule_steps: int = 1000
    px_per_micron: float = 1.1939
    contrast_cutoff: float = 0.04
    port: int = DEFAULT_PORT


_SECTIONS = {
    "flow": {"brightness_weight": float, "iterations": int},
    "patches": {
        "patch_size": int,
        "overlap_fraction": float,
        "frame_count": int,
        "frame_stride": int,
    },
    "diffusion": {"kind": str, "steps": int},
    "stats": {"px_per_micron": float, "contrast_cutoff": float},
    "serve": {"port": int},
}


def _coerce(section: str, key: str, value, expected):
    if expected is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if expected is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if expected is str and isinstance(value, str):
        return value
    raise ConfigError(
        f"[{section}] {key} must be {expected.__name__}, got {type(value).__name__}"
    )


def _parse_file(path: Path) -> dict:
    try:
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    settings: dict = {}
    for section, table in doc.items():
        if section not in _SECTIONS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        if not isinstance(table, dict):
            raise ConfigError(f"{path}: [{section}] must be a table")
        for key, value in table.items():
            if key not in _SECTIONS[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            settings[(section, key)] = _coerce(section, key, value, _SECTIONS[section][key])
    return settings


def load_config(path: str | None = None, env: dict | None = None,
                overrides: dict | None = None) -> Config:
    """Build the validated Config.

    ``path`` (or, failing that, the CELLFLOW_CONFIG environment variable)
    names an optional TOML file.  ``overrides`` holds (section, key) pairs
    from command-line flags; they win over CELLFLOW_PORT, which wins over
    the file.
    """
    env = os.environ if env is None else env
    settings: dict = {}

    file_path = path or env.get(ENV_CONFIG)
    if file_path:
        p = Path(file_path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        settings.update(_parse_file(p))

    if env.get(ENV_PORT):
        try:
            settings[("serve", "port")] = int(env[ENV_PORT])
        except ValueError as exc:
            raise ConfigError(f"{ENV_PORT} must be an integer, got {env[ENV_PORT]!r}") from exc

    for (section, key), value in (overrides or {}).items():
        if section not in _SECTIONS or key not in _SECTIONS[section]:
            raise ConfigError(f"unknown setting [{section}] {key}")
        settings[(section, key)] = _coerce(section, key, value, _SECTIONS[section][key])

    def get(section, key, default):
        return settings.get((section, key), default)

    try:
        flow = FlowParams(
            brightness_weight=get("flow", "brightness_weight", 1.0),
            iterations=get("flow", "iterations", 10),
        )
        patches = PatchSpec(
            patch_size=get("patches", "patch_size", 128),
            overlap_fraction=get("patches", "overlap_fraction", 0.25),
            frame_count=get("patches", "frame_count", 10),
            frame_stride=get("patches", "frame_stride", 1),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    kind = get("diffusion", "kind", "cosine")
    if kind not in SCHEDULE_KINDS:
        raise ConfigError(f"[diffusion] kind must be one of {SCHEDULE_KINDS}, got {kind!r}")
    steps = get("diffusion", "steps", 1000)
    if steps < 1:
        raise ConfigError(f"[diffusion] steps must be >= 1, got {steps}")
    ppm = get("stats", "px_per_micron", 1.1939)
    if not ppm > 0:
        raise ConfigError(f"[stats] px_per_micron must be > 0, got {ppm}")
    cutoff = get("stats", "contrast_cutoff", 0.04)
    if not 0 < cutoff < 1:
        raise ConfigError(f"[stats] contrast_cutoff must be in (0, 1), got {cutoff}")
    port = get("serve", "port", DEFAULT_PORT)
    if not 0 < port < 65536:
        raise ConfigError(f"[serve] port must be in 1..65535, got {port}")

    return Config(
        flow=flow,
        patches=patches,
        schedule_kind=kind,
        schedule_steps=steps,
        px_per_micron=ppm,
        contrast_cutoff=cutoff,
        port=port,
    )
