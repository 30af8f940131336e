"""Gateway configuration: defaults, the key-value config file format, and
CLI overrides.

Config files are plain text, one `key = value` per line, '#' comments.
Keys mirror the config field names exactly; nested sections use dotted
keys (link.d_max_m, kinematics.track_width_m, render.width_px).
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field

from .kinematics import KinematicsParams
from .link import LinkProfile
from .video import RenderSettings
from .world import WorldMap


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GatewayConfig:
    listen_address: str = "127.0.0.1:8470"
    world_file: str | None = None  # None selects the built-in desk arena
    link: LinkProfile = field(default_factory=LinkProfile)
    kinematics: KinematicsParams = field(default_factory=KinematicsParams)
    render: RenderSettings = field(default_factory=RenderSettings)
    watchdog_timeout_s: float = 0.5
    tick_hz: float = 50.0
    telemetry_hz: float = 10.0
    mission_log: str | None = None
    debug_pose_in_telemetry: bool = False
    network_name: str = "Electro"
    auth_token: str | None = None
    ui_dir: str | None = None
    fast: bool = False
    run_for_s: float | None = None  # stop ticking at this sim time (None = forever)

    def __post_init__(self) -> None:
        if self.tick_hz < self.telemetry_hz:
            raise ConfigError(f"tick_hz {self.tick_hz} < telemetry_hz {self.telemetry_hz}")
        if self.watchdog_timeout_s <= 2.0 / self.telemetry_hz:
            raise ConfigError(
                f"watchdog_timeout_s {self.watchdog_timeout_s} must exceed "
                f"2/telemetry_hz = {2.0 / self.telemetry_hz}"
            )
        if 1.0 / self.tick_hz > 0.1:
            raise ConfigError(f"tick_hz {self.tick_hz} gives a step above 0.1 s")

    @property
    def listen_host(self) -> str:
        return self.listen_address.rsplit(":", 1)[0]

    @property
    def listen_port(self) -> int:
        return int(self.listen_address.rsplit(":", 1)[1])

    @property
    def ctl_port(self) -> int:
        # Raw-TCP control rides one port above HTTP; ephemeral stays ephemeral.
        return 0 if self.listen_port == 0 else self.listen_port + 1

    @property
    def tick_dt(self) -> float:
        return 1.0 / self.tick_hz


_SECTIONS = {"link": LinkProfile, "kinematics": KinematicsParams, "render": RenderSettings}

_BOOL_WORDS = {"true": True, "yes": True, "on": True, "1": True,
               "false": False, "no": False, "off": False, "0": False}


def _coerce(raw: str, typ, key: str):
    if typ is bool or typ == "bool":
        word = raw.lower()
        if word not in _BOOL_WORDS:
            raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
        return _BOOL_WORDS[word]
    if typ is int or typ == "int":
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    if typ is float or typ == "float":
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    return raw


def _field_types(cls) -> dict:
    return {f.name: f.type for f in dataclasses.fields(cls)}


def parse_config_text(text: str) -> GatewayConfig:
    top: dict = {}
    nested: dict[str, dict] = {name: {} for name in _SECTIONS}
    top_types = _field_types(GatewayConfig)
    for lineno, raw_line in enumerate(text.split("\n"), 1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if "." in key:
            section, _, sub = key.partition(".")
            if section not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section {section!r}")
            sec_types = _field_types(_SECTIONS[section])
            if sub not in sec_types:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            nested[section][sub] = _coerce(value, _normalize_type(sec_types[sub]), key)
        else:
            if key not in top_types or key in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if value in ("", "none", "None") and key in (
                    "world_file", "mission_log", "auth_token", "ui_dir", "run_for_s"):
                top[key] = None
            else:
                top[key] = _coerce(value, _normalize_type(top_types[key]), key)
    kwargs = dict(top)
    for name, cls in _SECTIONS.items():
        if nested[name]:
            kwargs[name] = cls(**nested[name])
    try:
        return GatewayConfig(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None


def _normalize_type(t):
    # dataclass fields under `from __future__ import annotations` carry
    # string annotations; map the ones the config file uses.
    if isinstance(t, str):
        if t.startswith("int"):
            return int
        if t.startswith("float") or t == "float | None":
            return float
        if t.startswith("bool"):
            return bool
        return str
    return t


def load_config(path: str) -> GatewayConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config_text(f.read())


def apply_overrides(cfg: GatewayConfig, *, world: str | None = None, seed: int | None = None,
                    port: int | None = None, fast: bool | None = None,
                    mission_log: str | None = None,
                    run_for_s: float | None = None) -> GatewayConfig:
    """CLI flags win over the config file."""
    changes: dict = {}
    if world is not None:
        changes["world_file"] = world
    if seed is not None:
        changes["link"] = dataclasses.replace(cfg.link, rng_seed=seed)
    if port is not None:
        changes["listen_address"] = f"{cfg.listen_host}:{port}"
    if fast:
        changes["fast"] = True
    if mission_log is not None:
        changes["mission_log"] = mission_log
    if run_for_s is not None:
        changes["run_for_s"] = run_for_s
    return dataclasses.replace(cfg, **changes) if changes else cfg


def header_detail(cfg: GatewayConfig, world: WorldMap, world_text: str) -> dict:
    """Mission header payload: simulation-semantic fields only, so logs from
    same-seed runs on different ports stay byte-identical."""
    return {
        "schema": "roversim-mission@1",
        "seed": cfg.link.rng_seed,
        "tick_hz": cfg.tick_hz,
        "telemetry_hz": cfg.telemetry_hz,
        "watchdog_timeout_s": cfg.watchdog_timeout_s,
        "network_name": cfg.network_name,
        "debug_pose_in_telemetry": cfg.debug_pose_in_telemetry,
        "kinematics": dataclasses.asdict(cfg.kinematics),
        "link": dataclasses.asdict(cfg.link),
        "render": dataclasses.asdict(cfg.render),
        "world": {
            "file": cfg.world_file,
            "sha256": hashlib.sha256(world_text.encode("utf-8")).hexdigest(),
            "width_cells": world.width_cells,
            "height_cells": world.height_cells,
            "cell_size_m": world.cell_size_m,
            "base_station": list(world.base_station),
        },
    }
