"""Server configuration: one JSON file, environment overrides, CLI flags.

Precedence (lowest to highest): defaults, config file, STORYPAD_*
environment variables, command-line flags.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path


@dataclass
class ServerConfig:
    data_dir: str = "./storypad-data"
    base_url: str = "http://127.0.0.1:8400"
    bind_host: str = "127.0.0.1"
    bind_port: int = 8400
    snapshot_interval: int = 100
    rebase_window: int = 1000
    template_path: str | None = None  # headline catalog; None = packaged default
    rules_path: str | None = None  # media rule table; None = packaged default
    static_dir: str | None = None  # built web client, served at /static
    notifications_path: str | None = None  # None = {data_dir}/notifications.jsonl
    fsync: bool = True
    queue_depth: int = 256  # outbound frames per session before disconnect

    @classmethod
    def load(cls, config_path: str | None = None, env: dict | None = None, **overrides) -> "ServerConfig":
        values: dict = {}
        if config_path:
            values.update(json.loads(Path(config_path).read_text("utf-8")))
        environ = env if env is not None else os.environ
        for f in fields(cls):
            key = f"STORYPAD_{f.name.upper()}"
            if key in environ:
                raw = environ[key]
                if f.type in ("int", int):
                    values[f.name] = int(raw)
                elif f.type in ("bool", bool):
                    values[f.name] = raw.lower() in ("1", "true", "yes", "on")
                else:
                    values[f.name] = raw
        for k, v in overrides.items():
            if v is not None:
                values[k] = v
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values)

    @property
    def bind(self) -> str:
        return f"{self.bind_host}:{self.bind_port}"
