"""Run configuration: a flat key=value INI file with a schema version,
validated before any computation and echoed into every output directory."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, asdict

import numpy as np

SCHEMA_VERSION = 1


@dataclass
class RunConfig:
    scenario: str = "euclid_son"
    size: int = 3
    x0: tuple = ()            # empty means the scenario default
    T: float = 1.0
    dt: float = 1e-3
    n_paths: int = 100
    jump_family: str = ""      # empty means no jumps
    jump_rate: float = 0.0
    jump_angle: float = np.pi / 2
    jump_scale: float = 0.5
    n_grid: int = 25
    jump_threshold: float = 0.0  # 0 means the automatic rule
    seed: int = 0
    threads: int = 0           # 0 means hardware default
    out_dir: str = "out"
    experiment: str = ""
    scale: float = 1.0         # ensemble scale factor for quick runs
    format: str = "csv"

    def validate(self) -> "RunConfig":
        if self.T < 0:
            raise ValueError("T must be nonnegative")
        if not 0 < self.dt <= 1e-2:
            raise ValueError("dt must be in (0, 1e-2]")
        if self.n_paths < 1:
            raise ValueError("n_paths must be positive")
        if self.jump_rate < 0:
            raise ValueError("jump_rate must be nonnegative")
        if self.n_grid < 1:
            raise ValueError("n_grid must be positive")
        if self.jump_threshold < 0:
            raise ValueError("jump_threshold must be nonnegative")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.format not in ("csv", "bin"):
            raise ValueError("format must be csv or bin")
        return self


def write_config(cfg: RunConfig, path: str) -> None:
    cp = configparser.ConfigParser()
    cp["run"] = {"schema_version": str(SCHEMA_VERSION)}
    for key, value in asdict(cfg).items():
        if key == "x0":
            cp["run"][key] = ",".join(repr(float(v)) for v in value)
        else:
            cp["run"][key] = repr(value) if isinstance(value, float) else str(value)
    with open(path, "w") as fh:
        cp.write(fh)


def read_config(path: str) -> RunConfig:
    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)
    run = cp["run"]
    version = int(run.get("schema_version", "1"))
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported config schema version {version}")
    cfg = RunConfig()
    for key in asdict(cfg):
        if key not in run:
            continue
        raw = run[key]
        current = getattr(cfg, key)
        if key == "x0":
            setattr(cfg, key, tuple(float(v) for v in raw.split(",") if v))
        elif isinstance(current, bool):
            setattr(cfg, key, raw.lower() in ("1", "true", "yes"))
        elif isinstance(current, int):
            setattr(cfg, key, int(raw))
        elif isinstance(current, float):
            setattr(cfg, key, float(raw))
        else:
            setattr(cfg, key, raw)
    return cfg.validate()
