"""Flat key-value run configuration files.

The on-disk form is a TOML-compatible subset: one ``key = value`` per line,
``#`` comments, no sections.  Unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .optim import OptimizerConfig
from .state import PhysicalParams


class ConfigError(Exception):
    """Invalid run configuration; the message names the offending key."""


_FLOAT_KEYS = ("re", "pr", "gr", "alpha", "lambda1", "lambda2", "lambda3",
               "nu", "tau", "h", "stop_tol")
_INT_KEYS = ("curve_n", "max_iters", "case", "snapshot_stride")
_STR_KEYS = ("out_dir",)
KNOWN_KEYS = _FLOAT_KEYS + _INT_KEYS + _STR_KEYS

_POSITIVE = ("re", "pr", "gr", "tau", "h", "stop_tol", "curve_n",
             "max_iters", "snapshot_stride")

DEFAULTS = {
    "re": 1.0, "pr": 0.7, "gr": 1.0, "alpha": 10.0,
    "lambda1": 0.5, "lambda2": 1.5e4, "lambda3": 1e3, "nu": 0.1,
    "tau": 1e-3, "h": 0.03, "curve_n": None, "max_iters": 1000,
    "stop_tol": 1e-7, "case": None, "out_dir": None, "snapshot_stride": 100,
}


@dataclass
class RunConfig:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def optimizer_config(self) -> OptimizerConfig:
        v = self.values
        return OptimizerConfig(
            physical=PhysicalParams(re=v["re"], pr=v["pr"], gr=v["gr"], alpha=v["alpha"]),
            lam1=v["lambda1"], lam2=v["lambda2"], lam3=v["lambda3"], nu=v["nu"],
            tau=v["tau"], h=v["h"], curve_n=v["curve_n"],
            max_iters=v["max_iters"], stop_tol=v["stop_tol"],
            snapshot_stride=v["snapshot_stride"],
        )


def _convert(key: str, raw: str):
    raw = raw.strip().strip('"').strip("'")
    try:
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _INT_KEYS:
            return int(raw)
        return raw
    except ValueError as err:
        raise ConfigError(f"key '{key}': cannot parse value {raw!r}") from err


def validate(values: dict) -> dict:
    for key, val in values.items():
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown key '{key}'")
        if val is None:
            continue
        if key in _POSITIVE and val <= 0:
            raise ConfigError(f"key '{key}': must be positive, got {val}")
    if values.get("nu") is not None and not 0.0 < values["nu"] < 1.0:
        raise ConfigError(f"key 'nu': must lie in (0, 1), got {values['nu']}")
    if values.get("case") is not None and values["case"] not in (1, 2, 3, 4, 5):
        raise ConfigError(f"key 'case': must be 1..5, got {values['case']}")
    if values.get("h") is not None and values["h"] > 0.5:
        raise ConfigError(f"key 'h': must lie in (0, 0.5], got {values['h']}")
    return values


def parse(text: str) -> RunConfig:
    values = dict(DEFAULTS)
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown key '{key}' (line {lineno})")
        values[key] = _convert(key, raw)
    return RunConfig(validate(values))


def read(path) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as f:
        return parse(f.read())


def serialize(cfg: RunConfig) -> str:
    lines = []
    for key in KNOWN_KEYS:
        val = cfg.values.get(key)
        if val is None:
            continue
        if isinstance(val, str):
            lines.append(f'{key} = "{val}"')
        else:
            lines.append(f"{key} = {val!r}")
    return "\n".join(lines) + "\n"


def write(cfg: RunConfig, path) -> None:
    with open(path, "w") as f:
        f.write(serialize(cfg))
