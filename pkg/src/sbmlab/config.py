"""Run configuration: JSON files validated into a RunConfig."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace

from .errors import ConfigError, DomainError
from .exponents import LaplaceExponentSpec, spec_from_dict
from .heatkernel import EnvelopeConfig

COMMANDS = ("phi-table", "scaling", "tails", "kernel", "verify", "green", "blowup")

_DEFAULTS = {
    "phi-table": {"lambda_range": (1e-4, 1e6), "n_lambda": 41},
    "scaling": {"lambda_range": (1.0, 1e6), "n_lambda": 80},
    "tails": {"t_range": (1e-3, 1e-1), "n_t": 5, "r_range": (1e-2, 1.0), "n_r": 5},
    "kernel": {"t_range": (1e-3, 1.0), "n_t": 12, "r_range": (1e-2, 10.0), "n_r": 12},
    "verify": {"t_range": (1e-3, 1.0), "n_t": 12, "r_range": (1e-2, 10.0), "n_r": 12},
    "green": {"r_range": (1e-2, 1e2), "n_r": 5},
    "blowup": {},
}

_KEYS = {
    "command", "spec", "d", "seed", "out", "t_range", "n_t", "r_range", "n_r", "lambda_range",
    "n_lambda", "envelope", "epsilon", "n_samples", "estimator", "monte_carlo", "t", "r_sequence", "all",
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    spec: LaplaceExponentSpec | None = None
    d: int = 1
    seed: int = 0
    out: str = "out"
    t_range: tuple = (1e-3, 1.0)
    n_t: int = 12
    r_range: tuple = (1e-2, 10.0)
    n_r: int = 12
    lambda_range: tuple = (1.0, 1e6)
    n_lambda: int = 80
    envelope: EnvelopeConfig = field(default_factory=EnvelopeConfig)
    epsilon: float = 0.5
    n_samples: int = 10_000
    estimator: str = "auto"
    monte_carlo: bool = False
    t: float = 1.0
    r_sequence: tuple = (0.2, 0.1, 0.05, 0.025)
    all: bool = False

    def override(self, **flags):
        """Copy with command-line flags applied (None means not given)."""
        given = {k: v for k, v in flags.items() if v is not None}
        if not given:
            return self
        cfg = replace(self, **given)
        _validate(cfg)
        return cfg


def _line_of(text, key):
    """1-based line of the first occurrence of "key" in the raw file, or None."""
    if text is None:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _err(msg, text=None, key=None, path=None):
    line = _line_of(text, key) if key else None
    where = f"{path}:{line}: " if path and line else (f"{path}: " if path else "")
    return ConfigError(where + msg)


def _range(value, name):
    if not (isinstance(value, (list, tuple)) and len(value) == 2):
        raise ConfigError(f"{name} must be a pair [low, high]")
    lo, hi = (float(v) for v in value)
    if not 0 < lo < hi:
        raise ConfigError(f"{name} must satisfy 0 < low < high")
    return (lo, hi)


def _count(value, name):
    if isinstance(value, bool) or not isinstance(value, int) or value < 2:
        raise ConfigError(f"{name} must be an integer >= 2")
    return value


def _validate(cfg):
    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}; expected one of {', '.join(COMMANDS)}")
    if cfg.spec is None and not (cfg.command == "verify" and cfg.all):
        raise ConfigError(f"command {cfg.command!r} needs a spec")
    if cfg.d < 1:
        raise ConfigError("d must be >= 1")
    if cfg.estimator not in ("auto", "fourier", "subordinate"):
        raise ConfigError("estimator must be auto, fourier or subordinate")


def config_from_dict(data, text=None, path=None):
    """Validate a mapping into a RunConfig; unknown keys are rejected."""
    if not isinstance(data, dict):
        raise _err("config must be a JSON object", path=path)
    unknown = sorted(set(data) - _KEYS)
    if unknown:
        raise _err(f"unknown keys: {unknown}", text, unknown[0], path)
    if "command" not in data:
        raise _err("missing 'command'", path=path)
    command = data["command"]
    kw = {"command": command, **_DEFAULTS.get(command, {})}
    current = None
    try:
        for key, value in data.items():
            current = key
            if key == "command":
                continue
            if key == "spec":
                kw["spec"] = spec_from_dict(value)
            elif key in ("t_range", "r_range", "lambda_range"):
                kw[key] = _range(value, key)
            elif key in ("n_t", "n_r", "n_lambda"):
                kw[key] = _count(value, key)
            elif key in ("d", "seed", "n_samples"):
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ConfigError(f"{key} must be an integer")
                kw[key] = value
            elif key == "envelope":
                if not isinstance(value, dict):
                    raise ConfigError("envelope must be an object")
                extra = sorted(set(value) - {"a_L", "a_U", "C", "kappa", "eta", "theta"})
                if extra:
                    raise ConfigError(f"unknown envelope keys: {extra}")
                kw[key] = EnvelopeConfig(**{k: float(v) for k, v in value.items()})
            elif key in ("epsilon", "t"):
                kw[key] = float(value)
            elif key == "r_sequence":
                kw[key] = tuple(float(v) for v in value)
            elif key in ("monte_carlo", "all"):
                if not isinstance(value, bool):
                    raise ConfigError(f"{key} must be true or false")
                kw[key] = value
            else:
                kw[key] = value
        current = "command"
        cfg = RunConfig(**kw)
        _validate(cfg)
    except (ConfigError, DomainError, TypeError, ValueError) as exc:
        raise _err(str(exc), text, current, path) from exc
    return cfg


def load_config(path):
    """Read and validate a JSON run configuration."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from exc
    return config_from_dict(data, text, path)
