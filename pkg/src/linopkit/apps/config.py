"""Benchmark run configuration: defaults, config files, flag overrides.

A config file is flat ``key=value`` text; keys are the long flag names with
the dashes removed (``maxiters``, ``reductionfactor``, and so on).  Values
given on the command line win over the file, which wins over the defaults.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, ParseError
from ..executor import EXECUTOR_NAMES
from ..facade import VALID_ALGORITHMS, VALID_PRECONDITIONERS

#: config-file key -> RunConfig field
FILE_KEYS = {
    "backend": "backend",
    "matrix": "matrix",
    "solver": "solver",
    "preconditioner": "preconditioner",
    "maxiters": "max_iters",
    "reductionfactor": "reduction_factor",
    "restart": "restart",
    "rhs": "rhs",
    "output": "output",
}

_INT_FIELDS = ("max_iters", "restart")
_FLOAT_FIELDS = ("reduction_factor",)


@dataclass
class RunConfig:
    backend: str = "reference"
    matrix: str | None = None
    solver: str = "cg"
    preconditioner: str = "none"
    max_iters: int = 1000
    reduction_factor: float = 1e-10
    restart: int = 30
    rhs: str = "ones"
    output: str | None = None


def load_config_file(path) -> dict:
    """Read a key=value file into a field dict, rejecting unknown keys."""
    raw = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ParseError(f"expected key=value, got '{stripped}'", line_number=lineno)
            key, _, value = stripped.partition("=")
            key = key.strip()
            if key not in FILE_KEYS:
                raise ConfigurationError(f"unknown config key '{key}'")
            raw[FILE_KEYS[key]] = value.strip()
    return raw


def build_run_config(flags: dict, config_path=None) -> RunConfig:
    """Merge defaults, an optional config file, and explicit flags.

    ``flags`` maps RunConfig field names to values, with None meaning the
    flag was not given.
    """
    cfg = RunConfig()
    merged = {}
    if config_path is not None:
        merged.update(load_config_file(config_path))
    for field, value in flags.items():
        if value is not None:
            merged[field] = value
    for field, value in merged.items():
        if field in _INT_FIELDS and not isinstance(value, int):
            try:
                value = int(value)
            except ValueError:
                raise ConfigurationError(f"{field} must be an integer, got '{value}'")
        if field in _FLOAT_FIELDS and not isinstance(value, float):
            try:
                value = float(value)
            except ValueError:
                raise ConfigurationError(f"{field} must be a number, got '{value}'")
        setattr(cfg, field, value)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.backend not in EXECUTOR_NAMES:
        valid = ", ".join(sorted(EXECUTOR_NAMES))
        raise ConfigurationError(f"unknown backend '{cfg.backend}'; valid backends: {valid}")
    if cfg.solver not in VALID_ALGORITHMS:
        raise ConfigurationError(
            f"unknown solver '{cfg.solver}'; valid: {', '.join(VALID_ALGORITHMS)}"
        )
    if cfg.preconditioner not in VALID_PRECONDITIONERS:
        raise ConfigurationError(
            f"unknown preconditioner '{cfg.preconditioner}'; "
            f"valid: {', '.join(VALID_PRECONDITIONERS)}"
        )
    if cfg.matrix is None:
        raise ConfigurationError("no matrix file given (use --matrix or a config file)")
    if cfg.max_iters < 1:
        raise ConfigurationError(f"max_iters must be >= 1, got {cfg.max_iters}")
    if not cfg.reduction_factor > 0:
        raise ConfigurationError(f"reduction_factor must be > 0, got {cfg.reduction_factor}")
    if cfg.restart < 1:
        raise ConfigurationError(f"restart must be >= 1, got {cfg.restart}")
    parse_rhs_spec(cfg.rhs)


def parse_rhs_spec(spec: str):
    """Split an rhs spec into its kind: ones | random(seed) | file path."""
    if spec == "ones":
        return ("ones", None)
    if spec.startswith("random(") and spec.endswith(")"):
        inner = spec[len("random(") : -1]
        try:
            seed = int(inner)
        except ValueError:
            raise ConfigurationError(f"rhs random() needs an integer seed, got '{inner}'")
        return ("random", seed)
    if spec.startswith("random"):
        raise ConfigurationError(f"malformed rhs spec '{spec}'; use random(<seed>)")
    return ("file", spec)


# 64-bit linear congruential generator used for rhs "random(seed)".  Chosen
# for bit-exact reproducibility across platforms and trivial reimplementation:
#   state_{j+1} = (6364136223846793005 * state_j + 1442695040888963407) mod 2^64
# starting from state_0 = seed; draw j is (state_{j+1} >> 11) / 2^53 in [0, 1).
LCG_MULTIPLIER = 6364136223846793005
LCG_INCREMENT = 1442695040888963407
_MASK64 = (1 << 64) - 1


def lcg_uniform(seed: int, count: int) -> np.ndarray:
    out = np.empty(count)
    state = seed & _MASK64
    for i in range(count):
        state = (LCG_MULTIPLIER * state + LCG_INCREMENT) & _MASK64
        out[i] = (state >> 11) * 2.0**-53
    return out
