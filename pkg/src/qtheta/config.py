"""Run configuration for the command-line front end.

Parameters arrive as ``key=value`` pairs, either on the command line or in
a plain-text file with one pair per line (``#`` starts a comment).  Values
are arithmetic expressions in numbers and the token ``pi``.
"""
from __future__ import annotations

import ast
import math
import operator
import os
from dataclasses import dataclass, field

from .errors import QThetaError
from .kernels import MIN_GRID, GridSpec

EXAMPLES = ("sklyanin", "su11-v1", "su11-v2")
PARAM_KEYS = ("phi", "kappa1", "psi", "a0", "a", "hbar", "tau", "alpha", "N", "M")
INT_KEYS = ("N", "M")
THREADS_ENV = "QTHETA_THREADS"

DEFAULTS = {
    "sklyanin": {"phi": math.pi / 2, "kappa1": 1.0, "psi": 0.0, "a0": 2.0, "alpha": 0.0, "tau": 1.0,
                 "hbar": 1.0, "M": 32},
    "su11-v1": {"a0": 1.25, "a": 0.0, "hbar": 1.0, "tau": 1.0, "M": 64},
    "su11-v2": {"a0": 2.0, "a": 0.7, "hbar": 0.5, "tau": 1.0, "M": 64},
}

# keys each example understands; anything else is a usage error
EXAMPLE_KEYS = {
    "sklyanin": {"phi", "kappa1", "psi", "a0", "alpha", "tau", "hbar", "N", "M"},
    "su11-v1": {"a0", "a", "hbar", "tau", "M"},
    "su11-v2": {"a0", "a", "hbar", "tau", "M"},
}


class ConfigError(QThetaError, ValueError):
    """Malformed or inconsistent run configuration (exit code 2)."""


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def parse_value(text: str) -> float:
    """Evaluate an arithmetic expression such as ``pi/2`` or ``2*pi/3`` without ``eval``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        raise ConfigError(f"unsupported expression {text!r}")

    try:
        value = ev(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ZeroDivisionError, OverflowError) as exc:
        raise ConfigError(f"cannot parse value {text!r}: {exc}") from None
    if not math.isfinite(value):
        raise ConfigError(f"value {text!r} is not finite")
    return value


def _pairs(text: str, what: str) -> list[tuple[str, str]]:
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        key, sep, value = item.partition("=")
        if not sep or not key.strip() or not value.strip():
            raise ConfigError(f"malformed {what} entry {item!r}; expected key=value")
        out.append((key.strip(), value.strip()))
    return out


def _typed(key: str, value: float) -> float | int:
    if key in INT_KEYS:
        if value != int(value):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return int(value)
    return value


def parse_params(text: str) -> dict[str, float | int]:
    """``"phi=pi/2,a0=2"`` to a dict; unknown keys are rejected."""
    params: dict[str, float | int] = {}
    for key, value in _pairs(text, "params"):
        if key not in PARAM_KEYS:
            raise ConfigError(f"unknown parameter {key!r}; allowed: {', '.join(PARAM_KEYS)}")
        params[key] = _typed(key, parse_value(value))
    return params


def read_param_file(path: str) -> dict[str, float | int]:
    """Parameters from a ``key=value`` text file."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc.strerror}") from None
    items = [ln.split("#", 1)[0].strip() for ln in lines]
    return parse_params(",".join(x for x in items if x))


def parse_tolerances(text: str) -> dict[str, float]:
    tols = {}
    for key, value in _pairs(text, "tol"):
        v = parse_value(value)
        if not v > 0:
            raise ConfigError(f"tolerance for {key!r} must be positive")
        tols[key] = v
    return tols


def parse_grid(text: str) -> GridSpec:
    """``"nu,nv,umin,umax"`` to a :class:`GridSpec`."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise ConfigError("--grid expects nu,nv,umin,umax")
    n_u, n_v = parse_value(parts[0]), parse_value(parts[1])
    if n_u != int(n_u) or n_v != int(n_v):
        raise ConfigError("grid sizes must be integers")
    if min(n_u, n_v) < MIN_GRID:
        raise ConfigError(f"grid sizes must be at least {MIN_GRID}")
    u_min, u_max = parse_value(parts[2]), parse_value(parts[3])
    if not u_max > u_min:
        raise ConfigError("grid needs umax > umin")
    return GridSpec(u_min, u_max, int(n_u), int(n_v))


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


@dataclass
class RunConfig:
    example: str
    params: dict = field(default_factory=dict)
    grid: GridSpec | None = None
    tolerances: dict = field(default_factory=dict)
    out: str | None = None
    format: str = "report"
    threads: int = 1

    def __post_init__(self):
        if self.example not in EXAMPLES:
            raise ConfigError(f"unknown example {self.example!r}; choose from {', '.join(EXAMPLES)}")
        extra = set(self.params) - EXAMPLE_KEYS[self.example]
        if extra:
            raise ConfigError(f"parameters {sorted(extra)} do not apply to example {self.example!r}")
        if any(not v > 0 for v in self.tolerances.values()):
            raise ConfigError("all tolerances must be positive")
        if self.format not in ("csv", "report"):
            raise ConfigError("format must be csv or report")
        if self.threads < 1:
            raise ConfigError("threads must be positive")
        merged = dict(DEFAULTS[self.example])
        merged.update(self.params)
        self.params = merged
        for key in ("tau", "hbar", "kappa1"):
            if key in self.params and not self.params[key] > 0:
                raise ConfigError(f"{key} must be positive")
        if self.example == "sklyanin" and self.params["hbar"] != 1.0:
            raise ConfigError("the Sklyanin flow is defined with hbar = 1")
        if self.params.get("M", 8) < 8:
            raise ConfigError("M must be at least 8")
        if "N" in self.params and self.params["N"] < 2:
            raise ConfigError("N must be at least 2")

    def tol(self, check: str, default: float) -> float:
        return self.tolerances.get(check, default)
