"""Structured check records.

A :class:`CheckReport` is serialized as one JSON object per line with the
fixed key set ``check_name, residual, tolerance, pass, params``.  Floats are
written with 17 significant digits so that reports diff cleanly in CI.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable

REPORT_FIELDS = ("check_name", "residual", "tolerance", "pass", "params")


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _encode(value: Any) -> str:
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return _fmt_float(value)
    if hasattr(value, "item") and not isinstance(value, (list, tuple, dict)):
        return _encode(value.item())
    if isinstance(value, complex):
        return "[" + _fmt_float(value.real) + ", " + _fmt_float(value.imag) + "]"
    if isinstance(value, dict):
        items = (json.dumps(str(k)) + ": " + _encode(v) for k, v in sorted(value.items()))
        return "{" + ", ".join(items) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in value) + "]"
    return json.dumps(str(value))


@dataclass
class CheckReport:
    """Outcome of one named identity check."""

    check_name: str
    residual: float
    tolerance: float
    passed: bool = field(default=None)  # type: ignore[assignment]
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.residual = float(self.residual)
        self.tolerance = float(self.tolerance)
        if self.passed is None:
            self.passed = bool(self.residual < self.tolerance)

    def to_record(self) -> str:
        """Serialize as a single line with the fixed field set."""
        parts = [
            '"check_name": ' + json.dumps(self.check_name),
            '"residual": ' + _fmt_float(self.residual),
            '"tolerance": ' + _fmt_float(self.tolerance),
            '"pass": ' + json.dumps(bool(self.passed)),
            '"params": ' + _encode(self.params),
        ]
        return "{" + ", ".join(parts) + "}"

    @classmethod
    def from_record(cls, line: str) -> "CheckReport":
        data = json.loads(line)
        if tuple(data) != REPORT_FIELDS:
            raise ValueError(f"unexpected report fields {tuple(data)}")
        return cls(data["check_name"], float(data["residual"]), float(data["tolerance"]),
                   bool(data["pass"]), data["params"])

    def __str__(self):
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.check_name}: residual={self.residual:.3e} tol={self.tolerance:.1e}"


def combine(name: str, reports: Iterable[CheckReport], tolerance: float | None = None,
            **params) -> CheckReport:
    """Max-reduce several reports into one."""
    reports = list(reports)
    residuals = [r.residual for r in reports]
    # builtin max drops NaN depending on position; a NaN component must surface
    residual = math.nan if any(math.isnan(x) for x in residuals) else max(residuals, default=0.0)
    tol = tolerance if tolerance is not None else min(r.tolerance for r in reports)
    passed = all(r.passed for r in reports) and residual < tol
    sub = {r.check_name: r.residual for r in reports}
    return CheckReport(name, residual, tol, passed, {**params, "components": sub})


def write_reports(reports: Iterable[CheckReport], stream) -> None:
    for r in reports:
        stream.write(r.to_record() + "\n")
