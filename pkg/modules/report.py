"""
RunReport assembly and rendering.

The JSON form is canonical (see documents.canonical_json) so identical
inputs give byte-identical reports. Pretty output is for terminals and
honours NO_COLOR.
"""
import hashlib
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from modules.documents import canonical_json

logger = logging.getLogger(__name__)

_GREEN = "\033[32m"
_RED = "\033[31m"
_YELLOW = "\033[33m"
_BOLD = "\033[1m"
_RESET = "\033[0m"


def input_digest(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


@dataclass
class RunReport:
    command: str
    seed: int
    tol: float
    input_sha256: Optional[str] = None
    input_name: Optional[str] = None
    sections: dict[str, Any] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)
    error: Optional[dict] = None
    exit_code: int = 0
    timings: Optional[dict[str, float]] = None

    @property
    def status(self) -> str:
        return {0: "pass", 1: "fail"}.get(self.exit_code, "error")

    def fail(self, reason: str):
        self.failures.append(reason)
        self.exit_code = max(self.exit_code, 1)

    def non_certified(self, reason: str):
        """A solver ran but could not produce a certificate."""
        self.failures.append(reason)
        self.exit_code = max(self.exit_code, 2)

    def record_error(self, exc: Exception, exit_code: int):
        self.error = {"type": type(exc).__name__, "message": str(exc)}
        diagnosis = getattr(exc, "diagnosis", None)
        if diagnosis:
            self.error["diagnosis"] = diagnosis
        self.exit_code = max(self.exit_code, exit_code)

    def merge(self, other: "RunReport"):
        self.sections.update(other.sections)
        self.failures.extend(other.failures)
        self.exit_code = max(self.exit_code, other.exit_code)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "command": self.command,
            "status": self.status,
            "exit_code": self.exit_code,
            "seed": self.seed,
            "tol": self.tol,
            "input": {"sha256": self.input_sha256, "name": self.input_name},
            "failures": list(self.failures),
        }
        out.update(self.sections)
        if self.error is not None:
            out["error"] = self.error
        if self.timings is not None:
            out["timings"] = dict(self.timings)
        return out

    def to_json(self) -> str:
        return canonical_json(_finite(self.to_dict()))


def _finite(value: Any) -> Any:
    """Plain Python values; non-finite floats become None."""
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    return value


# ── Pretty rendering ──────────────────────────────────────────

def use_color(stream) -> bool:
    if "NO_COLOR" in os.environ:
        return False
    return bool(getattr(stream, "isatty", lambda: False)())


def _paint(text: str, code: str, color: bool) -> str:
    return f"{code}{text}{_RESET}" if color else text


def _format_value(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, list) and value and all(isinstance(v, (int, float)) for v in value):
        side = math.isqrt(len(value))
        if side * side == len(value) and side > 1:
            rows = [value[i * side:(i + 1) * side] for i in range(side)]
            return "\n" + "\n".join("      [" + ", ".join(f"{v: .6f}" for v in r) + "]" for r in rows)
        return "[" + ", ".join(_format_value(v) for v in value) + "]"
    return str(value)


def _render_section(name: str, body: Any, color: bool, lines: list[str], indent: str = "  "):
    if isinstance(body, dict):
        lines.append(f"{indent}{_paint(name, _BOLD, color)}:")
        for key in sorted(body):
            value = body[key]
            if isinstance(value, dict):
                _render_section(key, value, color, lines, indent + "  ")
            elif isinstance(value, list) and value and isinstance(value[0], (dict, list)):
                lines.append(f"{indent}  {key}: {len(value)} entries")
            else:
                lines.append(f"{indent}  {key}: {_format_value(value)}")
    else:
        lines.append(f"{indent}{name}: {_format_value(body)}")


def render_pretty(report: RunReport, color: bool = False) -> str:
    status_color = {"pass": _GREEN, "fail": _RED}.get(report.status, _YELLOW)
    lines = [
        f"{_paint('orbitcert ' + report.command, _BOLD, color)}"
        f"  [{_paint(report.status.upper(), status_color, color)}]  exit {report.exit_code}",
        f"  input: {report.input_name or '-'}  sha256 {(report.input_sha256 or '-')[:16]}",
        f"  seed {report.seed}  tol {report.tol:g}",
    ]
    for name, body in _finite(report.sections).items():
        _render_section(name, body, color, lines)
    for reason in report.failures:
        lines.append("  " + _paint(f"FAILED: {reason}", _RED, color))
    if report.error:
        lines.append("  " + _paint(f"ERROR {report.error.get('type')}: {report.error.get('message')}", _YELLOW, color))
    if report.timings:
        lines.append("  timings: " + ", ".join(f"{k} {v:.3f}s" for k, v in report.timings.items()))
    return "\n".join(lines) + "\n"
