"""Verification reports: named checks with residuals and pass/fail flags.

Structured form (``schema_version`` 1)::

    {
      "schema_version": 1,
      "overall_pass": true,
      "warnings": [],
      "checks": [
        {"check_id": ..., "anchor": ..., "residual": ..., "threshold": ...,
         "bound": "upper" | "lower", "passed": ..., "samples": ...,
         "wall_time": null | seconds},
        ...
      ]
    }

``bound == "upper"`` means the check passes when ``residual < threshold`` and
``residual`` is the maximum over samples; ``"lower"`` means it passes when
``residual > threshold`` and ``residual`` is the minimum over samples.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Optional

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Check:
    check_id: str
    anchor: str
    residual: float
    threshold: float
    bound: str = "upper"
    samples: int = 1
    wall_time: Optional[float] = None

    @property
    def passed(self) -> bool:
        if math.isnan(self.residual):
            return False
        if self.bound == "upper":
            return self.residual < self.threshold
        return self.residual > self.threshold

    def merge(self, other: "Check") -> "Check":
        """Associative merge of two runs of the same check over disjoint samples."""
        if (other.check_id, other.bound, other.threshold) != (self.check_id, self.bound, self.threshold):
            raise ValueError("can only merge runs of the same check")
        pick = max if self.bound == "upper" else min
        wt = None
        if self.wall_time is not None or other.wall_time is not None:
            wt = (self.wall_time or 0.0) + (other.wall_time or 0.0)
        return replace(self, residual=pick(self.residual, other.residual),
                       samples=self.samples + other.samples, wall_time=wt)

    def to_dict(self, timings: bool = True) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        d["residual"] = float(self.residual)
        if not timings:
            d["wall_time"] = None
        return d


def upper(check_id: str, anchor: str, values: Iterable[float], threshold: float) -> Check:
    """Check that every value stays below ``threshold``."""
    values = [float(v) for v in values]
    return Check(check_id, anchor, max(values, default=0.0), threshold, "upper", len(values))


def lower(check_id: str, anchor: str, values: Iterable[float], threshold: float) -> Check:
    """Check that every value stays above ``threshold``."""
    values = [float(v) for v in values]
    return Check(check_id, anchor, min(values, default=math.inf), threshold, "lower", len(values))


@dataclass
class VerificationReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def overall_pass(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, check: Check) -> None:
        self.checks.append(check)

    def extend(self, other: "VerificationReport") -> None:
        self.checks.extend(other.checks)

    def __getitem__(self, check_id: str) -> Check:
        for c in self.checks:
            if c.check_id == check_id:
                return c
        raise KeyError(check_id)

    def __contains__(self, check_id: str) -> bool:
        return any(c.check_id == check_id for c in self.checks)

    def without_timings(self) -> "VerificationReport":
        return VerificationReport([replace(c, wall_time=None) for c in self.checks])

    def to_dict(self, timings: bool = False) -> dict:
        warnings = [] if self.checks else ["empty report: no checks were run"]
        return {
            "schema_version": SCHEMA_VERSION,
            "overall_pass": self.overall_pass,
            "warnings": warnings,
            "checks": [c.to_dict(timings) for c in self.checks],
        }

    def to_json(self, timings: bool = False) -> str:
        return json.dumps(self.to_dict(timings), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = []
        for c in self.checks:
            op = "<" if c.bound == "upper" else ">"
            wt = "" if c.wall_time is None else f"  {c.wall_time:7.2f}s"
            lines.append(
                f"{'PASS' if c.passed else 'FAIL'}  {c.check_id:<40} {c.residual:11.3e} {op} "
                f"{c.threshold:8.1e}  n={c.samples:<4d} [{c.anchor}]{wt}"
            )
        if not self.checks:
            lines.append("WARNING  empty report: no checks were run")
        lines.append(f"overall: {'PASS' if self.overall_pass else 'FAIL'}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "VerificationReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {d.get('schema_version')!r}")
        checks = []
        for c in d["checks"]:
            checks.append(Check(c["check_id"], c["anchor"], float(c["residual"]), float(c["threshold"]),
                                c["bound"], int(c["samples"]), c["wall_time"]))
        return cls(checks)

    @classmethod
    def from_json(cls, text: str) -> "VerificationReport":
        return cls.from_dict(json.loads(text))
