"""Residual reports shared by the cumulant checks, verification suites and CLI."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any

__all__ = ["ResidualReport"]


@dataclass(frozen=True)
class ResidualReport:
    check: str
    residual: float
    tolerance: float
    params: dict[str, Any] = field(default_factory=dict)
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if math.isnan(self.residual) or self.residual < 0:
            raise ValueError(f"residual must be a nonnegative number, got {self.residual}")

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["passed"] = self.passed
        return out

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.check} residual={self.residual:.3e} tol={self.tolerance:.1e} {self.params}"
