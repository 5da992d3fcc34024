"""Run configuration: a JSON document with a fixed schema.

Example (every key optional)::

    {
      "model": "finite",
      "seed": 7,
      "t": 0.7,
      "finite": {"M": 2, "weights": null, "k_max": 2, "interaction_scale": 0.7},
      "continuous": {"d": 1, "mass": 1.0, "kappa": 1.0, "dt": 0.001, "nodes": 20},
      "truncation": {"n_term": null, "n_max": 5, "s_max": 3},
      "tolerances": {"bbgky.residual": 1e-8},
      "output": {"report": null, "csv": null}
    }

Unknown keys are rejected and every numeric value is range checked; errors
name the offending key.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any

__all__ = ["ConfigError", "FiniteConfig", "ContinuousConfig", "TruncationConfig", "OutputConfig", "RunConfig", "load_config"]


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending key."""


@dataclass(frozen=True)
class FiniteConfig:
    M: int = 2
    weights: tuple[float, ...] | None = None
    k_max: int = 2
    interaction_scale: float = 0.7


@dataclass(frozen=True)
class ContinuousConfig:
    d: int = 1
    mass: float = 1.0
    kappa: float = 1.0
    dt: float = 1e-3
    nodes: int = 20


@dataclass(frozen=True)
class TruncationConfig:
    n_term: int | None = None
    n_max: int = 5
    s_max: int = 3


@dataclass(frozen=True)
class OutputConfig:
    report: str | None = None
    csv: str | None = None


@dataclass(frozen=True)
class RunConfig:
    model: str = "finite"
    seed: int = 0
    t: float = 0.7
    finite: FiniteConfig = field(default_factory=FiniteConfig)
    continuous: ContinuousConfig = field(default_factory=ContinuousConfig)
    truncation: TruncationConfig = field(default_factory=TruncationConfig)
    tolerances: dict[str, float] = field(default_factory=dict)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        if out["finite"]["weights"] is not None:
            out["finite"]["weights"] = list(out["finite"]["weights"])
        return out

    def canonical_json(self) -> str:
        """Serialization used for hashing; output paths do not affect results and are left out."""
        doc = self.to_dict()
        doc.pop("output")
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        out = replace(self, **{k: v for k, v in kw.items() if k in ("model", "seed", "t")})
        if "report" in kw or "csv" in kw:
            out = replace(out, output=replace(out.output, **{k: kw[k] for k in ("report", "csv") if k in kw}))
        out.validate()
        return out

    def validate(self) -> None:
        _check(self.model in ("finite", "continuous"), "model", "must be 'finite' or 'continuous'")
        _check(isinstance(self.seed, int) and not isinstance(self.seed, bool) and self.seed >= 0, "seed", "must be a nonnegative integer")
        _check(_is_real(self.t) and math.isfinite(self.t) and abs(self.t) <= 100, "t", "must be a finite number with |t| <= 100")
        f = self.finite
        _check(_is_int(f.M) and 1 <= f.M <= 16, "finite.M", "must be an integer in [1, 16]")
        _check(_is_int(f.k_max) and 1 <= f.k_max <= 4, "finite.k_max", "must be an integer in [1, 4]")
        _check(_is_real(f.interaction_scale) and 0 <= f.interaction_scale <= 10, "finite.interaction_scale", "must be in [0, 10]")
        if f.weights is not None:
            _check(len(f.weights) == f.M, "finite.weights", f"must have M = {f.M} entries")
            _check(all(_is_real(w) and w > 0 and math.isfinite(w) for w in f.weights), "finite.weights", "entries must be positive")
        c = self.continuous
        _check(c.d == 1, "continuous.d", "only d = 1 is supported by the built-in data")
        _check(_is_real(c.mass) and c.mass > 0, "continuous.mass", "must be positive")
        _check(_is_real(c.kappa) and c.kappa >= 0, "continuous.kappa", "must be nonnegative")
        _check(_is_real(c.dt) and 0 < c.dt <= 0.1, "continuous.dt", "must be in (0, 0.1]")
        _check(_is_int(c.nodes) and 2 <= c.nodes <= 64, "continuous.nodes", "must be an integer in [2, 64]")
        tr = self.truncation
        _check(tr.n_term is None or (_is_int(tr.n_term) and 0 <= tr.n_term <= 8), "truncation.n_term", "must be null or an integer in [0, 8]")
        _check(_is_int(tr.n_max) and 1 <= tr.n_max <= 8, "truncation.n_max", "must be an integer in [1, 8]")
        _check(_is_int(tr.s_max) and 1 <= tr.s_max <= 4, "truncation.s_max", "must be an integer in [1, 4]")
        for k, v in self.tolerances.items():
            _check(_is_real(v) and v >= 0 and math.isfinite(v), f"tolerances.{k}", "must be a nonnegative number")


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_real(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _check(ok: bool, key: str, msg: str) -> None:
    if not ok:
        raise ConfigError(f"config key '{key}' {msg}")


def _section(cls, doc: Any, prefix: str):
    if not isinstance(doc, dict):
        raise ConfigError(f"config key '{prefix}' must be an object")
    names = {f.name for f in fields(cls)}
    for key in doc:
        if key not in names:
            raise ConfigError(f"unknown config key '{prefix}.{key}'")
    kw = dict(doc)
    if cls is FiniteConfig and kw.get("weights") is not None:
        if not isinstance(kw["weights"], list):
            raise ConfigError("config key 'finite.weights' must be a list or null")
        kw["weights"] = tuple(kw["weights"])
    return cls(**kw)


def load_config(doc: dict | str | None) -> RunConfig:
    """Build a validated :class:`RunConfig` from a dict, a JSON string or ``None`` (defaults)."""
    if doc is None:
        cfg = RunConfig()
        cfg.validate()
        return cfg
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    top = {f.name for f in fields(RunConfig)}
    for key in doc:
        if key not in top:
            raise ConfigError(f"unknown config key '{key}'")
    kw: dict[str, Any] = {}
    for key in ("model", "seed", "t"):
        if key in doc:
            kw[key] = doc[key]
    sections = {"finite": FiniteConfig, "continuous": ContinuousConfig, "truncation": TruncationConfig, "output": OutputConfig}
    for key, cls in sections.items():
        if key in doc:
            try:
                kw[key] = _section(cls, doc[key], key)
            except TypeError as exc:
                raise ConfigError(f"config key '{key}' is malformed: {exc}") from None
    if "tolerances" in doc:
        if not isinstance(doc["tolerances"], dict):
            raise ConfigError("config key 'tolerances' must be an object")
        kw["tolerances"] = dict(doc["tolerances"])
    cfg = RunConfig(**kw)
    cfg.validate()
    return cfg
