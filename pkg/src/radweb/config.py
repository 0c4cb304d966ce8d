"""Run configuration: JSON file plus flag overrides, validated at load."""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .geometry import GeometryError, ModelParams

SUITES = ("intensity", "increment", "lln", "variance", "coaltail", "b1", "e-density",
          "lemma-agreement", "hausdorff")
ALL = "all"


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run.

    ``n`` drives ``sample-web``. Each verification suite runs at the scale of
    its acceptance criterion unless ``suite_n`` forces one scale for all.
    ``realizations`` replaces every suite's own realization count, and
    ``trials`` is the count for trial-based suites (chains, pairs, draws).
    """

    theta: float = math.pi / 4
    n: float = 1e4
    alpha: float = 0.5
    a_exp: float = 0.3
    b_exp: float = 0.45
    seed: int = 1
    trials: int = 10_000
    realizations: int | None = None
    suite_n: float | None = None
    horizon: float | None = None
    sigma2_ref: float | None = None
    window: float | None = None
    cell_size: float = 1.0
    output: str = "out"
    suite: str = ALL

    def __post_init__(self) -> None:
        if self.trials < 0:
            raise ConfigError("trials must be non-negative")
        if self.realizations is not None and self.realizations < 1:
            raise ConfigError("realizations must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.suite != ALL and self.suite not in SUITES:
            raise ConfigError(f"unknown suite {self.suite!r}; choose from {SUITES + (ALL,)}")
        if self.cell_size <= 0:
            raise ConfigError("cell_size must be positive")
        try:
            self.params()
            if self.suite_n is not None:
                self.params(self.suite_n)
        except GeometryError as exc:
            raise ConfigError(str(exc)) from exc

    def params(self, n: float | None = None) -> ModelParams:
        return ModelParams(self.theta, float(n if n is not None else self.n), self.alpha,
                           self.a_exp, self.b_exp)

    def scale(self, default_n: float) -> ModelParams:
        return self.params(self.suite_n if self.suite_n is not None else default_n)

    def count(self, default: int) -> int:
        return int(self.realizations) if self.realizations is not None else int(default)

    def to_dict(self) -> dict:
        return asdict(self)


_INT_KEYS = {"seed", "trials", "realizations"}


def _coerce(key: str, value):
    if value is None:
        return None
    if key in _INT_KEYS:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{key} must be an integer")
        return int(value)
    if key in ("output", "suite"):
        return str(value)
    return float(value)


def load_config(path: str | Path | None = None, overrides: dict | None = None,
                env: dict | None = None) -> RunConfig:
    """Resolve a config: defaults, then the JSON file, then flags.

    The seed falls back to ``RPW_SEED`` when neither the file nor a flag
    sets it. Unknown keys are rejected.
    """
    env = os.environ if env is None else env
    known = {f.name for f in fields(RunConfig)}
    data: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if isinstance(raw, dict) and "config" in raw and isinstance(raw["config"], dict):
            raw = raw["config"]  # a manifest embeds the resolved config
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        data.update(raw)
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "seed" not in data and env.get("RPW_SEED"):
        try:
            data["seed"] = int(env["RPW_SEED"])
        except ValueError as exc:
            raise ConfigError("RPW_SEED must be an integer") from exc
    try:
        return RunConfig(**{k: _coerce(k, v) for k, v in data.items()})
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
