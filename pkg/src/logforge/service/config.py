"""Deployment configuration (logforge.toml or .json)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..index_store import RollPolicy


class ConfigError(Exception):
    pass


QUADRANTS = ("errors", "performance", "load", "security")


@dataclass
class KpiSpec:
    """Weights plus the normalizers that map raw quadrant metrics to [0,100].

    A quadrant's penalty is zero up to its budget and saturates at its cap:
    penalty = min(100, 100 * (raw - budget) / (cap - budget)).
    """

    weights: dict = field(default_factory=lambda: {q: 0.25 for q in QUADRANTS})
    budgets: dict = field(default_factory=lambda: {
        "errors": 0.0,        # errors per 1k events
        "performance": 1500,  # p95 of extracted ms durations
        "load": 5000,         # peak events per minute
        "security": 0.0,      # findings count
    })
    caps: dict = field(default_factory=lambda: {
        "errors": 50.0,
        "performance": 5000,
        "load": 20000,
        "security": 25.0,
    })

    def __post_init__(self):
        if set(self.weights) != set(QUADRANTS):
            raise ConfigError(f"kpi weights must cover {QUADRANTS}")
        if any(w < 0 for w in self.weights.values()):
            raise ConfigError("kpi weights must be nonnegative")
        total = sum(self.weights.values())
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"kpi weights must sum to 1.0 (got {total})")
        for q in QUADRANTS:
            if self.caps[q] <= self.budgets[q]:
                raise ConfigError(f"kpi cap must exceed budget for {q!r}")


@dataclass
class Config:
    data_dir: str = "./logforge-data"
    state_dir: str = ""  # defaults to <data_dir>/state
    port: int = 8099
    default_index: str = "main"
    rules_file: str = ""  # defaults to the packaged rules
    roll: RollPolicy = field(default_factory=RollPolicy)
    kpi: KpiSpec = field(default_factory=KpiSpec)

    @classmethod
    def load(cls, path: str | Path | None) -> "Config":
        if path is None:
            return cls()
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if path.suffix == ".json":
            data = json.loads(text)
        else:
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            data = tomllib.loads(text)
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        roll_cfg = data.get("roll", {})
        roll = RollPolicy(
            max_bytes=int(roll_cfg.get("max_bytes", RollPolicy.max_bytes)),
            max_warm=int(roll_cfg.get("max_warm", RollPolicy.max_warm)),
            max_cold=int(roll_cfg.get("max_cold", RollPolicy.max_cold)),
        )
        kpi_cfg = data.get("kpi", {})
        kpi = KpiSpec(
            weights=kpi_cfg.get("weights", {q: 0.25 for q in QUADRANTS}),
            budgets={**KpiSpec().budgets, **kpi_cfg.get("budgets", {})},
            caps={**KpiSpec().caps, **kpi_cfg.get("caps", {})},
        )
        return cls(
            data_dir=data.get("data_dir", cls.data_dir),
            state_dir=data.get("state_dir", ""),
            port=int(data.get("port", cls.port)),
            default_index=data.get("default_index", cls.default_index),
            rules_file=data.get("rules_file", ""),
            roll=roll,
            kpi=kpi,
        )

    def build_engine(self):
        from ..engine import Engine
        from ..ingest import RuleSet

        rules = RuleSet.load(self.rules_file) if self.rules_file else None
        return Engine(
            data_dir=self.data_dir,
            state_dir=self.state_dir or None,
            rules=rules,
            roll_policy=self.roll,
            default_index=self.default_index,
        )
