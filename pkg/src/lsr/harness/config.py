from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from ..docmodel import PlanMode


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Flat run configuration; defaults follow the published hyper-parameters."""

    train: str | None = None
    dev: str | None = None
    test: str | None = None
    mode: str = PlanMode.WITH_MDP.value
    structure: str = "induced"
    d: int = 120
    d_emb: int = 100
    blocks: int = 2
    l_sub: int = 2
    k: int | None = None
    batch_size: int = 20
    lr: float = 0.001
    dropout: float = 0.3
    epochs: int = 10
    seed: int = 1
    threshold: str | float = "dev"  # "dev" picks the dev-optimal threshold
    share_induction: bool = False
    emb_scale: float = 1.0
    pretrained: str | None = None
    log: str | None = None
    out: str | None = None

    def __post_init__(self):
        try:
            PlanMode(self.mode)
        except ValueError:
            raise ConfigError(f"unknown mode {self.mode!r}") from None
        if self.structure not in ("induced", "uniform"):
            raise ConfigError(f"unknown structure {self.structure!r}")
        if self.batch_size < 1 or self.epochs < 0 or self.blocks < 1:
            raise ConfigError("batch_size and blocks must be >= 1, epochs >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout {self.dropout} outside [0, 1)")
        if self.threshold != "dev" and not isinstance(self.threshold, (int, float)):
            raise ConfigError(f"threshold must be 'dev' or a number, got {self.threshold!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(raw) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return RunConfig.from_dict(raw)
