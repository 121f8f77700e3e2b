"""Experiment configuration: one JSON file captures a whole run."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace

from .datagen import DatasetConfig
from .decimation import CRITERIA, DecimationConfig
from .optimizer import OptimizerConfig
from .pseudolikelihood import FVariant

DIRECTIONS = ("direct", "inverse", "both")


def default_noise_grid() -> tuple[float, ...]:
    return tuple(round(0.02 * i, 2) for i in range(26))


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    variant: str = "InfInf"
    half_width: float = 1.0
    direction: str = "direct"
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    fraction: float = 1.0 / 128.0
    sigma_guess: float = 0.1
    beta_rule: str = "inverse_variance"
    noise_grid: tuple[float, ...] = field(default_factory=default_noise_grid)
    criteria: tuple[str, ...] = CRITERIA
    out: str = "runs"
    threads: int = 1
    val_seed: int = 1000
    m_validation: int = 1000

    def __post_init__(self):
        self.fvariant  # validates the tag
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        if any(s < 0 for s in self.noise_grid):
            raise ValueError("noise_grid values must be non-negative")
        bad = set(self.criteria) - set(CRITERIA)
        if bad:
            raise ValueError(f"unknown criteria {sorted(bad)}")
        if not 0 < self.fraction <= 1:
            raise ValueError("fraction must lie in (0, 1]")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")

    @property
    def fvariant(self) -> FVariant:
        v = FVariant.parse(self.variant)
        return replace(v, half_width=self.half_width) if v.tag == "SymUnit" and v.half_width == 1.0 else v

    def decimation(self) -> DecimationConfig:
        return DecimationConfig(variant=self.fvariant, optimizer=self.optimizer,
                                fraction=self.fraction, sigma_guess=self.sigma_guess,
                                beta_rule=self.beta_rule)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["noise_grid"] = list(self.noise_grid)
        d["criteria"] = list(self.criteria)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        d = dict(d)
        if "dataset" in d:
            d["dataset"] = _sub(DatasetConfig, d["dataset"])
        if "optimizer" in d:
            d["optimizer"] = _sub(OptimizerConfig, d["optimizer"])
        if "noise_grid" in d:
            d["noise_grid"] = tuple(float(x) for x in d["noise_grid"])
        if "criteria" in d:
            d["criteria"] = tuple(d["criteria"])
        return cls(**d)


def _sub(kind, d: dict):
    known = {f.name for f in fields(kind)}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown {kind.__name__} keys {sorted(unknown)}")
    return kind(**d)
