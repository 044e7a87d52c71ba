"""Run configuration: hyperparameters, ablation switches, JSON round-trip."""

import dataclasses
import json
from dataclasses import dataclass, field

from .errors import ConfigError

CENTER_METHODS = ("alignment", "average")
SYNTHESIS_METHODS = ("ray", "gaussian")


@dataclass
class RunConfig:
    """Training/evaluation settings. Defaults target full-scale backbone
    features; desk-scale synthetic runs typically override the rates (see
    README)."""

    p: int = 3                    # neighborhood patch size, odd
    levels: list = field(default_factory=lambda: [2, 3])
    beta: float = 0.1             # EMA smoothing for center alignment
    alpha: float = 0.3            # anomaly degree (synthesis length scale)
    gamma: float = 1e-5           # projector regularization
    delta: float = 1e-2           # joint regularization
    batch_size: int = 8
    epochs: int = 400
    seed: int = 0
    lr_projector: float = 1e-4
    lr_discriminator: float = 2e-4
    smoothing_sigma: float = 4.0  # pixel-map Gaussian blur, in pixels
    subsample_ratio: float = 1.0
    center_method: str = "alignment"   # alignment | average
    synthesis_method: str = "ray"      # ray | gaussian
    gaussian_noise_std: float = 0.015  # only used by the gaussian ablation

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.p <= 0 or self.p % 2 == 0:
            raise ConfigError(f"p must be a positive odd integer, got {self.p}")
        self.levels = sorted(int(j) for j in self.levels)
        if not self.levels:
            raise ConfigError("levels must name at least one hierarchy level")
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if not 0.0 < self.beta <= 1.0:
            raise ConfigError(f"beta must be in (0, 1], got {self.beta}")
        if not 0.0 < self.subsample_ratio <= 1.0:
            raise ConfigError(
                f"subsample_ratio must be in (0, 1], got {self.subsample_ratio}"
            )
        if self.batch_size <= 0:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.smoothing_sigma < 0:
            raise ConfigError(
                f"smoothing_sigma must be >= 0, got {self.smoothing_sigma}"
            )
        if self.center_method not in CENTER_METHODS:
            raise ConfigError(
                f"center_method must be one of {CENTER_METHODS}, "
                f"got {self.center_method!r}"
            )
        if self.synthesis_method not in SYNTHESIS_METHODS:
            raise ConfigError(
                f"synthesis_method must be one of {SYNTHESIS_METHODS}, "
                f"got {self.synthesis_method!r}"
            )
        if self.gaussian_noise_std < 0:
            raise ConfigError(
                f"gaussian_noise_std must be >= 0, got {self.gaussian_noise_std}"
            )

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path):
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self):
        return dataclasses.asdict(self)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def replace(self, **kwargs):
        return dataclasses.replace(self, **kwargs)
