"""Training configuration with schema validation."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..objectives import LossKind
from ..processor import ProcessorConfig
from ..scenes import SceneConfig
from .optim import CLIP_NORM, DECAY_EVERY, LR0, LR_DECAY


class Mode(str, enum.Enum):
    SDR = "sdr"
    NR = "nr"
    HLC = "hlc"
    NR_HLC = "nr-hlc"
    C_NR_HLC = "c-nr-hlc"

    @property
    def heads(self) -> tuple:
        if self is Mode.C_NR_HLC:
            return ("NR", "HLC")
        if self in (Mode.SDR, Mode.NR):
            return ("NR",)
        return ("HLC",)

    @property
    def conditioned(self) -> bool:
        """Whether the processor sees the audiogram."""
        return self not in (Mode.SDR, Mode.NR)

    @property
    def uses_auditory_model(self) -> bool:
        return self is not Mode.SDR


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


def _desk_processor() -> ProcessorConfig:
    return ProcessorConfig(n_channels=16, n_layers=2)


@dataclass(frozen=True)
class TrainConfig:
    mode: Mode = Mode.C_NR_HLC
    loss_kind: LossKind | None = LossKind.MAE
    batch_size: int = 4
    total_scenes: int = 20_000
    lr0: float = LR0
    lr_decay: float = LR_DECAY
    decay_every: int = DECAY_EVERY
    clip_norm: float = CLIP_NORM
    u_lr_scale: float = 1.0   # uncertainty parameters use lr * u_lr_scale
    seed: int = 0
    checkpoint_every: int = 500   # steps
    processor: ProcessorConfig = field(default_factory=_desk_processor)
    scene: SceneConfig = field(default_factory=SceneConfig)
    corpus: dict = field(default_factory=lambda: {"kind": "synthetic"})

    def __post_init__(self):
        try:
            mode = Mode(self.mode)
        except ValueError:
            raise ConfigError(f"mode must be one of {[m.value for m in Mode]}, got {self.mode!r}") from None
        object.__setattr__(self, "mode", mode)
        if mode is Mode.SDR:
            if self.loss_kind is not None:
                raise ConfigError("mode sdr trains on SDR directly and takes no loss kind")
        else:
            if self.loss_kind is None:
                raise ConfigError(f"mode {mode.value} needs a loss kind (mse or mae)")
            try:
                object.__setattr__(self, "loss_kind", LossKind(self.loss_kind))
            except ValueError:
                raise ConfigError(f"loss must be mse or mae, got {self.loss_kind!r}") from None
        proc = self.processor
        if isinstance(proc, dict):
            proc = ProcessorConfig.from_dict(proc)
        proc = replace(proc, heads=mode.heads, audiogram_conditioning=mode.conditioned)
        object.__setattr__(self, "processor", proc)
        if isinstance(self.scene, dict):
            object.__setattr__(self, "scene", SceneConfig.from_dict(self.scene))
        for name in ("batch_size", "total_scenes", "decay_every", "checkpoint_every"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.lr0 <= 0 or not 0 < self.lr_decay <= 1 or self.clip_norm <= 0 or self.u_lr_scale < 0:
            raise ConfigError("lr0, clip_norm must be positive, lr_decay in (0, 1], u_lr_scale >= 0")

    @property
    def total_steps(self) -> int:
        return -(-self.total_scenes // self.batch_size)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["mode"] = self.mode.value
        d["loss_kind"] = None if self.loss_kind is None else self.loss_kind.value
        d["processor"] = self.processor.to_dict()
        d["scene"] = self.scene.to_dict()
        d["corpus"] = dict(self.corpus)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "loss" in d:  # short spelling used in config files and flags
            d["loss_kind"] = d.pop("loss")
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown training config keys {sorted(unknown)}; "
                              f"valid keys are {sorted(f.name for f in fields(cls))}")
        if d.get("mode") in ("sdr", Mode.SDR) and "loss_kind" not in d:
            d["loss_kind"] = None
        try:
            return cls(**d)
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from e


def load_train_config(path, overrides: dict | None = None) -> TrainConfig:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: top level must be an object")
    d.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return TrainConfig.from_dict(d)
