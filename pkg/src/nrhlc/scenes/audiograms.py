"""Standard audiogram profiles and the jittered sampler."""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from ..auditory.audiogram import AUDIOGRAM_FREQS, MAX_THRESHOLD, Audiogram


@lru_cache(maxsize=None)
def _standard_table() -> tuple[str, tuple]:
    raw = json.loads(resources.files("nrhlc.scenes").joinpath("data/standard_audiograms.json").read_text())
    if raw["frequencies_hz"] != AUDIOGRAM_FREQS.astype(int).tolist():
        raise ValueError("standard audiogram table uses unexpected frequencies")
    return raw["source"], tuple((name, tuple(v)) for name, v in raw["profiles"].items())


def standard_audiograms() -> dict[str, Audiogram]:
    """NH plus the ten standard profiles, in file order."""
    return {name: Audiogram(np.array(v, dtype=np.float64)) for name, v in _standard_table()[1]}


@dataclass(frozen=True)
class AudiogramSampler:
    """Uniform profile choice, uniform per-threshold jitter, clipping."""

    profiles: tuple = ()
    jitter_db: float = 10.0
    clip: tuple = (0.0, MAX_THRESHOLD)

    def __post_init__(self):
        if not self.profiles:
            object.__setattr__(self, "profiles", tuple(standard_audiograms().items()))
        if self.jitter_db < 0:
            raise ValueError("jitter must be non-negative")

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.profiles]

    def sample(self, rng: np.random.Generator) -> tuple[str, Audiogram]:
        k = int(rng.integers(len(self.profiles)))
        name, base = self.profiles[k]
        jitter = rng.uniform(-self.jitter_db, self.jitter_db, AUDIOGRAM_FREQS.size)
        return name, Audiogram(np.clip(base.thresholds + jitter, *self.clip))


def sample_audiogram(sampler: AudiogramSampler, rng: np.random.Generator) -> Audiogram:
    return sampler.sample(rng)[1]
