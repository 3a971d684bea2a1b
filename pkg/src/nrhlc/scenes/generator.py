"""On-the-fly scene generation and test-set freezing."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..auditory.audiogram import Audiogram, load_audiogram, save_audiogram
from ..dsp import SAMPLE_RATE
from ..wavio import read_wav, write_wav
from .acoustics import (REFLECTION_BOUNDARY_MS, RirProvider, early_target, energy, mix_at_snr,
                        reverberate, synthetic_rir)
from .audiograms import AudiogramSampler
from .corpus import Corpus

PEAK_LEVEL = 0.5
MAX_RETRIES = 10


@dataclass(frozen=True)
class SceneConfig:
    snr_range: tuple = (-10.0, 20.0)
    max_noise_sources: int = 3
    t60_range: tuple = (0.1, 0.7)
    reflection_boundary_ms: float = REFLECTION_BOUNDARY_MS
    scene_len: float = 4.0
    seed: int = 0
    split: str = "train"

    def __post_init__(self):
        object.__setattr__(self, "snr_range", tuple(float(v) for v in self.snr_range))
        object.__setattr__(self, "t60_range", tuple(float(v) for v in self.t60_range))
        if self.scene_len <= 0:
            raise ValueError("scene_len must be positive")
        if self.max_noise_sources < 1:
            raise ValueError("need at least one noise source")
        if self.snr_range[0] > self.snr_range[1] or self.t60_range[0] > self.t60_range[1]:
            raise ValueError("ranges must be (low, high)")

    @property
    def n_samples(self) -> int:
        return int(round(self.scene_len * SAMPLE_RATE))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown scene config keys {sorted(unknown)}")
        return cls(**d)


@dataclass
class Scene:
    x: np.ndarray
    y: np.ndarray
    audiogram: Audiogram
    metadata: dict
    components: dict = field(default_factory=dict, repr=False)


def scene_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream per scene, derived from (seed, index)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _segment(signal: np.ndarray, n: int, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Random n-sample excerpt; shorter signals are zero-padded at a random offset."""
    if signal.size >= n:
        start = int(rng.integers(signal.size - n + 1))
        return signal[start:start + n].copy(), start
    offset = int(rng.integers(n - signal.size + 1))
    out = np.zeros(n)
    out[offset:offset + signal.size] = signal
    return out, -offset


def _pick_source(items, n, rng, what):
    for _ in range(MAX_RETRIES):
        item = items[int(rng.integers(len(items)))]
        seg, start = _segment(item.load(), n, rng)
        if energy(seg) > 0:
            return item, seg, start
    raise RuntimeError(f"could not draw a non-silent {what} segment after {MAX_RETRIES} tries")


def generate_scene(cfg: SceneConfig, corpus: Corpus, index: int, rir_provider: RirProvider = synthetic_rir,
                   sampler: AudiogramSampler | None = None, keep_components: bool = False) -> Scene:
    """Render scene `index` of the stream defined by cfg.seed; identical inputs give identical scenes."""
    speech_items = corpus.select("speech", cfg.split)
    noise_items = corpus.select("noise", cfg.split)
    if not speech_items or not noise_items:
        raise ValueError(f"corpus has no speech or noise items in split {cfg.split!r}")
    sampler = sampler or AudiogramSampler()
    rng = scene_rng(cfg.seed, index)
    n = cfg.n_samples

    item, speech, start = _pick_source(speech_items, n, rng, "speech")
    n_noise = int(rng.integers(1, cfg.max_noise_sources + 1))
    t60 = float(rng.uniform(*cfg.t60_range))
    rir_seeds = [int(s) for s in rng.integers(0, 2 ** 31 - 1, n_noise + 1)]
    rir_speech = rir_provider(t60, rir_seeds[0])
    rev_speech = reverberate(speech, rir_speech)
    if energy(rev_speech) == 0:
        raise RuntimeError("reverberant speech is silent")
    y = early_target(speech, rir_speech, cfg.reflection_boundary_ms)

    noises, noise_meta = [], []
    for k in range(n_noise):
        nitem, nseg, nstart = _pick_source(noise_items, n, rng, "noise")
        rev_noise = reverberate(nseg, rir_provider(t60, rir_seeds[k + 1]))
        snr = float(rng.uniform(*cfg.snr_range))
        noises.append(mix_at_snr(rev_speech, rev_noise, snr))
        noise_meta.append({"id": nitem.item_id, "start": nstart, "snr_db": snr})
    profile, audiogram = sampler.sample(rng)

    x = rev_speech + np.sum(noises, axis=0)
    peak = np.max(np.abs(x))
    gain = PEAK_LEVEL / peak if peak > 0 else 1.0
    meta = {
        "index": int(index), "seed": int(cfg.seed), "split": cfg.split,
        "speech": {"id": item.item_id, "start": start},
        "noises": noise_meta, "t60_s": t60, "rir_seeds": rir_seeds,
        "audiogram_profile": profile, "audiogram_db_hl": audiogram.thresholds.tolist(),
        "gain": gain, "config": cfg.to_dict(), "corpus": corpus.description,
    }
    comps = {}
    if keep_components:
        comps = {"reverberant_speech": gain * rev_speech, "noises": [gain * v for v in noises]}
    return Scene(gain * x, gain * y, audiogram, meta, comps)


class SceneStream:
    """Indexable, deterministic sequence of scenes."""

    def __init__(self, cfg: SceneConfig, corpus: Corpus, rir_provider: RirProvider = synthetic_rir,
                 sampler: AudiogramSampler | None = None):
        self.cfg, self.corpus, self.rir_provider = cfg, corpus, rir_provider
        self.sampler = sampler or AudiogramSampler()

    def __getitem__(self, index: int) -> Scene:
        return generate_scene(self.cfg, self.corpus, index, self.rir_provider, self.sampler)

    def batch(self, indices) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[dict]]:
        scenes = [self[i] for i in indices]
        return (np.stack([s.x for s in scenes]), np.stack([s.y for s in scenes]),
                np.stack([s.audiogram.thresholds for s in scenes]), [s.metadata for s in scenes])


# ----------------------------------------------------------------------------
# frozen test sets

def freeze_test_set(out_dir, stream: SceneStream, n_scenes: int, manifest: dict | None = None) -> Path:
    """Write scenes 0..n-1 as x.wav, y.wav, audiogram.json and meta.json under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    index = []
    for i in range(n_scenes):
        s = stream[i]
        d = out / f"scene_{i:05d}"
        d.mkdir(exist_ok=True)
        write_wav(d / "x.wav", s.x, manifest)
        write_wav(d / "y.wav", s.y, manifest)
        save_audiogram(d / "audiogram.json", s.audiogram)
        (d / "meta.json").write_text(json.dumps(s.metadata, indent=2, sort_keys=True) + "\n")
        index.append(d.name)
    (out / "index.json").write_text(json.dumps({"scenes": index, "manifest": manifest or {}},
                                               indent=2, sort_keys=True) + "\n")
    return out


def load_frozen_scenes(path) -> list[Scene]:
    root = Path(path)
    index = json.loads((root / "index.json").read_text())
    scenes = []
    for name in index["scenes"]:
        d = root / name
        scenes.append(Scene(read_wav(d / "x.wav"), read_wav(d / "y.wav"), load_audiogram(d / "audiogram.json"),
                            json.loads((d / "meta.json").read_text())))
    return scenes
