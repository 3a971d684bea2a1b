"""Speech and noise sources: a built-in synthetic corpus and WAV manifests."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np

from ..dsp import SAMPLE_RATE
from ..wavio import read_wav

ROLES = ("speech", "noise")
SPLITS = ("train", "test")


@dataclass(frozen=True)
class CorpusItem:
    item_id: str
    role: str
    split: str
    loader: Callable[[], np.ndarray]

    def load(self) -> np.ndarray:
        return self.loader()


class Corpus:
    """Items grouped by role and split."""

    def __init__(self, items: list[CorpusItem], description: dict):
        self.items = list(items)
        self.description = description

    def select(self, role: str, split: str) -> list[CorpusItem]:
        if role not in ROLES or split not in SPLITS:
            raise ValueError(f"role must be one of {ROLES} and split one of {SPLITS}")
        return [it for it in self.items if it.role == role and it.split == split]

    def by_id(self, item_id: str) -> CorpusItem:
        for it in self.items:
            if it.item_id == item_id:
                return it
        raise KeyError(item_id)


# ----------------------------------------------------------------------------
# synthetic sources

def _smooth_steps(values: np.ndarray, n: int, seg: int) -> np.ndarray:
    """Piecewise-constant sequence of `values` every `seg` samples, cross-faded."""
    steps = np.repeat(values, seg, axis=0)[:n]
    k = max(1, seg // 4)
    win = np.hanning(2 * k + 1)
    win /= win.sum()
    pad = np.pad(steps, [(k, k)] + [(0, 0)] * (steps.ndim - 1), mode="edge")
    if steps.ndim == 1:
        return np.convolve(pad, win, mode="valid")
    return np.stack([np.convolve(pad[:, j], win, mode="valid") for j in range(steps.shape[1])], axis=1)


def synthetic_speech(rng: np.random.Generator, duration: float, fs: int = SAMPLE_RATE) -> np.ndarray:
    """Voiced, formant-shaped harmonic complex with syllabic modulation and pauses."""
    n = int(duration * fs)
    t = np.arange(n) / fs
    seg = int(0.2 * fs)
    n_seg = n // seg + 1
    f0 = rng.uniform(90, 230) * (1 + 0.08 * np.sin(2 * np.pi * rng.uniform(0.5, 2) * t)) * (1 - 0.1 * t / duration)
    formants = np.stack([rng.uniform(300, 900, n_seg), rng.uniform(900, 2300, n_seg),
                         rng.uniform(2300, 3300, n_seg)], axis=1)
    formants = _smooth_steps(formants, n, seg)
    bw = np.array([80.0, 120.0, 180.0])
    phase = 2 * np.pi * np.cumsum(f0) / fs
    out = np.zeros(n)
    for h in range(1, int(4000 / f0.min()) + 1):
        fh = h * f0
        gain = np.sum(1.0 / (1.0 + ((fh[:, None] - formants) / bw) ** 2), axis=1)
        out += np.where(fh < 4000, gain / np.sqrt(h), 0.0) * np.sin(h * phase + rng.uniform(0, 2 * np.pi))
    voiced = (rng.uniform(size=n_seg) > 0.25).astype(float)
    env = _smooth_steps(voiced * rng.uniform(0.3, 1.0, n_seg), n, seg)
    env *= 0.6 + 0.4 * np.sin(2 * np.pi * 4.0 * t + rng.uniform(0, 2 * np.pi)) ** 2
    x = out * env
    return 0.1 * x / (np.sqrt(np.mean(x ** 2)) + 1e-12)


def _shaped_noise(rng, n, gain_fn, fs=SAMPLE_RATE):
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1 / fs)
    return np.fft.irfft(spec * gain_fn(f), n)


NOISE_KINDS = ("white", "pink", "speech_shaped", "modulated", "hum")


def synthetic_noise(rng: np.random.Generator, duration: float, kind: str, fs: int = SAMPLE_RATE) -> np.ndarray:
    n = int(duration * fs)
    t = np.arange(n) / fs
    if kind == "white":
        x = rng.standard_normal(n)
    elif kind == "pink":
        x = _shaped_noise(rng, n, lambda f: 1.0 / np.sqrt(np.maximum(f, 20.0)))
    elif kind == "speech_shaped":
        x = _shaped_noise(rng, n, lambda f: 1.0 / (1.0 + (f / 500.0) ** 2) ** 0.5 * (f > 60))
    elif kind == "modulated":
        rate = rng.uniform(2, 16)
        x = _shaped_noise(rng, n, lambda f: 1.0 / np.sqrt(np.maximum(f, 100.0)))
        x *= 1 + 0.9 * np.sin(2 * np.pi * rate * t + rng.uniform(0, 2 * np.pi))
    elif kind == "hum":
        base = rng.uniform(50, 400)
        x = sum(np.sin(2 * np.pi * base * k * t + rng.uniform(0, 2 * np.pi)) / k for k in range(1, 8))
        x = x + 0.1 * rng.standard_normal(n)
    else:
        raise ValueError(f"unknown noise kind {kind!r}; choose from {NOISE_KINDS}")
    return 0.1 * x / np.sqrt(np.mean(x ** 2))


def synthetic_corpus(seed: int = 0, n_speech: int = 20, n_noise: int = 10, duration: float = 3.0,
                     n_test_speech: int = 5, n_test_noise: int = 5) -> Corpus:
    """Deterministic corpus generated on demand; train and test items use disjoint streams."""
    items = []

    def add(role, split, i, stream):
        @lru_cache(maxsize=1)
        def load():
            rng = np.random.default_rng([seed, stream, i])
            if role == "speech":
                return synthetic_speech(rng, duration)
            return synthetic_noise(rng, duration, NOISE_KINDS[i % len(NOISE_KINDS)])
        items.append(CorpusItem(f"synth:{role}:{split}:{i}", role, split, load))

    for i in range(n_speech):
        add("speech", "train", i, 0)
    for i in range(n_noise):
        add("noise", "train", i, 1)
    for i in range(n_test_speech):
        add("speech", "test", i, 2)
    for i in range(n_test_noise):
        add("noise", "test", i, 3)
    desc = {"kind": "synthetic", "seed": seed, "n_speech": n_speech, "n_noise": n_noise,
            "duration": duration, "n_test_speech": n_test_speech, "n_test_noise": n_test_noise}
    return Corpus(items, desc)


# ----------------------------------------------------------------------------
# WAV manifests

def manifest_corpus(path) -> Corpus:
    """Read a CSV manifest with columns path, role, split (paths relative to the file)."""
    path = Path(path)
    base = path.parent
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    if not rows:
        raise ValueError(f"{path}: manifest has no entries")
    if not {"path", "role", "split"} <= set(rows[0]):
        raise ValueError(f"{path}: manifest needs columns path, role, split")
    items = []
    for r in rows:
        role, split = r["role"].strip(), r["split"].strip()
        if role not in ROLES or split not in SPLITS:
            raise ValueError(f"{path}: bad role/split {role!r}/{split!r} for {r['path']}")
        wav = (base / r["path"].strip()).resolve()
        if not wav.exists():
            raise FileNotFoundError(f"{path}: {wav} does not exist")
        items.append(CorpusItem(r["path"].strip(), role, split, lru_cache(maxsize=1)(lambda p=wav: read_wav(p))))
    return Corpus(items, {"kind": "manifest", "path": str(path)})


def load_corpus(spec: dict) -> Corpus:
    """Build a corpus from a config dict ({"kind": "synthetic", ...} or {"kind": "manifest", "path": ...})."""
    spec = dict(spec)
    kind = spec.pop("kind", "synthetic")
    if kind == "synthetic":
        return synthetic_corpus(**spec)
    if kind == "manifest":
        return manifest_corpus(spec["path"])
    raise ValueError(f"unknown corpus kind {kind!r}")
