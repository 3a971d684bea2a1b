"""Room impulse responses, SNR mixing and early-reflection targets."""
from __future__ import annotations

from typing import Callable

import numpy as np

from ..dsp import SAMPLE_RATE, causal_conv

REFLECTION_BOUNDARY_MS = 50.0
TAIL_LEVEL = 0.2  # reverberant tail amplitude relative to the unit direct tap

RirProvider = Callable[[float, int], np.ndarray]


def synthetic_rir(t60: float, seed: int, fs: int = SAMPLE_RATE) -> np.ndarray:
    """Unit direct tap at 0 followed by white noise whose energy falls 60 dB in t60 s.

    The tail runs to 1.5 * t60 (-90 dB).
    """
    if not 0.05 <= t60 <= 1.0:
        raise ValueError(f"T60 must lie in [0.05, 1.0] s, got {t60}")
    n = int(np.ceil(1.5 * t60 * fs))
    t = np.arange(n) / fs
    rng = np.random.default_rng(seed)
    h = TAIL_LEVEL * rng.standard_normal(n) * 10 ** (-3.0 * t / t60)
    h[0] = 1.0
    return h


def anechoic_rir(t60: float = 0.0, seed: int = 0) -> np.ndarray:
    """Provider returning a single unit impulse (no room)."""
    del t60, seed
    return np.ones(1)


def measure_t60(rir: np.ndarray, fs: int = SAMPLE_RATE, lo_db: float = -5.0, hi_db: float = -35.0) -> float:
    """T60 from a line fit to the Schroeder decay curve of the tail (T30 style)."""
    tail = np.asarray(rir, dtype=np.float64)[1:] ** 2
    edc = np.cumsum(tail[::-1])[::-1]
    edc_db = 10 * np.log10(edc / edc[0])
    sel = (edc_db <= lo_db) & (edc_db >= hi_db)
    t = np.arange(tail.size)[sel] / fs
    slope = np.polyfit(t, edc_db[sel], 1)[0]
    return -60.0 / slope


def energy(x) -> float:
    return float(np.sum(np.asarray(x, dtype=np.float64) ** 2))


def mix_at_snr(speech, noise, snr_db: float) -> np.ndarray:
    """Scale `noise` so that 10 log10(E_speech / E_noise) equals snr_db."""
    es, en = energy(speech), energy(noise)
    if es <= 0 or en <= 0:
        raise ValueError("mix_at_snr needs sources with non-zero energy")
    return np.asarray(noise, dtype=np.float64) * np.sqrt(es / (en * 10 ** (snr_db / 10)))


def snr_db(speech, noise) -> float:
    return 10 * np.log10(energy(speech) / energy(noise))


def reverberate(x: np.ndarray, rir: np.ndarray) -> np.ndarray:
    """Causal convolution truncated to len(x)."""
    if rir.size == 1:
        return x * rir[0]
    return causal_conv(x, rir)


def truncate_rir(rir: np.ndarray, boundary_ms: float = REFLECTION_BOUNDARY_MS, fs: int = SAMPLE_RATE) -> np.ndarray:
    """Keep taps up to `boundary_ms` after the direct-path (largest |tap|) peak."""
    peak = int(np.argmax(np.abs(rir)))
    end = peak + int(round(boundary_ms * 1e-3 * fs)) + 1
    return rir[:end]


def early_target(speech, rir: np.ndarray, boundary_ms: float = REFLECTION_BOUNDARY_MS) -> np.ndarray:
    return reverberate(np.asarray(speech, dtype=np.float64), truncate_rir(rir, boundary_ms))
