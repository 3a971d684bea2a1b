"""Audiograms and their mapping onto per-channel OHC/IHC losses."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

AUDIOGRAM_FREQS = np.array([250, 375, 500, 750, 1000, 1500, 2000, 3000, 4000, 6000], dtype=np.float64)
MAX_THRESHOLD = 105.0


class AudiogramError(ValueError):
    pass


@dataclass(frozen=True)
class Audiogram:
    """Hearing thresholds in dB HL at the fixed AUDIOGRAM_FREQS."""

    thresholds: np.ndarray

    def __post_init__(self):
        t = np.array(self.thresholds, dtype=np.float64).reshape(-1)
        if t.shape != AUDIOGRAM_FREQS.shape:
            raise AudiogramError(f"audiogram needs {AUDIOGRAM_FREQS.size} thresholds, got {t.size}")
        if not np.all(np.isfinite(t)):
            raise AudiogramError("audiogram thresholds must be finite")
        if t.min() < 0 or t.max() > MAX_THRESHOLD:
            raise AudiogramError(f"audiogram thresholds must lie in [0, {MAX_THRESHOLD:g}] dB HL")
        t.flags.writeable = False
        object.__setattr__(self, "thresholds", t)

    @property
    def frequencies(self) -> np.ndarray:
        return AUDIOGRAM_FREQS.copy()

    @classmethod
    def flat(cls, level: float) -> "Audiogram":
        return cls(np.full(AUDIOGRAM_FREQS.size, float(level)))

    @classmethod
    def normal(cls) -> "Audiogram":
        return cls.flat(0.0)

    def is_normal(self) -> bool:
        return bool(np.all(self.thresholds == 0))

    def to_dict(self) -> dict:
        return {"frequencies_hz": AUDIOGRAM_FREQS.tolist(), "thresholds_db_hl": self.thresholds.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Audiogram":
        try:
            freqs, thr = d["frequencies_hz"], d["thresholds_db_hl"]
        except (KeyError, TypeError):
            raise AudiogramError("audiogram needs 'frequencies_hz' and 'thresholds_db_hl' arrays") from None
        if not np.array_equal(np.asarray(freqs, dtype=np.float64), AUDIOGRAM_FREQS):
            raise AudiogramError(f"audiogram frequencies must be exactly {AUDIOGRAM_FREQS.astype(int).tolist()}")
        return cls(thr)


def load_audiogram(path) -> Audiogram:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise AudiogramError(f"{path}: not valid JSON ({e})") from None
    return Audiogram.from_dict(data)


def save_audiogram(path, audiogram: Audiogram) -> None:
    Path(path).write_text(json.dumps(audiogram.to_dict(), indent=2) + "\n")


def interpolate_audiogram(audiogram: Audiogram | np.ndarray, center_freqs) -> np.ndarray:
    """Thresholds at `center_freqs`, linear on a log-frequency axis with edge hold.

    Accepts an Audiogram or a raw (..., 10) threshold array; returns (..., C).
    """
    thr = audiogram.thresholds if isinstance(audiogram, Audiogram) else np.asarray(audiogram, np.float64)
    fc = np.asarray(center_freqs, dtype=np.float64)
    if np.any(fc <= 0) or np.any(fc >= 8000):
        raise ValueError("center frequencies must lie in (0, 8000) Hz")
    log_f, log_k = np.log(fc), np.log(AUDIOGRAM_FREQS)
    flat = thr.reshape(-1, AUDIOGRAM_FREQS.size)
    out = np.stack([np.interp(log_f, log_k, row) for row in flat])
    return out.reshape(thr.shape[:-1] + fc.shape)


@dataclass(frozen=True)
class HearingLossProfile:
    hl_total: np.ndarray
    hl_ohc: np.ndarray
    hl_ihc: np.ndarray
    hl_ohc_max: np.ndarray


def split_hearing_loss(hl_total, hl_ohc_max) -> HearingLossProfile:
    """OHC share is 2/3 of the total loss capped at hl_ohc_max; IHC takes the rest."""
    hl_total = np.asarray(hl_total, dtype=np.float64)
    hl_ohc_max = np.broadcast_to(np.asarray(hl_ohc_max, dtype=np.float64), hl_total.shape)
    if np.any(hl_total < 0):
        raise ValueError("hearing loss must be non-negative")
    if np.any(hl_ohc_max < 0):
        raise ValueError("maximum OHC loss must be non-negative")
    hl_ohc = np.minimum(2.0 / 3.0 * hl_total, hl_ohc_max)
    return HearingLossProfile(hl_total, hl_ohc, hl_total - hl_ohc, np.array(hl_ohc_max))
