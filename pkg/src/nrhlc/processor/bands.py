"""Frequency band layouts for the band-split encoder."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dsp import SAMPLE_RATE, StftConfig


def default_band_edges() -> list[float]:
    """20 x 200 Hz up to 4 kHz, 6 x 500 Hz up to 7 kHz, then one 1 kHz band."""
    return ([200.0 * i for i in range(21)] + [4000.0 + 500.0 * i for i in range(1, 7)] + [8000.0])


@dataclass(frozen=True)
class BandSplitSpec:
    """Contiguous bands over [0, fs/2] given by their edges in Hz.

    Bin f belongs to band k when edges[k] <= f_hz < edges[k + 1]; the Nyquist
    bin joins the last band.
    """

    edges_hz: tuple
    stft: StftConfig = StftConfig()

    def __post_init__(self):
        e = tuple(float(v) for v in self.edges_hz)
        object.__setattr__(self, "edges_hz", e)
        nyq = SAMPLE_RATE / 2
        if len(e) < 2 or e[0] != 0.0 or e[-1] != nyq:
            raise ValueError(f"band edges must start at 0 and end at {nyq:g} Hz")
        if any(b <= a for a, b in zip(e, e[1:])):
            raise ValueError("band edges must be strictly increasing")
        if np.any(np.diff(self.bounds) <= 0):
            raise ValueError("every band must contain at least one STFT bin")

    @classmethod
    def default(cls) -> "BandSplitSpec":
        return cls(tuple(default_band_edges()))

    @property
    def n_bands(self) -> int:
        return len(self.edges_hz) - 1

    @property
    def n_bins(self) -> int:
        return self.stft.n_bins

    @property
    def bounds(self) -> np.ndarray:
        """Bin index boundaries: band k covers bins bounds[k]:bounds[k + 1]."""
        bin_hz = SAMPLE_RATE / self.stft.frame_len
        inner = [int(np.ceil(e / bin_hz - 1e-9)) for e in self.edges_hz[1:-1]]
        return np.array([0] + inner + [self.n_bins])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bounds)

    def band_bins(self, k: int) -> range:
        b = self.bounds
        return range(int(b[k]), int(b[k + 1]))

    def to_dict(self) -> dict:
        return {"edges_hz": list(self.edges_hz)}

    @classmethod
    def from_dict(cls, d: dict) -> "BandSplitSpec":
        return cls(tuple(d["edges_hz"]))
