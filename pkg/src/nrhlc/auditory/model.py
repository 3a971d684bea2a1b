"""The assembled auditory model: middle ear, DRNL, IHC, log compression."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .. import dsp
from ..autodiff.tensor import Tensor, as_tensor
from .audiogram import Audiogram, HearingLossProfile, interpolate_audiogram, split_hearing_loss
from .drnl import (DrnlParams, compute_ohc_max, design_kernels, drnl, load_drnl_params,
                   ohc_gain, path_responses)
from .periphery import LogCompression, default_log_compression, ihc_transduction, log_compression, middle_ear


def _thresholds(audiograms, batch: tuple) -> np.ndarray:
    """Normalise None / Audiogram / sequence / array into a (..., 10) threshold array."""
    if audiograms is None:
        return np.zeros(batch + (10,))
    if isinstance(audiograms, Audiogram):
        return audiograms.thresholds
    if isinstance(audiograms, (list, tuple)):
        return np.stack([Audiogram(a).thresholds if not isinstance(a, Audiogram) else a.thresholds
                         for a in audiograms])
    thr = np.asarray(audiograms, dtype=np.float64)
    for row in thr.reshape(-1, thr.shape[-1]):
        Audiogram(row)
    return thr


class AuditoryModel:
    """Immutable once built; `run` is pure and may be called from several threads."""

    def __init__(self, params: DrnlParams | None = None, compression: LogCompression | None = None,
                 bypass_middle_ear: bool = False):
        self.params = params if params is not None else load_drnl_params()
        self.kernels = design_kernels(self.params)
        self.compression = compression
        self.bypass_middle_ear = bypass_middle_ear
        self.lin_response, self.nlin_response = path_responses(self.params, self.kernels)
        self.ohc_max = compute_ohc_max(self.params, self.kernels)

    @property
    def center_freqs(self) -> np.ndarray:
        return self.params.fc.copy()

    def hearing_loss(self, audiograms=None, batch: tuple = ()) -> HearingLossProfile:
        thr = _thresholds(audiograms, batch)
        return split_hearing_loss(interpolate_audiogram(thr, self.params.fc), self.ohc_max)

    def gains(self, audiograms=None, batch: tuple = ()) -> tuple[np.ndarray, np.ndarray]:
        """(ohc_gain, hl_ihc) per channel, shaped (..., C)."""
        prof = self.hearing_loss(audiograms, batch)
        return ohc_gain(prof.hl_ohc, self.lin_response, self.nlin_response), prof.hl_ihc

    def basilar_membrane(self, x, audiograms=None) -> Tensor:
        """Pre-compression DRNL output (..., C, n)."""
        x = as_tensor(x)
        g_ohc, _ = self.gains(audiograms, x.shape[:-1])
        return drnl(middle_ear(x, self.bypass_middle_ear), self.params, self.kernels, g_ohc)

    def ihc(self, x, audiograms=None) -> Tensor:
        return ihc_transduction(self.basilar_membrane(x, audiograms))

    def run(self, x, audiograms=None) -> Tensor:
        """Internal representation (..., C, n) of x (..., n).

        `audiograms` is None (normal hearing), one Audiogram shared by the
        batch, a sequence of Audiograms, or a (..., 10) threshold array.
        """
        x = as_tensor(x)
        if x.ndim < 1 or x.shape[-1] == 0:
            raise ValueError("auditory model needs a non-empty signal")
        g_ohc, hl_ihc = self.gains(audiograms, x.shape[:-1])
        bm = drnl(middle_ear(x, self.bypass_middle_ear), self.params, self.kernels, g_ohc)
        return log_compression(ihc_transduction(bm), hl_ihc,
                               self.compression or default_log_compression(), strict=False)

    __call__ = run


@lru_cache(maxsize=1)
def default_model() -> AuditoryModel:
    return AuditoryModel()


def run_model(signal, audiogram=None) -> Tensor:
    """Run the default model; accepts AudioSignal, array or Tensor input."""
    if isinstance(signal, dsp.AudioSignal):
        signal = signal.samples
    return default_model().run(signal, audiogram)

