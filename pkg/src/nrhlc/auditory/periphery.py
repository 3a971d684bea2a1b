"""Middle ear, inner-hair-cell transduction and instantaneous log compression."""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np
import scipy.signal

from .. import dsp
from ..autodiff import ops
from ..autodiff.tensor import Tensor, as_tensor, make_output
from .drnl import P_REF, PA_PER_UNIT

# Peak stapes velocity (m/s) for a 0 dB SPL tone, Lopez-Poveda & Meddis (2001).
STAPES_VELOCITY = np.array([
    [100.0, 1.181e-09], [200.0, 2.363e-09], [400.0, 4.728e-09], [600.0, 7.577e-09],
    [800.0, 1.000e-08], [1000.0, 8.235e-09], [1200.0, 6.240e-09], [1400.0, 5.585e-09],
    [1600.0, 5.000e-09], [1800.0, 4.232e-09], [2000.0, 3.787e-09], [2200.0, 3.000e-09],
    [2400.0, 2.715e-09], [2600.0, 2.498e-09], [2800.0, 2.174e-09], [3000.0, 1.893e-09],
    [3500.0, 1.742e-09], [4000.0, 1.516e-09], [4500.0, 1.117e-09], [5000.0, 1.320e-09],
    [5500.0, 1.214e-09], [6000.0, 9.726e-10], [6500.0, 9.460e-10], [7000.0, 8.705e-10],
    [7500.0, 8.000e-10], [8000.0, 7.577e-10],
])
IHC_CUTOFF = 1000.0


def _middle_ear_gain(freqs: np.ndarray) -> np.ndarray:
    """Stapes velocity per model unit, log-log interpolated, proportional to f below 100 Hz."""
    f_tab, v_tab = STAPES_VELOCITY[:, 0], STAPES_VELOCITY[:, 1]
    v = np.empty_like(freqs)
    low = freqs < f_tab[0]
    v[low] = v_tab[0] * freqs[low] / f_tab[0]
    v[~low] = np.exp(np.interp(np.log(freqs[~low]), np.log(f_tab), np.log(v_tab)))
    return v * PA_PER_UNIT / P_REF


@lru_cache(maxsize=None)
def _middle_ear_taps(length: int) -> np.ndarray:
    freqs = np.linspace(0.0, dsp.SAMPLE_RATE / 2, 1025)
    gain = _middle_ear_gain(freqs)
    gain[-1] = 0.0
    taps = scipy.signal.firwin2(length, freqs, gain, fs=dsp.SAMPLE_RATE)
    taps.flags.writeable = False
    return taps


def middle_ear_taps(length: int = dsp.FIR_LENGTH) -> np.ndarray:
    """Linear-phase FIR from model units (2 Pa) to stapes velocity (m/s)."""
    return _middle_ear_taps(length)


def middle_ear(x, bypass: bool = False):
    """Apply the middle-ear filter to a Tensor, array or AudioSignal along its last axis."""
    if bypass:
        return x
    if isinstance(x, Tensor):
        return ops.fir_conv(x, middle_ear_taps())
    return dsp.fir_apply(x, middle_ear_taps())


@lru_cache(maxsize=None)
def ihc_lowpass_taps(length: int = dsp.FIR_LENGTH) -> np.ndarray:
    taps = dsp.lowpass_fir(IHC_CUTOFF, length).taps
    taps.flags.writeable = False
    return taps


def ihc_transduction(x) -> Tensor:
    """Half-wave rectification followed by a 1 kHz lowpass."""
    return ops.fir_conv(ops.relu(x), ihc_lowpass_taps())


# ----------------------------------------------------------------------------
# log compression

@dataclass(frozen=True)
class LogCompression:
    """y = gain * ln(1 + x / theta), calibrated offline against adaptation loops."""

    gain: float
    theta: float

    def __post_init__(self):
        if not (self.gain > 0 and self.theta > 0):
            raise ValueError("log-compression gain and theta must be positive")


@lru_cache(maxsize=None)
def default_log_compression() -> LogCompression:
    raw = resources.files("nrhlc.auditory").joinpath("data/log_compression.json").read_text()
    d = json.loads(raw)
    return LogCompression(d["gain"], d["theta"])


def log_compression(x, hl_ihc=0.0, params: LogCompression | None = None, strict: bool = True) -> Tensor:
    """G ln(1 + g_ihc x / theta0) with g_ihc = 10^(-hl_ihc/20).

    `hl_ihc` broadcasts against x with a trailing time axis appended, so a
    (C,) or (B, C) loss applies to (..., C, n) input.  With ``strict`` a
    negative input raises; otherwise the curve is extended as an odd
    function, which keeps small negative lowpass ripple well defined.
    """
    x = as_tensor(x)
    params = params or default_log_compression()
    hl = np.asarray(hl_ihc, dtype=np.float64)
    if np.any(hl < 0):
        raise ValueError("IHC loss must be non-negative")
    scale = 10 ** (-hl / 20) / params.theta
    if scale.ndim:
        scale = scale[..., None]
    v = x.value
    if strict and np.any(v < 0):
        raise ValueError("log_compression expects non-negative input")
    av = np.abs(v)
    out = params.gain * np.sign(v) * np.log1p(scale * av)

    def vjp(g):
        return (ops.unbroadcast(g * params.gain * scale / (1.0 + scale * av), x.shape),)
    return make_output(out, (x,), vjp, "log_compression")
