"""Signal-processing primitives shared by the processor and the auditory model.

STFT/iSTFT with Hann windows, FIR design (gammatone, windowed-sinc and
cascade lowpass) and causal FFT convolution, plus ERB-rate helpers.
All arrays are float64 / complex128.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft
import scipy.signal

SAMPLE_RATE = 16000
FIR_LENGTH = 512  # 32 ms at 16 kHz


@dataclass(frozen=True)
class AudioSignal:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"AudioSignal must be mono, got shape {samples.shape}")
        if self.sample_rate != SAMPLE_RATE:
            raise ValueError(f"sample rate must be {SAMPLE_RATE} Hz, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("AudioSignal contains NaN or Inf")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class StftConfig:
    frame_len: int = 512
    hop: int = 256

    def __post_init__(self):
        if self.frame_len % 2 or self.hop * 2 != self.frame_len:
            raise ValueError("hop must be half of an even frame length")

    @property
    def n_bins(self) -> int:
        return self.frame_len // 2 + 1

    @property
    def window(self) -> np.ndarray:
        return hann(self.frame_len)

    def n_frames(self, length: int) -> int:
        pad = self.frame_len - self.hop
        return -(-(length + pad) // self.hop)


@dataclass
class Spectrogram:
    bins: np.ndarray  # complex (..., F, T)
    config: StftConfig = field(default_factory=StftConfig)
    length: int = 0  # samples of the analysed signal

    def __post_init__(self):
        if self.bins.shape[-2] != self.config.n_bins:
            raise ValueError(
                f"spectrogram has {self.bins.shape[-2]} bins, config expects {self.config.n_bins}")


def hann(n: int) -> np.ndarray:
    """Periodic Hann window (COLA at 50 % overlap)."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _as_array(signal) -> np.ndarray:
    if isinstance(signal, AudioSignal):
        return signal.samples
    return np.asarray(signal, dtype=np.float64)


# ----------------------------------------------------------------------------
# STFT
#
# The signal is padded with frame_len - hop zeros on the left and enough zeros
# on the right to complete the frame grid, so every input sample is covered by
# two frames and synthesis is exact up to rounding across the whole signal.

def _padding(length: int, cfg: StftConfig) -> tuple[int, int]:
    left = cfg.frame_len - cfg.hop
    total = (cfg.n_frames(length) - 1) * cfg.hop + cfg.frame_len
    return left, total - length - left


def _window_sum(length: int, cfg: StftConfig) -> np.ndarray:
    n_frames = cfg.n_frames(length)
    left, right = _padding(length, cfg)
    acc = np.zeros(left + length + right)
    w2 = cfg.window ** 2
    for t in range(n_frames):
        acc[t * cfg.hop:t * cfg.hop + cfg.frame_len] += w2
    return acc[left:left + length]


def _overlap_add(frames: np.ndarray, cfg: StftConfig, length: int) -> np.ndarray:
    """Sum frames (..., T, frame_len) into a padded buffer and trim to `length`."""
    n_frames = frames.shape[-2]
    left, right = _padding(length, cfg)
    out = np.zeros(frames.shape[:-2] + (left + length + right,))
    hop, flen = cfg.hop, cfg.frame_len
    # two interleaved passes: frames of equal parity never overlap
    for parity in (0, 1):
        sel = frames[..., parity::2, :]
        k = sel.shape[-2]
        if k == 0:
            continue
        start = parity * hop
        view = out[..., start:start + k * flen].reshape(out.shape[:-1] + (k, flen))
        view += sel
    return out[..., left:left + length]


def stft_array(x: np.ndarray, cfg: StftConfig = StftConfig()) -> np.ndarray:
    """Complex one-sided STFT of the last axis, shape (..., F, T)."""
    x = np.asarray(x, dtype=np.float64)
    length = x.shape[-1]
    if length < cfg.frame_len:
        raise ValueError(f"input too short: {length} samples < frame length {cfg.frame_len}")
    left, right = _padding(length, cfg)
    pad = [(0, 0)] * (x.ndim - 1) + [(left, right)]
    xp = np.pad(x, pad)
    frames = np.lib.stride_tricks.sliding_window_view(xp, cfg.frame_len, axis=-1)[..., ::cfg.hop, :]
    spec = scipy.fft.rfft(frames * cfg.window, axis=-1)
    return np.swapaxes(spec, -1, -2)


def stft_adjoint(grad: np.ndarray, length: int, cfg: StftConfig = StftConfig()) -> np.ndarray:
    """Vector-Jacobian product of `stft_array` for a complex cotangent (re + 1j*im)."""
    g = np.swapaxes(grad, -1, -2).copy()  # (..., T, F)
    g[..., 1:-1] *= 0.5
    frames = scipy.fft.irfft(g, n=cfg.frame_len, axis=-1) * cfg.frame_len
    return _overlap_add(frames * cfg.window, cfg, length)


def istft_array(spec: np.ndarray, length: int, cfg: StftConfig = StftConfig()) -> np.ndarray:
    """Weighted overlap-add synthesis, normalised by the summed squared window."""
    if spec.shape[-2] != cfg.n_bins:
        raise ValueError(f"spectrogram has {spec.shape[-2]} bins, config expects {cfg.n_bins}")
    if spec.shape[-1] != cfg.n_frames(length):
        raise ValueError(
            f"spectrogram has {spec.shape[-1]} frames, length {length} needs {cfg.n_frames(length)}")
    frames = scipy.fft.irfft(np.swapaxes(spec, -1, -2), n=cfg.frame_len, axis=-1)
    return _overlap_add(frames * cfg.window, cfg, length) / _window_sum(length, cfg)


def istft_adjoint(grad: np.ndarray, cfg: StftConfig = StftConfig()) -> np.ndarray:
    """Vector-Jacobian product of `istft_array`; returns a complex cotangent (..., F, T)."""
    length = grad.shape[-1]
    g = np.asarray(grad, dtype=np.float64) / _window_sum(length, cfg)
    left, right = _padding(length, cfg)
    pad = [(0, 0)] * (g.ndim - 1) + [(left, right)]
    gp = np.pad(g, pad)
    frames = np.lib.stride_tricks.sliding_window_view(gp, cfg.frame_len, axis=-1)[..., ::cfg.hop, :]
    out = scipy.fft.rfft(frames * cfg.window, axis=-1)
    scale = np.full(cfg.n_bins, 2.0 / cfg.frame_len)
    scale[0] = scale[-1] = 1.0 / cfg.frame_len
    out = out * scale
    # irfft ignores the imaginary part of the DC and Nyquist bins
    out[..., 0] = out[..., 0].real
    out[..., -1] = out[..., -1].real
    return np.swapaxes(out, -1, -2)


def stft(signal, cfg: StftConfig = StftConfig()) -> Spectrogram:
    x = _as_array(signal)
    return Spectrogram(stft_array(x, cfg), cfg, x.shape[-1])


def istft(spec: Spectrogram) -> AudioSignal | np.ndarray:
    out = istft_array(spec.bins, spec.length, spec.config)
    return AudioSignal(out) if out.ndim == 1 else out


# ----------------------------------------------------------------------------
# ERB scale

def erb_rate(f):
    """Glasberg & Moore ERB-number: 21.4 * log10(1 + 0.00437 f)."""
    f = np.asarray(f, dtype=np.float64)
    if np.any(f <= 0):
        raise ValueError("frequency must be positive")
    out = 21.4 * np.log10(1.0 + 0.00437 * f)
    return float(out) if out.ndim == 0 else out


def erb_rate_inverse(e):
    e = np.asarray(e, dtype=np.float64)
    return (10.0 ** (e / 21.4) - 1.0) / 0.00437


def erb_bandwidth(f):
    """Equivalent rectangular bandwidth in Hz: 24.7 * (4.37 f / 1000 + 1)."""
    return 24.7 * (0.00437 * np.asarray(f, dtype=np.float64) + 1.0)


def erb_space(f_lo: float, f_hi: float, n: int) -> np.ndarray:
    if not 0 < f_lo < f_hi:
        raise ValueError(f"invalid frequency range ({f_lo}, {f_hi})")
    if n < 2:
        raise ValueError("need at least two frequencies")
    e = np.linspace(erb_rate(f_lo), erb_rate(f_hi), n)
    out = erb_rate_inverse(e)
    out[0], out[-1] = f_lo, f_hi
    return out


# ----------------------------------------------------------------------------
# FIR design

@dataclass(frozen=True)
class FirFilter:
    taps: np.ndarray
    center_freq: float | None = None

    def __len__(self) -> int:
        return self.taps.shape[0]


def freq_response(taps: np.ndarray, freqs, fs: float = SAMPLE_RATE) -> np.ndarray:
    """Complex DTFT of `taps` at the given frequencies (Hz)."""
    freqs = np.atleast_1d(np.asarray(freqs, dtype=np.float64))
    n = np.arange(taps.shape[-1])
    return np.exp(-2j * np.pi * np.outer(freqs, n) / fs) @ taps


def gammatone_fir(fc: float, order: int = 4, length: int = FIR_LENGTH,
                  bandwidth: float | None = None, fs: float = SAMPLE_RATE) -> FirFilter:
    """Truncated gammatone impulse response, 0 dB at `fc`.

    `bandwidth` is the decay parameter in Hz; defaults to 1.019 * ERB(fc).
    """
    if not 0 < fc < fs / 2:
        raise ValueError(f"center frequency {fc} Hz outside (0, {fs / 2})")
    if order < 1:
        raise ValueError("gammatone order must be >= 1")
    b = 1.019 * erb_bandwidth(fc) if bandwidth is None else bandwidth
    t = np.arange(length) / fs
    taps = t ** (order - 1) * np.exp(-2 * np.pi * b * t) * np.cos(2 * np.pi * fc * t)
    if order == 1:
        taps[0] = 1.0
    taps /= np.abs(freq_response(taps, fc, fs))[0]
    return FirFilter(taps, fc)


def lowpass_fir(cutoff: float, length: int = FIR_LENGTH, fs: float = SAMPLE_RATE) -> FirFilter:
    """Linear-phase Hann-windowed sinc lowpass with unit DC gain (-6 dB at cutoff)."""
    if not 0 < cutoff < fs / 2:
        raise ValueError(f"cutoff {cutoff} Hz outside (0, {fs / 2})")
    n = np.arange(length) - (length - 1) / 2
    taps = 2 * cutoff / fs * np.sinc(2 * cutoff / fs * n)
    taps *= np.hanning(length)
    taps /= taps.sum()
    return FirFilter(taps)


def butterworth_cascade_fir(cutoff: float, n_cascade: int, length: int = FIR_LENGTH,
                            fs: float = SAMPLE_RATE) -> FirFilter:
    """Single linear-phase FIR matching the magnitude of `n_cascade` 2nd-order
    Butterworth lowpasses, so paths with different cascade counts share one delay."""
    if not 0 < cutoff < fs / 2:
        raise ValueError(f"cutoff {cutoff} Hz outside (0, {fs / 2})")
    freqs = np.linspace(0.0, fs / 2, 1025)
    gain = (1.0 + (freqs / cutoff) ** 4) ** (-n_cascade / 2)
    gain[-1] = 0.0  # even-length linear-phase filters vanish at Nyquist
    taps = scipy.signal.firwin2(length, freqs, gain, fs=fs)
    return FirFilter(taps)


# ----------------------------------------------------------------------------
# FIR application

def _fft_len(n: int) -> int:
    return scipy.fft.next_fast_len(n, real=True)


def causal_conv(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Causal convolution along the last axis, output truncated to the input length.

    `taps` is (L,) or (..., L) and broadcasts against x's leading axes.
    """
    n = x.shape[-1]
    nfft = _fft_len(n + taps.shape[-1] - 1)
    spec = scipy.fft.rfft(x, nfft, axis=-1) * scipy.fft.rfft(taps, nfft, axis=-1)
    return scipy.fft.irfft(spec, nfft, axis=-1)[..., :n]


def causal_conv_adjoint(g: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Adjoint of `causal_conv` in x: correlation of g with the taps."""
    n = g.shape[-1]
    nfft = _fft_len(n + taps.shape[-1] - 1)
    spec = scipy.fft.rfft(g, nfft, axis=-1) * np.conj(scipy.fft.rfft(taps, nfft, axis=-1))
    return scipy.fft.irfft(spec, nfft, axis=-1)[..., :n]


def fir_apply(signal, fir: FirFilter | np.ndarray):
    taps = fir.taps if isinstance(fir, FirFilter) else np.asarray(fir, dtype=np.float64)
    x = _as_array(signal)
    out = causal_conv(x, taps)
    return AudioSignal(out) if isinstance(signal, AudioSignal) else out
