"""Dual-resonance nonlinear (DRNL) filterbank as FIR kernels plus a broken stick.

Per channel:

    linear     = g_lin * GT(cf_lin, n_gt_lin) * LP(lp_lin, n_lp_lin)
    nonlinear  = GT(cf_nlin, n_before) -> broken stick -> GT(cf_nlin, n_after) * LP(lp_nlin, n_lp_nlin)

Each gammatone cascade of n first-order stages is a single order-n gammatone;
each lowpass cascade is one linear-phase FIR matching n Butterworth stages.
Filters in series within a path are pre-convolved into one kernel.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .. import dsp
from ..autodiff import ops
from ..autodiff.tensor import Tensor

N_CHANNELS = 31
F_LOW, F_HIGH = 80.0, 7643.0
PA_PER_UNIT = 2.0  # digital RMS 1 == 100 dB SPL
P_REF = 20e-6
OHC_GAIN_FLOOR = 1e-6

_FLOAT_COLS = ("fc", "cf_lin", "bw_lin", "g_lin", "lp_lin", "cf_nlin", "bw_nlin", "lp_nlin", "a", "b", "c")
_INT_COLS = ("n_gt_lin", "n_lp_lin", "n_gt_nlin_before", "n_gt_nlin_after", "n_lp_nlin")


@dataclass(frozen=True)
class DrnlParams:
    """Per-channel DRNL parameters; every field is a (C,) array."""

    fc: np.ndarray
    cf_lin: np.ndarray
    bw_lin: np.ndarray
    g_lin: np.ndarray
    lp_lin: np.ndarray
    n_gt_lin: np.ndarray
    n_lp_lin: np.ndarray
    cf_nlin: np.ndarray
    bw_nlin: np.ndarray
    lp_nlin: np.ndarray
    n_gt_nlin_before: np.ndarray
    n_gt_nlin_after: np.ndarray
    n_lp_nlin: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    source: str = ""

    def __post_init__(self):
        n = len(self.fc)
        for name in _FLOAT_COLS + _INT_COLS:
            v = np.asarray(getattr(self, name))
            if v.shape != (n,):
                raise ValueError(f"DRNL parameter {name} has shape {v.shape}, expected ({n},)")
        for name in ("g_lin", "a", "b", "bw_lin", "bw_nlin"):
            if np.any(np.asarray(getattr(self, name)) <= 0):
                raise ValueError(f"DRNL parameter {name} must be positive")
        if np.any((np.asarray(self.c) <= 0) | (np.asarray(self.c) >= 1)):
            raise ValueError("compression exponent c must lie in (0, 1)")
        for name in ("cf_lin", "cf_nlin", "lp_lin", "lp_nlin"):
            v = np.asarray(getattr(self, name))
            if np.any(v <= 0) or np.any(v >= dsp.SAMPLE_RATE / 2):
                raise ValueError(f"DRNL parameter {name} must lie in (0, {dsp.SAMPLE_RATE // 2}) Hz")
        for name in _INT_COLS:
            if np.any(np.asarray(getattr(self, name)) < 1):
                raise ValueError(f"cascade count {name} must be >= 1")

    @property
    def n_channels(self) -> int:
        return len(self.fc)

    def channel(self, k: int) -> "DrnlParams":
        kw = {name: np.asarray(getattr(self, name))[k:k + 1] for name in _FLOAT_COLS + _INT_COLS}
        return DrnlParams(**kw, source=self.source)

    def replace(self, **changes) -> "DrnlParams":
        kw = {name: getattr(self, name) for name in _FLOAT_COLS + _INT_COLS}
        kw.update({k: np.asarray(v, dtype=np.float64) for k, v in changes.items()})
        return DrnlParams(**kw, source=self.source)


def load_drnl_params(path=None) -> DrnlParams:
    """Read the per-channel CSV table (defaults to the packaged one)."""
    if path is None:
        text = resources.files("nrhlc.auditory").joinpath("data/drnl_params.csv").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    rows = list(csv.DictReader(text.splitlines()))
    if not rows:
        raise ValueError("DRNL parameter table is empty")
    missing = set(_FLOAT_COLS + _INT_COLS) - set(rows[0])
    if missing:
        raise ValueError(f"DRNL parameter table lacks columns {sorted(missing)}")
    kw = {name: np.array([float(r[name]) for r in rows]) for name in _FLOAT_COLS}
    kw.update({name: np.array([int(r[name]) for r in rows]) for name in _INT_COLS})
    return DrnlParams(**kw, source=rows[0].get("source", ""))


# ----------------------------------------------------------------------------
# filters

@dataclass(frozen=True)
class DrnlKernels:
    """Path kernels, each (C, L): linear path incl. g_lin, nonlinear pre and post."""

    linear: np.ndarray
    pre: np.ndarray
    post: np.ndarray


def design_kernels(p: DrnlParams, length: int = dsp.FIR_LENGTH) -> DrnlKernels:
    lin, pre, post = [], [], []
    for k in range(p.n_channels):
        gt_lin = dsp.gammatone_fir(p.cf_lin[k], int(p.n_gt_lin[k]), length, p.bw_lin[k]).taps
        lp_lin = dsp.butterworth_cascade_fir(p.lp_lin[k], int(p.n_lp_lin[k]), length).taps
        lin.append(p.g_lin[k] * np.convolve(gt_lin, lp_lin))
        pre.append(dsp.gammatone_fir(p.cf_nlin[k], int(p.n_gt_nlin_before[k]), length, p.bw_nlin[k]).taps)
        gt_post = dsp.gammatone_fir(p.cf_nlin[k], int(p.n_gt_nlin_after[k]), length, p.bw_nlin[k]).taps
        lp_nlin = dsp.butterworth_cascade_fir(p.lp_nlin[k], int(p.n_lp_nlin[k]), length).taps
        post.append(np.convolve(gt_post, lp_nlin))
    return DrnlKernels(np.array(lin), np.array(pre), np.array(post))


def drnl(x, p: DrnlParams, kernels: DrnlKernels, ohc_gain=1.0) -> Tensor:
    """All channels at once: x (..., n) stapes velocity -> (..., C, n).

    `ohc_gain` multiplies the broken stick's low-level gain a; it is a
    scalar, (C,) or (..., C) array.
    """
    x = ops.reshape(x, x.shape[:-1] + (1, x.shape[-1]))
    gain = np.asarray(ohc_gain, dtype=np.float64)
    if gain.ndim:
        gain = gain[..., None]
    lin = ops.fir_conv(x, kernels.linear)
    nl = ops.fir_conv(x, kernels.pre)
    nl = ops.broken_stick(nl, p.a[:, None], p.b[:, None], p.c[:, None], gain)
    nl = ops.fir_conv(nl, kernels.post)
    return lin + nl


# ----------------------------------------------------------------------------
# OHC loss

def path_responses(p: DrnlParams, kernels: DrnlKernels, freqs=None) -> tuple[np.ndarray, np.ndarray]:
    """Complex low-level gains (L, N) of the linear and nonlinear paths at fc.

    Below the knee the broken stick is the linear gain a, so each path is
    LTI and its tone response is the kernels' frequency response.
    """
    freqs = p.fc if freqs is None else np.asarray(freqs, dtype=np.float64)
    L = np.array([dsp.freq_response(kernels.linear[k], freqs[k])[0] for k in range(p.n_channels)])
    N = np.array([p.a[k] * dsp.freq_response(kernels.pre[k], freqs[k])[0]
                  * dsp.freq_response(kernels.post[k], freqs[k])[0] for k in range(p.n_channels)])
    return L, N


def compute_ohc_max(p: DrnlParams, kernels: DrnlKernels | None = None) -> np.ndarray:
    """Low-level output drop (dB) at fc when the nonlinear path is removed."""
    kernels = design_kernels(p) if kernels is None else kernels
    L, N = path_responses(p, kernels)
    return np.maximum(0.0, 20 * np.log10(np.abs(L + N) / np.abs(L)))


def ohc_gain(hl_ohc, L: np.ndarray, N: np.ndarray) -> np.ndarray:
    """Broken-stick gain factor that lowers the low-level output at fc by hl_ohc dB.

    Solves |L + g N|^2 = |L + N|^2 10^(-hl/10) for its largest root g in
    [0, 1]; hl_ohc = 0 gives exactly 1.  Losses beyond what the path can
    express (hl above compute_ohc_max) saturate at the floor.
    """
    hl = np.asarray(hl_ohc, dtype=np.float64)
    target = np.abs(L + N) ** 2 * 10 ** (-hl / 10)
    qa = np.abs(N) ** 2
    qb = 2 * np.real(L * np.conj(N))
    qc = np.abs(L) ** 2 - target
    disc = np.maximum(qb ** 2 - 4 * qa * qc, 0.0)
    g = (-qb + np.sqrt(disc)) / (2 * qa)
    g = np.clip(g, OHC_GAIN_FLOOR, 1.0)
    return np.where(hl == 0, 1.0, g)


def tone_level_to_amplitude(level_db_spl: float) -> float:
    """Peak amplitude (model units) of a sinusoid at the given dB SPL."""
    return np.sqrt(2) * P_REF * 10 ** (level_db_spl / 20) / PA_PER_UNIT
