"""Fit the log-compression constants to the adaptation-loop steady state.

A 1 kHz tone drives the channel nearest 1 kHz.  The IHC output at 0 dB SPL
is mapped onto the loops' floor (minlvl), and G, theta are chosen so the
mean steady output of G ln(1 + x / theta) equals the mean steady output of
the five-loop simulation at two anchor levels.

    python scripts/calibrate_log_compression.py src/nrhlc/auditory/data/log_compression.json
"""
import hashlib
import inspect
import json
import sys

import numpy as np
from scipy.optimize import brentq

from nrhlc.auditory import adaptation
from nrhlc.auditory.drnl import tone_level_to_amplitude
from nrhlc.auditory.model import AuditoryModel
from nrhlc.auditory.periphery import LogCompression, log_compression
from nrhlc.autodiff import no_grad

FS = 16000
TONE_HZ = 1000.0
THRESHOLD_DB = 0.0
ANCHORS_DB = (10.0, 100.0)
DURATION = 6.0
STEADY = slice(-FS // 2, None)  # last 0.5 s, after 11 time constants of the slowest loop


def oracle_hash() -> str:
    return hashlib.sha256(inspect.getsource(adaptation).encode()).hexdigest()


def ihc_output(level_db: float, channel: int, model: AuditoryModel) -> np.ndarray:
    t = np.arange(int(DURATION * FS)) / FS
    x = tone_level_to_amplitude(level_db) * np.sin(2 * np.pi * TONE_HZ * t)
    with no_grad():
        return model.ihc(x).value[channel]


def calibrate(model: AuditoryModel | None = None) -> dict:
    model = model or AuditoryModel()
    channel = int(np.argmin(np.abs(model.center_freqs - TONE_HZ)))
    x_thr = float(np.mean(ihc_output(THRESHOLD_DB, channel, model)[STEADY]))
    unit_to_loop = adaptation.MIN_LEVEL / x_thr
    xs = [ihc_output(level, channel, model) for level in ANCHORS_DB]
    targets = [float(np.mean(adaptation.adaptation_loops(x * unit_to_loop)[STEADY])) for x in xs]

    def steady(x, theta):
        return float(np.mean(log_compression(x, 0.0, LogCompression(1.0, theta), strict=False).value[STEADY]))

    ratio = targets[0] / targets[1]
    theta = brentq(lambda th: steady(xs[0], th) / steady(xs[1], th) - ratio, x_thr * 1e-6, x_thr * 1e8,
                   xtol=1e-14 * x_thr, rtol=1e-13)
    gain = targets[1] / steady(xs[1], theta)
    return {
        "gain": gain,
        "theta": theta,
        "anchor_levels_db_spl": list(ANCHORS_DB),
        "anchor_targets": targets,
        "threshold_level_db_spl": THRESHOLD_DB,
        "threshold_ihc_output": x_thr,
        "channel_fc_hz": float(model.center_freqs[channel]),
        "tone_hz": TONE_HZ,
        "oracle_sha256": oracle_hash(),
    }


if __name__ == "__main__":
    result = calibrate()
    text = json.dumps(result, indent=2) + "\n"
    if len(sys.argv) > 1:
        with open(sys.argv[1], "w") as fh:
            fh.write(text)
    print(text, end="")
