"""Reference simulation of five feedback adaptation loops.

Used only offline to calibrate the instantaneous log compression (see
scripts/calibrate_log_compression.py) and in its tests; it is not a runtime
stage of the auditory model.
"""
from __future__ import annotations

import numpy as np

TIME_CONSTANTS = (0.005, 0.050, 0.129, 0.253, 0.500)
MIN_LEVEL = 1e-5


def adaptation_loops(u: np.ndarray, fs: float = 16000.0, taus=TIME_CONSTANTS,
                     minlvl: float = MIN_LEVEL) -> np.ndarray:
    """Run the divisive loop chain sample by sample along the last axis of `u`.

    Each stage divides by its state and the state low-passes the stage
    output.  States start at the floor's steady state.  Output is scaled so
    that `minlvl` maps to 0 and 1 maps to 100; before scaling, the steady
    state of the chain is u ** (1 / 2 ** len(taus)).
    """
    u = np.maximum(np.asarray(u, dtype=np.float64), minlvl)
    n_stages = len(taus)
    a1 = np.exp(-1.0 / (np.asarray(taus) * fs))
    b0 = 1.0 - a1
    lead = u.shape[:-1]
    state = [np.full(lead, minlvl ** (1.0 / 2 ** (k + 1))) for k in range(n_stages)]
    out = np.empty_like(u)
    for t in range(u.shape[-1]):
        tmp = u[..., t]
        for k in range(n_stages):
            tmp = tmp / state[k]
            state[k] = a1[k] * state[k] + b0[k] * tmp
        out[..., t] = tmp
    corr = minlvl ** (1.0 / 2 ** n_stages)
    return (out - corr) * 100.0 / (1.0 - corr)


def steady_state(u: float, n_stages: int = len(TIME_CONSTANTS), minlvl: float = MIN_LEVEL) -> float:
    """Closed-form steady output for a constant input."""
    corr = minlvl ** (1.0 / 2 ** n_stages)
    return (max(u, minlvl) ** (1.0 / 2 ** n_stages) - corr) * 100.0 / (1.0 - corr)
