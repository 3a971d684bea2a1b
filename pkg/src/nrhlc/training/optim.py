"""Adam, global-norm gradient clipping and the step-wise learning-rate schedule."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import floor

import numpy as np

LR0 = 1e-3
LR_DECAY = 0.99
DECAY_EVERY = 10_000
CLIP_NORM = 5.0


def global_norm(grads) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(g))) for g in grads.values())))


def clip_gradients(grads, max_norm: float = CLIP_NORM):
    """Rescale every gradient by max_norm / norm when the joint L2 norm exceeds max_norm.

    Returns a mapping of the same type; the input is left untouched.
    """
    norm = global_norm(grads)
    out = type(grads)()
    scale = max_norm / norm if norm > max_norm else 1.0
    for k, g in grads.items():
        out[k] = g * scale if scale != 1.0 else g
    return out


def lr_at(scene_count: int, lr0: float = LR0, decay: float = LR_DECAY, every: int = DECAY_EVERY) -> float:
    if scene_count < 0:
        raise ValueError("scene_count must be non-negative")
    return lr0 * decay ** floor(scene_count / every)


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def arrays(self) -> dict:
        out = {f"m/{k}": a for k, a in self.m.items()}
        out.update({f"v/{k}": a for k, a in self.v.items()})
        return out

    def meta(self) -> dict:
        return {"beta1": self.beta1, "beta2": self.beta2, "eps": self.eps, "step": self.step}

    @classmethod
    def restore(cls, meta: dict, arrays: dict) -> "AdamState":
        st = cls(meta["beta1"], meta["beta2"], meta["eps"], int(meta["step"]))
        for key, a in arrays.items():
            kind, name = key.split("/", 1)
            getattr(st, kind)[name] = np.array(a)
        return st


def adam_step(params: dict, grads: dict, state: AdamState, lr: float,
              lr_scale: dict | None = None) -> AdamState:
    """Bias-corrected Adam update of params[name].value in place.

    `params` maps names to Tensors; `grads` maps the same names to arrays.
    Parameters without a gradient are treated as having zero gradient.
    `lr_scale` optionally multiplies the learning rate per parameter name.
    """
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.value)
        if g.shape != p.value.shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != parameter shape {p.value.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.value)
            state.v[name] = np.zeros_like(p.value)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        step = lr * (lr_scale or {}).get(name, 1.0)
        p.value = p.value - step * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state
