"""LSTM as a differentiable op.

`lstm_cell` is built from primitives and serves as the reference;
`lstm_sequence` runs the whole recurrence in one fused op backed by the
compiled (or numpy) kernel.  Gate order is [input, forget, cell, output];
no peepholes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels
from . import ops
from .tensor import Tensor, as_tensor, make_output


@dataclass
class LstmWeights:
    w_ih: Tensor  # (I, 4H)
    w_hh: Tensor  # (H, 4H)
    bias: Tensor  # (4H,)

    @property
    def hidden(self) -> int:
        return self.w_hh.shape[0]

    @classmethod
    def init(cls, n_in: int, hidden: int, rng: np.random.Generator, prefix: str = "") -> "LstmWeights":
        """Uniform(-1/sqrt(H), 1/sqrt(H)) weights, forget-gate bias 1."""
        k = 1.0 / np.sqrt(hidden)
        bias = np.zeros(4 * hidden)
        bias[hidden:2 * hidden] = 1.0
        return cls(Tensor(rng.uniform(-k, k, (n_in, 4 * hidden)), True, prefix + "w_ih"),
                   Tensor(rng.uniform(-k, k, (hidden, 4 * hidden)), True, prefix + "w_hh"),
                   Tensor(bias, True, prefix + "bias"))

    def tensors(self) -> dict:
        return {"w_ih": self.w_ih, "w_hh": self.w_hh, "bias": self.bias}


def _check(x: Tensor, h: Tensor, w: LstmWeights):
    H = w.hidden
    if w.w_ih.shape != (x.shape[-1], 4 * H) or w.w_hh.shape != (H, 4 * H) or w.bias.shape != (4 * H,):
        raise ValueError(
            f"LSTM weight shapes {w.w_ih.shape}, {w.w_hh.shape}, {w.bias.shape} "
            f"do not fit input dim {x.shape[-1]} and hidden {H}")
    if h.shape[-1] != H:
        raise ValueError(f"hidden state has size {h.shape[-1]}, weights expect {H}")


def lstm_cell(x_t, h_prev, c_prev, w: LstmWeights) -> tuple[Tensor, Tensor]:
    """One LSTM step from primitives: x_t (S, I), h_prev / c_prev (S, H)."""
    x_t, h_prev, c_prev = as_tensor(x_t), as_tensor(h_prev), as_tensor(c_prev)
    _check(x_t, h_prev, w)
    H = w.hidden
    z = ops.add(ops.add(ops.matmul(x_t, w.w_ih), ops.matmul(h_prev, w.w_hh)), w.bias)
    i = ops.sigmoid(z[:, :H])
    f = ops.sigmoid(z[:, H:2 * H])
    g = ops.tanh(z[:, 2 * H:3 * H])
    o = ops.sigmoid(z[:, 3 * H:])
    c = f * c_prev + i * g
    h = o * ops.tanh(c)
    return h, c


def _recurrence(xw: Tensor, w_hh: Tensor, h0: np.ndarray, c0: np.ndarray) -> Tensor:
    h_all, c_all, gates = _kernels.lstm_forward(
        np.ascontiguousarray(xw.value), np.ascontiguousarray(w_hh.value), h0, c0)

    def vjp(g):
        dxw, dw_hh, _, _ = _kernels.lstm_backward(
            np.ascontiguousarray(g), np.ascontiguousarray(w_hh.value), h0, c0, h_all, c_all, gates)
        return dxw, dw_hh
    return make_output(h_all, (xw, w_hh), vjp, "lstm_recurrence")


def lstm_sequence(x, w: LstmWeights, reverse: bool = False) -> Tensor:
    """Run an LSTM over axis 1 of x (S, T, I) from zero state; returns (S, T, H)."""
    x = as_tensor(x)
    if x.ndim != 3:
        raise ValueError(f"lstm_sequence expects (S, T, I), got {x.shape}")
    h0 = np.zeros((x.shape[0], w.hidden))
    _check(x, Tensor(h0), w)
    if reverse:
        x = ops.flip(x, 1)
    xw = ops.add(ops.matmul(x, w.w_ih), w.bias)
    h = _recurrence(xw, w.w_hh, h0, h0.copy())
    return ops.flip(h, 1) if reverse else h
