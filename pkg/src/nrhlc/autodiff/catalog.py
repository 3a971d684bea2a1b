"""Scalar probe functions exercising every autodiff primitive.

Each entry maps a name to (make_input(rng), f(x) -> scalar Tensor, n_probes).
n_probes None means every coordinate is checked.
"""
import numpy as np

from nrhlc.autodiff import LstmWeights, Tensor, lstm_sequence, ops
from nrhlc.dsp import StftConfig


def _proj(y, seed=1099):
    w = np.random.default_rng(seed).standard_normal(y.shape)
    return ops.sum(ops.mul(y, w))


def _away_from_zero(rng, shape, lo=0.2):
    x = rng.uniform(lo, 1.5, shape)
    return x * rng.choice([-1.0, 1.0], shape)


_B = np.random.default_rng(107).standard_normal((3, 4))
_BPOS = np.random.default_rng(108).uniform(0.5, 2.0, (3, 4))
_M = np.random.default_rng(109).standard_normal((4, 5))
_TAPS = np.random.default_rng(1010).standard_normal((2, 16))
_CFG = StftConfig()
_LSTM = LstmWeights.init(3, 4, np.random.default_rng(1011))


def _lstm_f(x):
    return _proj(lstm_sequence(x, _LSTM)) + _proj(lstm_sequence(x, _LSTM, reverse=True), 1005)


def _lstm_w(x):
    w = LstmWeights(x, _LSTM.w_hh, _LSTM.bias)
    return _proj(lstm_sequence(Tensor(np.random.default_rng(1012).standard_normal((2, 5, 3))), w))


def _stft_mag(x):
    return _proj(ops.stft(x, _CFG))


def _istft(x):
    return _proj(ops.istft(x, 1100, _CFG))


PRIMITIVES = {
    "add": (lambda r: r.standard_normal((3, 4)), lambda x: _proj(ops.add(x, _B)), None),
    "add_broadcast": (lambda r: r.standard_normal(4), lambda x: _proj(ops.add(_B, x)), None),
    "sub": (lambda r: r.standard_normal((3, 4)), lambda x: _proj(ops.sub(_B, x)), None),
    "mul": (lambda r: r.standard_normal((3, 4)), lambda x: _proj(ops.mul(x, x + _B)), None),
    "div_num": (lambda r: r.standard_normal((3, 4)), lambda x: _proj(ops.div(x, _BPOS)), None),
    "div_den": (lambda r: r.uniform(0.5, 2, (3, 4)), lambda x: _proj(ops.div(_B, x)), None),
    "neg": (lambda r: r.standard_normal(5), lambda x: _proj(ops.neg(x)), None),
    "matmul_left": (lambda r: r.standard_normal((3, 4)), lambda x: _proj(ops.matmul(x, _M)), None),
    "matmul_right": (lambda r: r.standard_normal((4, 5)), lambda x: _proj(ops.matmul(_B, x)), None),
    "matmul_batched": (lambda r: r.standard_normal((2, 3, 4)), lambda x: _proj(ops.matmul(x, _M)), None),
    "relu": (lambda r: _away_from_zero(r, 8), lambda x: _proj(ops.relu(x)), None),
    "tanh": (lambda r: r.standard_normal(8), lambda x: _proj(ops.tanh(x)), None),
    "sigmoid": (lambda r: 2 * r.standard_normal(8), lambda x: _proj(ops.sigmoid(x)), None),
    "exp": (lambda r: r.standard_normal(8), lambda x: _proj(ops.exp(x)), None),
    "log": (lambda r: r.uniform(0.2, 3, 8), lambda x: _proj(ops.log(x)), None),
    "log1p": (lambda r: r.uniform(-0.7, 3, 8), lambda x: _proj(ops.log1p(x)), None),
    "abs": (lambda r: _away_from_zero(r, 8), lambda x: _proj(ops.abs(x)), None),
    "square": (lambda r: r.standard_normal(8), lambda x: _proj(ops.square(x)), None),
    "pow_abs": (lambda r: _away_from_zero(r, 8), lambda x: _proj(ops.pow_abs(x, 0.3)), None),
    "minimum": (lambda r: r.standard_normal((3, 4)), lambda x: _proj(ops.minimum(x, _B)), None),
    "broken_stick": (lambda r: _away_from_zero(r, 10, 1e-3) * 10.0 ** r.uniform(-4, 0, 10),
                     lambda x: _proj(ops.broken_stick(x, 200.0, 2.0, 0.25, 0.7)), None),
    "sum_axis": (lambda r: r.standard_normal((3, 4)), lambda x: _proj(ops.sum(x, axis=1)), None),
    "sum_keepdims": (lambda r: r.standard_normal((3, 4)), lambda x: _proj(ops.sum(x, 0, keepdims=True)), None),
    "mean": (lambda r: r.standard_normal((3, 4)), lambda x: _proj(ops.mean(x, axis=(0, 1))), None),
    "standardize": (lambda r: r.standard_normal((3, 5)), lambda x: _proj(ops.standardize(x)), None),
    "reshape": (lambda r: r.standard_normal((3, 4)), lambda x: _proj(ops.reshape(x, (2, 6))), None),
    "transpose": (lambda r: r.standard_normal((2, 3, 4)), lambda x: _proj(ops.transpose(x, (2, 0, 1))), None),
    "swapaxes": (lambda r: r.standard_normal((2, 3, 4)), lambda x: _proj(ops.swapaxes(x, 0, 2)), None),
    "flip": (lambda r: r.standard_normal((3, 4)), lambda x: _proj(ops.flip(x, 1)), None),
    "getitem_slice": (lambda r: r.standard_normal((4, 5)), lambda x: _proj(x[1:3, ::2]), None),
    "getitem_fancy": (lambda r: r.standard_normal(6), lambda x: _proj(x[np.array([0, 2, 2, 5])]), None),
    "concat": (lambda r: r.standard_normal((2, 3)), lambda x: _proj(ops.concat([x, x * 2.0], axis=1)), None),
    "stack": (lambda r: r.standard_normal(4), lambda x: _proj(ops.stack([x, ops.tanh(x)], axis=0)), None),
    "fir_conv": (lambda r: r.standard_normal((1, 60)), lambda x: _proj(ops.fir_conv(x, _TAPS)), 20),
    "stft": (lambda r: r.standard_normal(1100), _stft_mag, 20),
    "istft": (lambda r: r.standard_normal((257, _CFG.n_frames(1100), 2)), _istft, 20),
    "lstm_sequence": (lambda r: r.standard_normal((2, 5, 3)), _lstm_f, None),
    "lstm_weights": (lambda r: 0.5 * r.uniform(-1, 1, (3, 16)), _lstm_w, None),
}
