"""Pure-numpy LSTM recurrence (fallback for the compiled kernel).

Shapes: S sequences, T steps, H hidden units.  `xw` holds the input
projection x_t @ W_ih + b for every step, (S, T, 4H), gate order
[input, forget, cell, output].
"""
import numpy as np


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def lstm_forward(xw, w_hh, h0, c0):
    S, T, H4 = xw.shape
    H = H4 // 4
    h_all = np.empty((S, T, H))
    c_all = np.empty((S, T, H))
    gates = np.empty((S, T, H4))
    h, c = h0, c0
    for t in range(T):
        z = xw[:, t] + h @ w_hh
        act = gates[:, t]
        act[:, :2 * H] = _sigmoid(z[:, :2 * H])
        act[:, 2 * H:3 * H] = np.tanh(z[:, 2 * H:3 * H])
        act[:, 3 * H:] = _sigmoid(z[:, 3 * H:])
        i, f, g, o = act[:, :H], act[:, H:2 * H], act[:, 2 * H:3 * H], act[:, 3 * H:]
        c = f * c + i * g
        h = o * np.tanh(c)
        c_all[:, t] = c
        h_all[:, t] = h
    return h_all, c_all, gates


def lstm_backward(gh, w_hh, h0, c0, h_all, c_all, gates):
    S, T, H = gh.shape
    dxw = np.empty((S, T, 4 * H))
    dw_hh = np.zeros_like(w_hh)
    dh_next = np.zeros((S, H))
    dc_next = np.zeros((S, H))
    for t in range(T - 1, -1, -1):
        act = gates[:, t]
        i, f, g, o = act[:, :H], act[:, H:2 * H], act[:, 2 * H:3 * H], act[:, 3 * H:]
        c_prev = c_all[:, t - 1] if t > 0 else c0
        h_prev = h_all[:, t - 1] if t > 0 else h0
        dh = gh[:, t] + dh_next
        tc = np.tanh(c_all[:, t])
        dc = dh * o * (1.0 - tc * tc) + dc_next
        dz = dxw[:, t]
        dz[:, :H] = dc * g * i * (1.0 - i)
        dz[:, H:2 * H] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * H:3 * H] = dc * i * (1.0 - g * g)
        dz[:, 3 * H:] = dh * tc * o * (1.0 - o)
        dc_next = dc * f
        dw_hh += h_prev.T @ dz
        dh_next = dz @ w_hh.T
    return dxw, dw_hh, dh_next, dc_next
