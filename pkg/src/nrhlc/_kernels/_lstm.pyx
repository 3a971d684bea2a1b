# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled LSTM recurrence; same contract as lstm_py.

Matrix products go through BLAS dgemm on row-major buffers (passed to the
column-major routine as their transposes).
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport tanh
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef inline void _activate(double* z, int H) nogil:
    # in place: sigmoid on input/forget/output gates, tanh on the cell candidate
    cdef int j
    for j in range(2 * H):
        z[j] = 0.5 * (1.0 + tanh(0.5 * z[j]))
    for j in range(2 * H, 3 * H):
        z[j] = tanh(z[j])
    for j in range(3 * H, 4 * H):
        z[j] = 0.5 * (1.0 + tanh(0.5 * z[j]))


cdef inline void _cell(double* act, double* cp, double* cn, double* hn, int H) nogil:
    cdef int j
    for j in range(H):
        cn[j] = act[H + j] * cp[j] + act[j] * act[2 * H + j]
    for j in range(H):
        hn[j] = act[3 * H + j] * tanh(cn[j])


cdef inline void _cell_grad(double* act, double* cp, double* c, double* gh,
                            double* dh_next, double* dc_next, double* dz,
                            double* tc, int H) nogil:
    # gradient of one step; dc_next is updated in place
    cdef int j
    cdef double dh, dc
    for j in range(H):
        tc[j] = tanh(c[j])
    for j in range(H):
        dh = gh[j] + dh_next[j]
        dc = dh * act[3 * H + j] * (1.0 - tc[j] * tc[j]) + dc_next[j]
        dz[j] = dc * act[2 * H + j] * act[j] * (1.0 - act[j])
        dz[H + j] = dc * cp[j] * act[H + j] * (1.0 - act[H + j])
        dz[2 * H + j] = dc * act[j] * (1.0 - act[2 * H + j] * act[2 * H + j])
        dz[3 * H + j] = dh * tc[j] * act[3 * H + j] * (1.0 - act[3 * H + j])
        dc_next[j] = dc * act[H + j]


cdef void _gemm_rm(char* ta, char* tb, int m, int n, int k,
                   double* a, int lda, double* b, int ldb,
                   double beta, double* c, int ldc) nogil:
    # column-major dgemm call: C(m x n) = op(A) op(B) + beta C
    cdef double one = 1.0
    dgemm(ta, tb, &m, &n, &k, &one, a, &lda, b, &ldb, &beta, c, &ldc)


def lstm_forward(double[:, :, ::1] xw, double[:, ::1] w_hh,
                 double[:, ::1] h0, double[:, ::1] c0):
    cdef int S = xw.shape[0], T = xw.shape[1], H4 = xw.shape[2]
    cdef int H = H4 // 4
    h_np = np.empty((S, T, H))
    c_np = np.empty((S, T, H))
    g_np = np.empty((S, T, H4))
    cdef double[:, :, ::1] h_all = h_np
    cdef double[:, :, ::1] c_all = c_np
    cdef double[:, :, ::1] gates = g_np
    cdef int s, t, j
    cdef double* hprev
    cdef int ldh
    cdef char* nn = b"N"
    with nogil:
        for t in range(T):
            for s in range(S):
                for j in range(H4):
                    gates[s, t, j] = xw[s, t, j]
            if t == 0:
                hprev = &h0[0, 0]
                ldh = H
            else:
                hprev = &h_all[0, t - 1, 0]
                ldh = T * H
            # gates[:, t] += hprev @ w_hh
            _gemm_rm(nn, nn, H4, S, H, &w_hh[0, 0], H4, hprev, ldh, 1.0,
                     &gates[0, t, 0], T * H4)
            for s in range(S):
                _activate(&gates[s, t, 0], H)
                if t == 0:
                    _cell(&gates[s, t, 0], &c0[s, 0], &c_all[s, t, 0], &h_all[s, t, 0], H)
                else:
                    _cell(&gates[s, t, 0], &c_all[s, t - 1, 0], &c_all[s, t, 0], &h_all[s, t, 0], H)
    return h_np, c_np, g_np


def lstm_backward(double[:, :, ::1] gh, double[:, ::1] w_hh,
                  double[:, ::1] h0, double[:, ::1] c0,
                  double[:, :, ::1] h_all, double[:, :, ::1] c_all,
                  double[:, :, ::1] gates):
    cdef int S = gh.shape[0], T = gh.shape[1], H = gh.shape[2]
    cdef int H4 = 4 * H
    dxw_np = np.empty((S, T, H4))
    dw_np = np.zeros((H, H4))
    dh_np = np.zeros((S, H))
    dc_np = np.zeros((S, H))
    dhn_np = np.zeros((S, H))
    cdef double[:, :, ::1] dxw = dxw_np
    cdef double[:, ::1] dw = dw_np
    cdef double[:, ::1] dh_next = dh_np
    cdef double[:, ::1] dc_next = dc_np
    cdef double[:, ::1] dh_new = dhn_np
    cdef int s, t, j
    tc_np = np.empty(H)
    cdef double[::1] tc = tc_np
    cdef double* hprev
    cdef int ldh
    cdef char* nn = b"N"
    cdef char* nt = b"T"
    cdef char* tn_ = b"T"
    with nogil:
        for t in range(T - 1, -1, -1):
            for s in range(S):
                _cell_grad(&gates[s, t, 0],
                           &c0[s, 0] if t == 0 else &c_all[s, t - 1, 0],
                           &c_all[s, t, 0], &gh[s, t, 0], &dh_next[s, 0], &dc_next[s, 0],
                           &dxw[s, t, 0], &tc[0], H)
            if t == 0:
                hprev = &h0[0, 0]
                ldh = H
            else:
                hprev = &h_all[0, t - 1, 0]
                ldh = T * H
            # dw += hprev.T @ dz
            _gemm_rm(nn, nt, H4, H, S, &dxw[0, t, 0], T * H4, hprev, ldh, 1.0,
                     &dw[0, 0], H4)
            # dh_next = dz @ w_hh.T
            _gemm_rm(tn_, nn, H, S, H4, &w_hh[0, 0], H4, &dxw[0, t, 0], T * H4, 0.0,
                     &dh_new[0, 0], H)
            for s in range(S):
                for j in range(H):
                    dh_next[s, j] = dh_new[s, j]
    return dxw_np, dw_np, dh_np, dc_np
