# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled LSTM sequence kernels; drop-in twin of the numpy reference in
aeroadapt.nn.kernels (same signatures, same cache layout).

The matrix products go through numpy (BLAS); the per-step gate math, cell
update and gate-gradient computation run in fused typed loops, which is where
the pure-numpy version loses time to temporaries and masked indexing."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()


cdef inline double _sigmoid(double z) noexcept nogil:
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    cdef double ez = exp(z)
    return ez / (1.0 + ez)


cdef void _gate_step(double[:, ::1] pre, double[:, ::1] h, double[:, ::1] c,
                     double[:, ::1] gates_t, double[:, ::1] cells_t,
                     double[:, ::1] tanhc_t, double[:, ::1] hidden_t) noexcept nogil:
    cdef Py_ssize_t B = h.shape[0], H = h.shape[1]
    cdef Py_ssize_t bi, j
    cdef double i_g, f_g, o_g, g_g, cv
    for bi in range(B):
        for j in range(H):
            i_g = _sigmoid(pre[bi, j])
            f_g = _sigmoid(pre[bi, H + j])
            o_g = _sigmoid(pre[bi, 2 * H + j])
            g_g = tanh(pre[bi, 3 * H + j])
            cv = f_g * c[bi, j] + i_g * g_g
            c[bi, j] = cv
            h[bi, j] = o_g * tanh(cv)
            gates_t[bi, j] = i_g
            gates_t[bi, H + j] = f_g
            gates_t[bi, 2 * H + j] = o_g
            gates_t[bi, 3 * H + j] = g_g
            cells_t[bi, j] = cv
            tanhc_t[bi, j] = tanh(cv)
            hidden_t[bi, j] = h[bi, j]


def lstm_seq_forward(double[:, :, ::1] x, double[:, ::1] Wx,
                     double[:, ::1] Wh, double[::1] b,
                     bint literal_candidate=False):
    cdef Py_ssize_t B = x.shape[0], T = x.shape[1], D = x.shape[2]
    cdef Py_ssize_t H = Wh.shape[0]
    cdef Py_ssize_t t

    x_arr = np.asarray(x)
    Wh_eff = np.asarray(Wh)
    if literal_candidate:
        Wh_eff = Wh_eff.copy()
        Wh_eff[:, 3 * H:] = 0.0

    # One big input projection for all steps, then per-step recurrence.
    pre_all = (x_arr.reshape(B * T, D) @ np.asarray(Wx)).reshape(B, T, 4 * H)
    pre_all += np.asarray(b)

    gates_arr = np.empty((T, B, 4 * H))
    cells_arr = np.empty((T, B, H))
    tanhc_arr = np.empty((T, B, H))
    hidden_arr = np.empty((T, B, H))
    h_arr = np.zeros((B, H))
    c_arr = np.zeros((B, H))
    pre_t = np.empty((B, 4 * H))

    cdef double[:, ::1] h = h_arr
    cdef double[:, ::1] c = c_arr
    cdef double[:, ::1] pre_view = pre_t

    for t in range(T):
        np.dot(h_arr, Wh_eff, out=pre_t)
        pre_t += pre_all[:, t]
        _gate_step(pre_view, h, c, gates_arr[t], cells_arr[t],
                   tanhc_arr[t], hidden_arr[t])

    cache = (x_arr, gates_arr, cells_arr, tanhc_arr, hidden_arr)
    return hidden_arr.transpose(1, 0, 2), cache


cdef void _gate_grads(double[:, ::1] gates_t, double[:, ::1] cells_prev,
                      double[:, ::1] tanhc_t, double[:, ::1] dh,
                      double[:, ::1] dc_next, double[:, ::1] dpre) noexcept nogil:
    """dh already includes the recurrent term; dc_next is overwritten with
    the gradient flowing to the previous cell state."""
    cdef Py_ssize_t B = dh.shape[0], H = dh.shape[1]
    cdef Py_ssize_t bi, j
    cdef double i_g, f_g, o_g, g_g, dc, th
    for bi in range(B):
        for j in range(H):
            i_g = gates_t[bi, j]
            f_g = gates_t[bi, H + j]
            o_g = gates_t[bi, 2 * H + j]
            g_g = gates_t[bi, 3 * H + j]
            th = tanhc_t[bi, j]
            dc = dh[bi, j] * o_g * (1.0 - th * th) + dc_next[bi, j]
            dpre[bi, j] = dc * g_g * i_g * (1.0 - i_g)
            dpre[bi, H + j] = dc * cells_prev[bi, j] * f_g * (1.0 - f_g)
            dpre[bi, 2 * H + j] = dh[bi, j] * th * o_g * (1.0 - o_g)
            dpre[bi, 3 * H + j] = dc * i_g * (1.0 - g_g * g_g)
            dc_next[bi, j] = dc * f_g


def lstm_seq_backward(double[:, :, ::1] dH, cache, double[:, ::1] Wx,
                      double[:, ::1] Wh, bint literal_candidate=False):
    x_arr, gates_arr, cells_arr, tanhc_arr, hidden_arr = cache
    x_arr = np.ascontiguousarray(x_arr)
    gates_arr = np.ascontiguousarray(gates_arr)
    cells_arr = np.ascontiguousarray(cells_arr)
    tanhc_arr = np.ascontiguousarray(tanhc_arr)
    hidden_arr = np.ascontiguousarray(hidden_arr)
    dH_arr = np.asarray(dH)

    cdef Py_ssize_t B = x_arr.shape[0], T = x_arr.shape[1], D = x_arr.shape[2]
    cdef Py_ssize_t H = Wh.shape[0]
    cdef Py_ssize_t t

    Wx_arr = np.asarray(Wx)
    Wh_eff = np.asarray(Wh)
    if literal_candidate:
        Wh_eff = Wh_eff.copy()
        Wh_eff[:, 3 * H:] = 0.0

    dx_arr = np.empty((B, T, D))
    dWx_arr = np.zeros((D, 4 * H))
    dWh_arr = np.zeros((H, 4 * H))
    db_arr = np.zeros(4 * H)
    dh = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    dpre = np.empty((B, 4 * H))
    zeros_bh = np.zeros((B, H))

    cdef double[:, ::1] dh_view = dh
    cdef double[:, ::1] dc_view = dc_next
    cdef double[:, ::1] dpre_view = dpre

    for t in range(T - 1, -1, -1):
        dh += dH_arr[:, t]
        c_prev = cells_arr[t - 1] if t > 0 else zeros_bh
        h_prev = hidden_arr[t - 1] if t > 0 else zeros_bh
        _gate_grads(gates_arr[t], c_prev, tanhc_arr[t], dh_view, dc_view,
                    dpre_view)
        db_arr += dpre.sum(axis=0)
        dWx_arr += x_arr[:, t].T @ dpre
        dWh_arr += h_prev.T @ dpre
        dx_arr[:, t] = dpre @ Wx_arr.T
        np.dot(dpre, Wh_eff.T, out=dh)

    if literal_candidate:
        dWh_arr[:, 3 * H:] = 0.0
    return dx_arr, dWx_arr, dWh_arr, db_arr
