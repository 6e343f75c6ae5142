# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled aggregation kernels.

Accumulation order matches the numpy fallback (sequential over adjacency
pairs) so both backends produce bit-identical float64 results.
"""

import numpy as np


def agg_forward(dst, rel, src, inv_deg, rel_emb, s_prev):
    cdef long[::1] dst_v = dst
    cdef long[::1] rel_v = rel
    cdef long[::1] src_v = src
    cdef double[::1] inv_v = inv_deg
    cdef double[:, ::1] re = rel_emb
    cdef double[:, ::1] sp = s_prev
    out_arr = np.zeros((s_prev.shape[0], s_prev.shape[1]), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t n = dst_v.shape[0]
    cdef Py_ssize_t d = sp.shape[1]
    cdef Py_ssize_t j, k, x, r, v
    with nogil:
        for j in range(n):
            x = dst_v[j]
            r = rel_v[j]
            v = src_v[j]
            for k in range(d):
                out[x, k] += re[r, k] * sp[v, k]
        for x in range(out.shape[0]):
            for k in range(d):
                out[x, k] *= inv_v[x]
    return out_arr


def agg_backward(dst, rel, src, inv_deg, rel_emb, s_prev, g_out):
    cdef long[::1] dst_v = dst
    cdef long[::1] rel_v = rel
    cdef long[::1] src_v = src
    cdef double[::1] inv_v = inv_deg
    cdef double[:, ::1] re = rel_emb
    cdef double[:, ::1] sp = s_prev
    cdef double[:, ::1] go = g_out
    g_prev_arr = np.zeros((s_prev.shape[0], s_prev.shape[1]), dtype=np.float64)
    g_rel_arr = np.zeros((rel_emb.shape[0], rel_emb.shape[1]), dtype=np.float64)
    cdef double[:, ::1] gp = g_prev_arr
    cdef double[:, ::1] gr = g_rel_arr
    cdef Py_ssize_t n = dst_v.shape[0]
    cdef Py_ssize_t d = sp.shape[1]
    cdef Py_ssize_t j, k, x, r, v
    cdef double scaled
    with nogil:
        for j in range(n):
            x = dst_v[j]
            r = rel_v[j]
            v = src_v[j]
            for k in range(d):
                scaled = go[x, k] * inv_v[x]
                gr[r, k] += scaled * sp[v, k]
                gp[v, k] += scaled * re[r, k]
    return g_prev_arr, g_rel_arr
