# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled turbo kernels.

Mirrors ``_pykernels`` operation for operation (results are bit-identical) and
runs without the GIL so worker threads decode in parallel.
"""

import numpy as np

from libc.stdlib cimport malloc, free
from libc.stdint cimport uint8_t, int32_t

from .trellis import NEXT_STATE, PARITY, PREV_STATE, PREV_INPUT, PREV_PARITY

NAME = "cython"

DEF S = 8
DEF NEG = -1e30
DEF POLY = 0x864CFB

cdef int c_next[S][2]
cdef int c_par[S][2]
cdef int c_prev_s[S][2]
cdef int c_prev_u[S][2]
cdef int c_prev_p[S][2]

for _s in range(S):
    for _j in range(2):
        c_next[_s][_j] = NEXT_STATE[_s][_j]
        c_par[_s][_j] = PARITY[_s][_j]
        c_prev_s[_s][_j] = PREV_STATE[_s][_j]
        c_prev_u[_s][_j] = PREV_INPUT[_s][_j]
        c_prev_p[_s][_j] = PREV_PARITY[_s][_j]


def rsc_encode(const uint8_t[::1] bits, int state=0):
    cdef Py_ssize_t i, n = bits.shape[0]
    out = np.empty(n, dtype=np.uint8)
    cdef uint8_t[::1] parity = out
    cdef int u
    with nogil:
        for i in range(n):
            u = bits[i]
            parity[i] = c_par[state][u]
            state = c_next[state][u]
    return out, state


cdef inline bint crc_ok(const uint8_t* hard, Py_ssize_t k) noexcept nogil:
    cdef unsigned int crc = 0, msb
    cdef Py_ssize_t j
    for j in range(k):
        msb = (crc >> 23) & 1
        crc = (crc << 1) & 0xFFFFFF
        if msb ^ hard[j]:
            crc ^= POLY
    return crc == 0


cdef void siso_c(const double* sys, const double* par_llr, const double* apri,
                 const double* tail_sys, const double* tail_par, Py_ssize_t k,
                 double* betas, double* ext) noexcept nogil:
    # betas: scratch of (k + 1) * S doubles
    cdef Py_ssize_t n = k + 3, t
    cdef int s, ns
    cdef double beta[S]
    cdef double alpha[S]
    cdef double new[S]
    cdef double g[2][2]
    cdef double s_h, p_h, m0, m1, m, a, v0, v1, best0, best1, gp0, gp1
    cdef double* b

    beta[0] = 0.0
    for s in range(1, S):
        beta[s] = NEG
    t = n - 1
    while t >= 0:
        if t < k:
            s_h = 0.5 * (sys[t] + apri[t])
            p_h = 0.5 * par_llr[t]
        else:
            s_h = 0.5 * tail_sys[t - k]
            p_h = 0.5 * tail_par[t - k]
        g[0][0] = s_h + p_h
        g[0][1] = s_h - p_h
        g[1][0] = -s_h + p_h
        g[1][1] = -s_h - p_h
        for s in range(S):
            m0 = beta[c_next[s][0]] + g[0][c_par[s][0]]
            m1 = beta[c_next[s][1]] + g[1][c_par[s][1]]
            new[s] = m0 if m0 > m1 else m1
        m = new[0]
        for s in range(1, S):
            if new[s] > m:
                m = new[s]
        for s in range(S):
            beta[s] = new[s] - m
        if t <= k:
            for s in range(S):
                betas[t * S + s] = beta[s]
        t -= 1

    alpha[0] = 0.0
    for s in range(1, S):
        alpha[s] = NEG
    for t in range(k):
        s_h = 0.5 * (sys[t] + apri[t])
        p_h = 0.5 * par_llr[t]
        b = betas + (t + 1) * S
        best0 = NEG
        best1 = NEG
        for s in range(S):
            a = alpha[s]
            gp0 = p_h if c_par[s][0] == 0 else -p_h
            gp1 = p_h if c_par[s][1] == 0 else -p_h
            v0 = a + gp0 + b[c_next[s][0]]
            v1 = a + gp1 + b[c_next[s][1]]
            if v0 > best0:
                best0 = v0
            if v1 > best1:
                best1 = v1
        ext[t] = best0 - best1
        g[0][0] = s_h + p_h
        g[0][1] = s_h - p_h
        g[1][0] = -s_h + p_h
        g[1][1] = -s_h - p_h
        for ns in range(S):
            m0 = alpha[c_prev_s[ns][0]] + g[c_prev_u[ns][0]][c_prev_p[ns][0]]
            m1 = alpha[c_prev_s[ns][1]] + g[c_prev_u[ns][1]][c_prev_p[ns][1]]
            new[ns] = m0 if m0 > m1 else m1
        m = new[0]
        for s in range(1, S):
            if new[s] > m:
                m = new[s]
        for s in range(S):
            alpha[s] = new[s] - m


def siso(sys_llr, par_llr, apriori, tail_sys, tail_par):
    cdef const double[::1] sv = np.ascontiguousarray(sys_llr, dtype=np.float64)
    cdef const double[::1] pv = np.ascontiguousarray(par_llr, dtype=np.float64)
    cdef const double[::1] av = np.ascontiguousarray(apriori, dtype=np.float64)
    cdef const double[::1] ts = np.ascontiguousarray(tail_sys, dtype=np.float64)
    cdef const double[::1] tp = np.ascontiguousarray(tail_par, dtype=np.float64)
    cdef Py_ssize_t k = sv.shape[0]
    out = np.empty(k, dtype=np.float64)
    cdef double[::1] ov = out
    cdef double* betas = <double*> malloc((k + 1) * S * sizeof(double))
    if betas == NULL:
        raise MemoryError()
    try:
        with nogil:
            siso_c(&sv[0], &pv[0], &av[0], &ts[0], &tp[0], k, betas, &ov[0])
    finally:
        free(betas)
    return out.tolist()


def turbo_decode(const double[::1] sys_llr, const double[::1] par1, const double[::1] par2,
                 const double[::1] tail, const int32_t[::1] perm,
                 int max_iterations, bint early_stop):
    cdef Py_ssize_t k = sys_llr.shape[0], i, j
    bits_out = np.empty(k, dtype=np.uint8)
    app_out = np.empty(k, dtype=np.float64)
    cdef uint8_t[::1] hard = bits_out
    cdef double[::1] app = app_out
    cdef int it = 0, used = 0
    cdef bint ok = False, undecided
    cdef double v
    cdef double tail1_sys[3]
    cdef double tail1_par[3]
    cdef double tail2_sys[3]
    cdef double tail2_par[3]
    for i in range(3):
        tail1_sys[i] = tail[2 * i]
        tail1_par[i] = tail[2 * i + 1]
        tail2_sys[i] = tail[6 + 2 * i]
        tail2_par[i] = tail[7 + 2 * i]

    cdef double* scratch = <double*> malloc(((k + 1) * S + 5 * k) * sizeof(double))
    if scratch == NULL:
        raise MemoryError()
    cdef double* betas = scratch
    cdef double* sys_i = scratch + (k + 1) * S
    cdef double* la1 = sys_i + k
    cdef double* la2 = la1 + k
    cdef double* le1 = la2 + k
    cdef double* le2 = le1 + k
    try:
        with nogil:
            for i in range(k):
                sys_i[i] = sys_llr[perm[i]]
                la1[i] = 0.0
                la2[i] = 0.0
            for it in range(1, max_iterations + 1):
                used = it
                siso_c(&sys_llr[0], &par1[0], la1, tail1_sys, tail1_par, k, betas, le1)
                for i in range(k):
                    la2[i] = le1[perm[i]]
                siso_c(sys_i, &par2[0], la2, tail2_sys, tail2_par, k, betas, le2)
                for i in range(k):
                    la1[perm[i]] = le2[i]
                undecided = False
                for j in range(k):
                    v = sys_llr[j] + le1[j] + la1[j]
                    app[j] = v
                    hard[j] = 1 if v < 0.0 else 0
                    if v == 0.0:
                        undecided = True
                ok = (not undecided) and crc_ok(&hard[0], k)
                if early_stop and ok:
                    break
    finally:
        free(scratch)
    return bits_out, app_out, used, bool(ok)
