"""Pure-Python turbo kernels.

Reference fallback for the compiled ``_ckernels`` module. The two
implementations perform the same floating-point operations in the same order,
so their outputs are bit-identical.
"""

from __future__ import annotations

import numpy as np

from .crc import CRC24A_POLY
from .trellis import NEXT_STATE, PARITY, PREV_STATE, PREV_INPUT, PREV_PARITY, N_STATES

NEG = -1e30

NAME = "python"


def rsc_encode(bits: np.ndarray, state: int = 0) -> tuple[np.ndarray, int]:
    parity = np.empty(bits.size, dtype=np.uint8)
    nxt, par = NEXT_STATE, PARITY
    for i, u in enumerate(bits.tolist()):
        parity[i] = par[state][u]
        state = nxt[state][u]
    return parity, state


def _crc_ok(hard: list[int]) -> bool:
    crc = 0
    for b in hard:
        msb = (crc >> 23) & 1
        crc = (crc << 1) & 0xFFFFFF
        if msb ^ b:
            crc ^= CRC24A_POLY
    return crc == 0


def siso(sys_llr, par_llr, apriori, tail_sys, tail_par) -> list[float]:
    """Max-log-MAP extrinsic LLRs of one terminated RSC constituent.

    Positive LLR means bit 0. Inputs are sequences of floats; the result is a
    list of length ``len(sys_llr)``.
    """
    k = len(sys_llr)
    n = k + len(tail_sys)
    hs = [0.5 * (s + a) for s, a in zip(sys_llr, apriori)]
    hs += [0.5 * s for s in tail_sys]
    hp = [0.5 * p for p in par_llr] + [0.5 * p for p in tail_par]

    prev_state, prev_input, prev_par = PREV_STATE, PREV_INPUT, PREV_PARITY
    nxt, par = NEXT_STATE, PARITY
    S = N_STATES

    # backward pass, betas[t] holds the metrics before step t
    betas = [None] * (k + 1)
    beta = [0.0] + [NEG] * (S - 1)
    for t in range(n - 1, -1, -1):
        s_h, p_h = hs[t], hp[t]
        g = ((s_h + p_h, s_h - p_h), (-s_h + p_h, -s_h - p_h))
        new = [0.0] * S
        for s in range(S):
            n0 = nxt[s][0]
            n1 = nxt[s][1]
            m0 = beta[n0] + g[0][par[s][0]]
            m1 = beta[n1] + g[1][par[s][1]]
            new[s] = m0 if m0 > m1 else m1
        m = new[0]
        for s in range(1, S):
            if new[s] > m:
                m = new[s]
        beta = [v - m for v in new]
        if t <= k:
            betas[t] = beta

    ext = [0.0] * k
    alpha = [0.0] + [NEG] * (S - 1)
    for t in range(k):
        p_h = hp[t]
        s_h = hs[t]
        b = betas[t + 1]
        best0 = NEG
        best1 = NEG
        for s in range(S):
            a = alpha[s]
            v0 = a + (p_h if par[s][0] == 0 else -p_h) + b[nxt[s][0]]
            v1 = a + (p_h if par[s][1] == 0 else -p_h) + b[nxt[s][1]]
            if v0 > best0:
                best0 = v0
            if v1 > best1:
                best1 = v1
        ext[t] = best0 - best1
        g = ((s_h + p_h, s_h - p_h), (-s_h + p_h, -s_h - p_h))
        new = [0.0] * S
        for ns in range(S):
            s0, s1 = prev_state[ns]
            u0, u1 = prev_input[ns]
            q0, q1 = prev_par[ns]
            m0 = alpha[s0] + g[u0][q0]
            m1 = alpha[s1] + g[u1][q1]
            new[ns] = m0 if m0 > m1 else m1
        m = new[0]
        for s in range(1, S):
            if new[s] > m:
                m = new[s]
        alpha = [v - m for v in new]
    return ext


def turbo_decode(sys_llr, par1, par2, tail, perm, max_iterations, early_stop):
    """Iterative decoding; returns ``(bits, app_llr, iterations, success)``."""
    k = sys_llr.size
    sys_l = sys_llr.tolist()
    p1 = par1.tolist()
    p2 = par2.tolist()
    t = tail.tolist()
    pi = perm.tolist()
    sys_i = [sys_l[j] for j in pi]
    tail1_sys, tail1_par = t[0:6:2], t[1:6:2]
    tail2_sys, tail2_par = t[6:12:2], t[7:12:2]

    la1 = [0.0] * k
    la2 = [0.0] * k
    hard = [0] * k
    app = [0.0] * k
    ok = False
    it = 0
    for it in range(1, max_iterations + 1):
        le1 = siso(sys_l, p1, la1, tail1_sys, tail1_par)
        for i in range(k):
            la2[i] = le1[pi[i]]
        le2 = siso(sys_i, p2, la2, tail2_sys, tail2_par)
        for i in range(k):
            la1[pi[i]] = le2[i]
        undecided = False
        for j in range(k):
            v = sys_l[j] + le1[j] + la1[j]
            app[j] = v
            hard[j] = 1 if v < 0.0 else 0
            if v == 0.0:
                undecided = True
        ok = (not undecided) and _crc_ok(hard)
        if early_stop and ok:
            break
    return np.array(hard, dtype=np.uint8), np.array(app, dtype=np.float64), it, ok
