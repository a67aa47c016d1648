"""Trellis of the LTE 8-state RSC constituent code (feedback 13, feedforward 15 octal).

State ``s = (r1 << 2) | (r2 << 1) | r3`` where ``r1`` holds the most recent
register bit. For input ``u`` the feedback bit is ``a = u ^ r2 ^ r3``, the
parity output is ``a ^ r1 ^ r3`` and the next state shifts ``a`` in.
"""

N_STATES = 8
MEMORY = 3


def _step(state: int, u: int) -> tuple[int, int]:
    r1, r2, r3 = (state >> 2) & 1, (state >> 1) & 1, state & 1
    a = u ^ r2 ^ r3
    return (a << 2) | (r1 << 1) | r2, a ^ r1 ^ r3


NEXT_STATE = tuple(tuple(_step(s, u)[0] for u in (0, 1)) for s in range(N_STATES))
PARITY = tuple(tuple(_step(s, u)[1] for u in (0, 1)) for s in range(N_STATES))


def _predecessors():
    prev_s, prev_u, prev_p = [], [], []
    for ns in range(N_STATES):
        arcs = sorted((s, u) for s in range(N_STATES) for u in (0, 1) if NEXT_STATE[s][u] == ns)
        assert len(arcs) == 2
        prev_s.append(tuple(s for s, _ in arcs))
        prev_u.append(tuple(u for _, u in arcs))
        prev_p.append(tuple(PARITY[s][u] for s, u in arcs))
    return tuple(prev_s), tuple(prev_u), tuple(prev_p)


PREV_STATE, PREV_INPUT, PREV_PARITY = _predecessors()


def termination_input(state: int) -> int:
    """Input that drives the feedback bit to zero (flushes the register)."""
    return ((state >> 1) & 1) ^ (state & 1)
