"""Rate-1/3 turbo code: QPP interleaver, RSC constituents, max-log-MAP decoding.

LLR convention: a positive value means bit 0 is more likely.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _backend
from .tables import QPP_TABLE
from .trellis import MEMORY, NEXT_STATE, PARITY, termination_input

TAIL_LEN = 4 * MEMORY
DEFAULT_MAX_ITERATIONS = 8


class UnsupportedBlockSize(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


def _kernels(backend):
    if backend is None:
        return _backend.kernels
    if isinstance(backend, str):
        try:
            return _backend.available_backends()[backend]
        except KeyError:
            raise ValueError(f"kernel backend {backend!r} not available") from None
    return backend


def _bits(x) -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("expected a 1-D bit sequence")
    if arr.size and arr.max() > 1:
        raise ValueError("bit sequences may only contain 0 and 1")
    return arr


def qpp_params(k: int) -> tuple[int, int]:
    try:
        return QPP_TABLE[int(k)]
    except KeyError:
        raise UnsupportedBlockSize(f"block size {k} has no interleaver parameters") from None


def qpp_index(k: int, i: int) -> int:
    f1, f2 = qpp_params(k)
    if not 0 <= i < k:
        raise IndexError(f"index {i} outside [0, {k})")
    return (f1 * i + f2 * i * i) % k


@lru_cache(maxsize=None)
def qpp_permutation(k: int) -> np.ndarray:
    """``perm[i] = (f1*i + f2*i^2) mod k`` as a read-only int32 array."""
    f1, f2 = qpp_params(k)
    i = np.arange(k, dtype=np.int64)
    perm = ((f1 * i + f2 * i * i) % k).astype(np.int32)
    perm.setflags(write=False)
    return perm


def qpp_interleave(k: int, x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[0] != k:
        raise LengthMismatch(f"expected {k} elements, got {x.shape[0]}")
    return x[qpp_permutation(k)]


def qpp_deinterleave(k: int, x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[0] != k:
        raise LengthMismatch(f"expected {k} elements, got {x.shape[0]}")
    out = np.empty_like(x)
    out[qpp_permutation(k)] = x
    return out


def rsc_encode(bits, state: int = 0, *, backend=None) -> tuple[np.ndarray, int]:
    """Parity stream of the 8-state RSC encoder and its final register state."""
    return _kernels(backend).rsc_encode(_bits(bits), int(state))


def rsc_terminate(state: int) -> tuple[np.ndarray, np.ndarray]:
    """Three (systematic, parity) tail pairs that return the encoder to state 0."""
    sys_t = np.empty(MEMORY, dtype=np.uint8)
    par_t = np.empty(MEMORY, dtype=np.uint8)
    for i in range(MEMORY):
        u = termination_input(state)
        sys_t[i] = u
        par_t[i] = PARITY[state][u]
        state = NEXT_STATE[state][u]
    assert state == 0
    return sys_t, par_t


@dataclass(frozen=True, eq=False)
class EncodedBlock:
    """Turbo encoder output.

    ``tail`` holds the 12 termination bits ordered as
    ``x1 z1 x1 z1 x1 z1 x2 z2 x2 z2 x2 z2`` (systematic/parity pairs of the
    first constituent, then the second).
    """

    systematic: np.ndarray
    parity1: np.ndarray
    parity2: np.ndarray
    tail: np.ndarray

    @property
    def k(self) -> int:
        return self.systematic.size

    def __len__(self) -> int:
        return 3 * self.k + self.tail.size

    def serialize(self) -> np.ndarray:
        return np.concatenate([self.systematic, self.parity1, self.parity2, self.tail])

    @classmethod
    def deserialize(cls, bits) -> "EncodedBlock":
        bits = _bits(bits)
        k, rem = divmod(bits.size - TAIL_LEN, 3)
        if rem or k <= 0:
            raise LengthMismatch(f"{bits.size} bits is not 3k + {TAIL_LEN}")
        return cls(bits[:k], bits[k : 2 * k], bits[2 * k : 3 * k], bits[3 * k :])

    def __eq__(self, other):
        if not isinstance(other, EncodedBlock):
            return NotImplemented
        return np.array_equal(self.serialize(), other.serialize())


@dataclass(frozen=True, eq=False)
class LlrBlock:
    sys_llr: np.ndarray
    par1_llr: np.ndarray
    par2_llr: np.ndarray
    tail_llr: np.ndarray

    @property
    def k(self) -> int:
        return self.sys_llr.size

    def validate(self) -> None:
        k = self.sys_llr.size
        if self.par1_llr.size != k or self.par2_llr.size != k:
            raise LengthMismatch(
                f"stream lengths differ: sys={k} par1={self.par1_llr.size} par2={self.par2_llr.size}"
            )
        if self.tail_llr.size != TAIL_LEN:
            raise LengthMismatch(f"tail has {self.tail_llr.size} values, expected {TAIL_LEN}")
        for arr in (self.sys_llr, self.par1_llr, self.par2_llr, self.tail_llr):
            if not np.all(np.isfinite(arr)):
                raise ValueError("LLR values must be finite")

    def serialize(self) -> np.ndarray:
        return np.concatenate([self.sys_llr, self.par1_llr, self.par2_llr, self.tail_llr])

    @classmethod
    def from_bits(cls, eb: EncodedBlock, amplitude: float = 1.0) -> "LlrBlock":
        """Noiseless LLRs: bit 0 -> +amplitude, bit 1 -> -amplitude."""
        f = lambda b: amplitude * (1.0 - 2.0 * b.astype(np.float64))  # noqa: E731
        return cls(f(eb.systematic), f(eb.parity1), f(eb.parity2), f(eb.tail))

    @classmethod
    def zeros(cls, k: int) -> "LlrBlock":
        z = np.zeros(k)
        return cls(z, z.copy(), z.copy(), np.zeros(TAIL_LEN))


@dataclass(frozen=True, eq=False)
class DecodeResult:
    bits: np.ndarray
    iterations_used: int
    success: bool
    llr: np.ndarray | None = None


def turbo_encode(cb, *, backend=None) -> EncodedBlock:
    """Encode a code block (anything with a ``bits`` attribute, or a bit array)."""
    bits = _bits(getattr(cb, "bits", cb))
    k = bits.size
    perm = qpp_permutation(k)  # raises for unsupported k
    kern = _kernels(backend)
    par1, s1 = kern.rsc_encode(bits, 0)
    par2, s2 = kern.rsc_encode(np.ascontiguousarray(bits[perm]), 0)
    t1s, t1p = rsc_terminate(s1)
    t2s, t2p = rsc_terminate(s2)
    tail = np.empty(TAIL_LEN, dtype=np.uint8)
    tail[0:6:2], tail[1:6:2] = t1s, t1p
    tail[6:12:2], tail[7:12:2] = t2s, t2p
    return EncodedBlock(bits.copy(), par1, par2, tail)


def turbo_decode(
    llr: LlrBlock,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    early_stop: bool = True,
    *,
    backend=None,
) -> DecodeResult:
    """Iterative max-log-MAP decoding with a CRC-24 stopping rule.

    The block is declared decoded when the hard decisions pass the trailing
    CRC-24 and no a-posteriori LLR is exactly zero. With ``early_stop`` the
    iterations end at the first such pass.
    """
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    llr.validate()
    k = llr.k
    perm = qpp_permutation(k)
    f64 = lambda a: np.ascontiguousarray(a, dtype=np.float64)  # noqa: E731
    bits, app, used, ok = _kernels(backend).turbo_decode(
        f64(llr.sys_llr),
        f64(llr.par1_llr),
        f64(llr.par2_llr),
        f64(llr.tail_llr),
        perm,
        int(max_iterations),
        bool(early_stop),
    )
    return DecodeResult(bits=bits, iterations_used=int(used), success=bool(ok), llr=app)


def siso_extrinsic(sys_llr, par_llr, apriori, tail_sys, tail_par, *, backend=None) -> np.ndarray:
    """Extrinsic output of one max-log-MAP constituent decoder (exposed for tests)."""
    out = _kernels(backend).siso(
        [float(v) for v in sys_llr],
        [float(v) for v in par_llr],
        [float(v) for v in apriori],
        [float(v) for v in tail_sys],
        [float(v) for v in tail_par],
    )
    return np.asarray(out, dtype=np.float64)


# -- puncturing ------------------------------------------------------------


def _pattern(pattern) -> np.ndarray:
    p = np.asarray(pattern, dtype=np.uint8)
    if p.ndim != 2 or p.shape[0] != 3 or p.shape[1] < 1:
        raise ValueError("puncturing pattern must be a 3 x P matrix (systematic, parity1, parity2)")
    if not np.all(p[0] == 1):
        raise ValueError("puncturing pattern must keep every systematic bit")
    if np.any(p > 1):
        raise ValueError("puncturing pattern entries must be 0 or 1")
    return p


def _keep_masks(k: int, pattern) -> tuple[np.ndarray, np.ndarray]:
    p = _pattern(pattern)
    idx = np.arange(k) % p.shape[1]
    return p[1][idx].astype(bool), p[2][idx].astype(bool)


IDENTITY_PATTERN = ((1,), (1,), (1,))
HALF_RATE_PATTERN = ((1, 1), (1, 0), (0, 1))


def puncture(eb: EncodedBlock, pattern=IDENTITY_PATTERN) -> np.ndarray:
    """Periodically delete parity bits; tail bits are always transmitted."""
    keep1, keep2 = _keep_masks(eb.k, pattern)
    return np.concatenate([eb.systematic, eb.parity1[keep1], eb.parity2[keep2], eb.tail])


def depuncture(values, k: int, pattern=IDENTITY_PATTERN) -> LlrBlock:
    """Rebuild an :class:`LlrBlock` from the surviving LLRs, zero at deleted positions."""
    values = np.asarray(values, dtype=np.float64)
    keep1, keep2 = _keep_masks(k, pattern)
    n1, n2 = int(keep1.sum()), int(keep2.sum())
    if values.size != k + n1 + n2 + TAIL_LEN:
        raise LengthMismatch(f"expected {k + n1 + n2 + TAIL_LEN} values, got {values.size}")
    par1 = np.zeros(k)
    par2 = np.zeros(k)
    par1[keep1] = values[k : k + n1]
    par2[keep2] = values[k + n1 : k + n1 + n2]
    return LlrBlock(values[:k].copy(), par1, par2, values[k + n1 + n2 :].copy())
