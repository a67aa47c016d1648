"""Transport block to code block segmentation and TB reassembly."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .crc import CRC_LEN, crc24_attach
from .tables import SUPPORTED_SIZES, MAX_BLOCK_SIZE

CB_MAX_INFO_BITS = MAX_BLOCK_SIZE - CRC_LEN  # 6120
DEFAULT_MAX_CODE_BLOCKS = 64


class SegmentationError(ValueError):
    pass


class ReassemblyError(ValueError):
    """Structural problem (missing/duplicate CB results), not a decode failure."""


@dataclass(frozen=True, eq=False)
class TransportBlock:
    ue_id: int
    subframe_id: int
    payload: np.ndarray

    def __post_init__(self):
        if self.payload.size == 0:
            raise ValueError("transport block payload must not be empty")

    @property
    def key(self) -> tuple[int, int]:
        return (self.ue_id, self.subframe_id)

    @property
    def tbs(self) -> int:
        return int(self.payload.size)

    def __eq__(self, other):
        if not isinstance(other, TransportBlock):
            return NotImplemented
        return self.key == other.key and np.array_equal(self.payload, other.payload)


@dataclass(frozen=True, eq=False)
class CodeBlock:
    """One turbo code block: ``filler`` zeros, information bits, CRC-24."""

    tb_ref: tuple[int, int]
    index: int
    total: int
    bits: np.ndarray
    filler: int

    @property
    def k(self) -> int:
        return int(self.bits.size)

    @property
    def info_bits(self) -> int:
        return self.k - self.filler - CRC_LEN


@dataclass(frozen=True)
class SegmentationInfo:
    tb_ref: tuple[int, int]
    tbs: int
    info_sizes: tuple[int, ...]
    block_sizes: tuple[int, ...]
    fillers: tuple[int, ...] = field(default=())

    @property
    def num_blocks(self) -> int:
        return len(self.block_sizes)


def supported_size_at_least(n: int) -> int:
    i = bisect.bisect_left(SUPPORTED_SIZES, n)
    if i == len(SUPPORTED_SIZES):
        raise SegmentationError(f"no interleaver size >= {n}")
    return SUPPORTED_SIZES[i]


def plan_segmentation(tbs: int, max_code_blocks: int = DEFAULT_MAX_CODE_BLOCKS) -> list[tuple[int, int, int]]:
    """``(info_bits, k, filler)`` for each code block of a ``tbs``-bit TB.

    Information bits are spread as evenly as possible (earlier blocks take the
    remainder); each block is padded with leading zeros up to the smallest
    interleaver size that holds its bits plus the CRC.
    """
    if tbs <= 0:
        raise SegmentationError("transport block size must be positive")
    count = -(-tbs // CB_MAX_INFO_BITS)
    if count > max_code_blocks:
        raise SegmentationError(
            f"TB of {tbs} bits needs {count} code blocks, limit is {max_code_blocks}"
        )
    base, extra = divmod(tbs, count)
    plan = []
    for i in range(count):
        info = base + (1 if i < extra else 0)
        k = supported_size_at_least(info + CRC_LEN)
        plan.append((info, k, k - info - CRC_LEN))
    return plan


def segment_tb(tb: TransportBlock, max_code_blocks: int = DEFAULT_MAX_CODE_BLOCKS) -> list[CodeBlock]:
    payload = np.asarray(tb.payload, dtype=np.uint8)
    plan = plan_segmentation(payload.size, max_code_blocks)
    blocks = []
    pos = 0
    for index, (info, k, filler) in enumerate(plan):
        body = np.concatenate([np.zeros(filler, dtype=np.uint8), payload[pos : pos + info]])
        pos += info
        bits = crc24_attach(body)
        assert bits.size == k
        blocks.append(CodeBlock(tb.key, index, len(plan), bits, filler))
    return blocks


def segmentation_info(tb: TransportBlock, blocks: Sequence[CodeBlock] | None = None) -> SegmentationInfo:
    if blocks is None:
        plan = plan_segmentation(tb.tbs)
        return SegmentationInfo(
            tb.key, tb.tbs, tuple(p[0] for p in plan), tuple(p[1] for p in plan), tuple(p[2] for p in plan)
        )
    return SegmentationInfo(
        tb.key,
        tb.tbs,
        tuple(b.info_bits for b in blocks),
        tuple(b.k for b in blocks),
        tuple(b.filler for b in blocks),
    )


@dataclass(frozen=True, eq=False)
class TbOutcome:
    tb_ref: tuple[int, int]
    success: bool
    payload: np.ndarray | None
    failed_blocks: tuple[int, ...] = ()


def reassemble_tb(results, info: SegmentationInfo) -> TbOutcome:
    """Combine per-CB decode results of one TB.

    ``results`` is a sequence indexed by CB position or a ``{index: result}``
    mapping. A failed CB makes the TB lost and no payload is returned.
    """
    if isinstance(results, dict):
        by_index = dict(results)
    else:
        by_index = dict(enumerate(results))
    if not by_index:
        raise ReassemblyError(f"no code block results for TB {info.tb_ref}")
    missing = [i for i in range(info.num_blocks) if i not in by_index]
    extra = [i for i in by_index if not 0 <= i < info.num_blocks]
    if missing or extra:
        raise ReassemblyError(f"TB {info.tb_ref}: missing CB results {missing}, unexpected {extra}")
    failed = tuple(i for i in range(info.num_blocks) if not by_index[i].success)
    if failed:
        return TbOutcome(info.tb_ref, False, None, failed)
    parts = []
    for i in range(info.num_blocks):
        bits = by_index[i].bits
        if bits.size != info.block_sizes[i]:
            raise ReassemblyError(
                f"TB {info.tb_ref} CB {i}: {bits.size} bits, expected {info.block_sizes[i]}"
            )
        f = info.fillers[i]
        parts.append(bits[f : f + info.info_sizes[i]])
    payload = np.concatenate(parts)
    return TbOutcome(info.tb_ref, True, payload)
