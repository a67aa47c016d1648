"""Turbo channel coding: segmentation, CRC, QPP interleaving, encode/decode."""

from ._backend import BACKEND, available_backends
from .crc import crc24_attach, crc24_check
from .segmentation import (
    CB_MAX_INFO_BITS,
    CodeBlock,
    ReassemblyError,
    SegmentationError,
    SegmentationInfo,
    TbOutcome,
    TransportBlock,
    reassemble_tb,
    segment_tb,
    segmentation_info,
)
from .tables import SUPPORTED_SIZES
from .turbo import (
    DecodeResult,
    EncodedBlock,
    LengthMismatch,
    LlrBlock,
    UnsupportedBlockSize,
    depuncture,
    puncture,
    qpp_deinterleave,
    qpp_index,
    qpp_interleave,
    qpp_params,
    qpp_permutation,
    rsc_encode,
    rsc_terminate,
    turbo_decode,
    turbo_encode,
)

__all__ = [
    "BACKEND",
    "CB_MAX_INFO_BITS",
    "CodeBlock",
    "DecodeResult",
    "EncodedBlock",
    "LengthMismatch",
    "LlrBlock",
    "ReassemblyError",
    "SUPPORTED_SIZES",
    "SegmentationError",
    "SegmentationInfo",
    "TbOutcome",
    "TransportBlock",
    "UnsupportedBlockSize",
    "available_backends",
    "crc24_attach",
    "crc24_check",
    "depuncture",
    "puncture",
    "qpp_deinterleave",
    "qpp_index",
    "qpp_interleave",
    "qpp_params",
    "qpp_permutation",
    "reassemble_tb",
    "rsc_encode",
    "rsc_terminate",
    "segment_tb",
    "segmentation_info",
    "turbo_decode",
    "turbo_encode",
]
