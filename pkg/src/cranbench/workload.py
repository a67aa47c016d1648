"""Synthetic traffic and AWGN channel standing in for the radio front end."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .codec import (
    EncodedBlock,
    LlrBlock,
    SegmentationInfo,
    TransportBlock,
    segment_tb,
    segmentation_info,
    turbo_encode,
)

DEFAULT_N_UES = 3
# ~1/3 of a 100 RB carrier per UE at high MCS; splits into 4 code blocks
DEFAULT_TBS_BITS = 24000


@dataclass(frozen=True)
class TrafficProfile:
    n_ues: int = DEFAULT_N_UES
    tbs_bits: int | tuple[int, ...] = DEFAULT_TBS_BITS
    n_subframes: int = 100
    tick_ms: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_ues < 1:
            raise ValueError("n_ues must be >= 1")
        if self.n_subframes < 0:
            raise ValueError("n_subframes must be >= 0")
        if self.tick_ms < 0:
            raise ValueError("tick_ms must be >= 0")
        if any(t <= 0 for t in self.tbs_choices):
            raise ValueError("TB sizes must be positive")

    @property
    def tbs_choices(self) -> tuple[int, ...]:
        if isinstance(self.tbs_bits, int):
            return (self.tbs_bits,)
        choices = tuple(int(t) for t in self.tbs_bits)
        if not choices:
            raise ValueError("empty TB size set")
        return choices


@dataclass(frozen=True)
class ChannelModel:
    """BPSK over AWGN with unit symbol energy."""

    snr_db: float = 3.0

    @property
    def noise_var(self) -> float:
        return 10.0 ** (-self.snr_db / 10.0)


@dataclass(eq=False)
class Subframe:
    subframe_id: int
    tbs: list[TransportBlock]


@dataclass(eq=False)
class UplinkTB:
    """A received TB: its segmentation plus channel LLRs for every code block."""

    tb: TransportBlock
    info: SegmentationInfo
    llrs: list[LlrBlock]

    @property
    def key(self) -> tuple[int, int]:
        return self.tb.key


@dataclass(eq=False)
class UplinkSubframe:
    subframe_id: int
    tbs: list[UplinkTB] = field(default_factory=list)


def _rng(*entropy: int) -> np.random.Generator:
    return np.random.default_rng([int(e) & 0xFFFFFFFF for e in entropy])


def generate_subframe(profile: TrafficProfile, subframe_id: int) -> Subframe:
    """TBs of every UE for one subframe; deterministic in (seed, subframe_id)."""
    rng = _rng(profile.seed, subframe_id, 0x7B5)
    choices = profile.tbs_choices
    tbs = []
    for ue in range(profile.n_ues):
        size = choices[0] if len(choices) == 1 else choices[int(rng.integers(len(choices)))]
        payload = rng.integers(0, 2, size, dtype=np.uint8)
        tbs.append(TransportBlock(ue, subframe_id, payload))
    return Subframe(subframe_id, tbs)


def channel_pass(eb: EncodedBlock, ch: ChannelModel, seed) -> LlrBlock:
    """Map bits to +/-1, add white Gaussian noise, return ``2y / sigma^2``."""
    sigma2 = ch.noise_var
    if not sigma2 > 0:
        raise ValueError("noise variance must be positive")
    entropy = [seed] if isinstance(seed, (int, np.integer)) else list(seed)
    rng = _rng(*entropy)
    x = 1.0 - 2.0 * eb.serialize().astype(np.float64)
    y = x + rng.normal(0.0, np.sqrt(sigma2), x.size)
    llr = 2.0 * y / sigma2
    k = eb.k
    return LlrBlock(llr[:k], llr[k : 2 * k], llr[2 * k : 3 * k], llr[3 * k :])


def transmit_tb(tb: TransportBlock, ch: ChannelModel, seed: int) -> UplinkTB:
    """UE-side encode of one TB followed by the channel (outside any timing)."""
    blocks = segment_tb(tb)
    llrs = [
        channel_pass(turbo_encode(cb), ch, (seed, tb.subframe_id, tb.ue_id, cb.index))
        for cb in blocks
    ]
    return UplinkTB(tb, segmentation_info(tb, blocks), llrs)


def transmit_subframe(sf: Subframe, ch: ChannelModel, seed: int) -> UplinkSubframe:
    return UplinkSubframe(sf.subframe_id, [transmit_tb(tb, ch, seed) for tb in sf.tbs])


def generate_run(profile: TrafficProfile) -> list[Subframe]:
    return [generate_subframe(profile, i) for i in range(profile.n_subframes)]


def mean_tbs(subframes: Sequence[Subframe]) -> float:
    sizes = [tb.tbs for sf in subframes for tb in sf.tbs]
    return float(np.mean(sizes)) if sizes else 0.0
