"""End-to-end coding benchmark: traffic -> thread pool -> KPIs, per parallelism mode."""

from __future__ import annotations

import hashlib
import logging
import os
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .metrics import Collector, Direction, Granularity, KpiRecord, KpiSummary, summarize
from .scheduler import PoolConfig, SubframeReport, ThreadPool
from .workload import (
    ChannelModel,
    Subframe,
    TrafficProfile,
    UplinkSubframe,
    generate_subframe,
    transmit_subframe,
)

log = logging.getLogger(__name__)

PACINGS = ("lockstep", "batch", "tick")


@dataclass(frozen=True)
class BenchConfig:
    profile: TrafficProfile = TrafficProfile()
    channel: ChannelModel = ChannelModel(snr_db=3.0)
    pool: PoolConfig = PoolConfig()
    directions: tuple[Direction, ...] = (Direction.DECODE, Direction.ENCODE)
    # lockstep: one subframe in flight at a time, as fast as possible
    # batch: everything queued up front; tick: one subframe every tick_ms
    pacing: str = "lockstep"
    collector_capacity: int = 1 << 16
    stream_path: str | None = None

    def __post_init__(self):
        if self.pacing not in PACINGS:
            raise ValueError(f"pacing must be one of {PACINGS}")
        if not self.directions:
            raise ValueError("at least one direction is required")


@dataclass(eq=False)
class Traffic:
    downlink: list[Subframe]
    uplink: list[UplinkSubframe]


@dataclass(eq=False)
class ModeResult:
    mode: Granularity
    records: list[KpiRecord]
    reports: dict[tuple[Direction, int], SubframeReport]
    summary: KpiSummary
    wall_s: float
    emitted: int = 0
    received: int = 0
    dropped: int = 0
    placement: dict = field(default_factory=dict)

    def verdicts(self) -> dict[tuple[str, int, int], tuple[bool, str | None]]:
        """``(direction, subframe, ue) -> (success, payload digest)``; timing-free."""
        out = {}
        for (d, sid), rep in self.reports.items():
            for ue, tb in rep.tbs.items():
                data = tb.payload if d is Direction.DECODE else tb.encoded
                digest = hashlib.sha1(data.tobytes()).hexdigest() if data is not None else None
                out[(d.value, sid, ue)] = (tb.success, digest)
        return out


def prepare_traffic(profile: TrafficProfile, channel: ChannelModel, directions=(Direction.DECODE, Direction.ENCODE)) -> Traffic:
    downlink = [generate_subframe(profile, i) for i in range(profile.n_subframes)]
    uplink = []
    if Direction.DECODE in directions:
        uplink = [transmit_subframe(sf, channel, profile.seed) for sf in downlink]
    return Traffic(downlink if Direction.ENCODE in directions else [], uplink)


def run_mode(traffic: Traffic, cfg: BenchConfig, mode: Granularity | str) -> ModeResult:
    mode = Granularity.parse(mode)
    pool_cfg = replace(cfg.pool, mode=mode)
    collector = Collector(capacity=cfg.collector_capacity, stream_path=cfg.stream_path)
    reports: dict[tuple[Direction, int], SubframeReport] = {}
    units: list[list] = []
    n = max(len(traffic.uplink), len(traffic.downlink))
    for i in range(n):
        group = []
        if traffic.uplink:
            group.append(traffic.uplink[i])
        if traffic.downlink:
            group.append(traffic.downlink[i])
        units.append(group)

    collector.start()
    pool = ThreadPool(pool_cfg, collector).start()
    t0 = time.perf_counter()
    try:
        if cfg.pacing == "lockstep":
            for group in units:
                for sf in group:
                    pool.enqueue_subframe(sf)
                for sf in group:
                    _collect(pool, sf, reports)
        else:
            tick = cfg.profile.tick_ms / 1000.0 if cfg.pacing == "tick" else 0.0
            start = time.perf_counter()
            for i, group in enumerate(units):
                if tick:
                    delay = start + i * tick - time.perf_counter()
                    if delay > 0:
                        time.sleep(delay)
                for sf in group:
                    pool.enqueue_subframe(sf)
            for group in units:
                for sf in group:
                    _collect(pool, sf, reports)
        wall = time.perf_counter() - t0
    finally:
        pool.shutdown()
        collector.stop()
    return ModeResult(
        mode=mode,
        records=collector.records,
        reports=reports,
        summary=summarize(collector.records),
        wall_s=wall,
        emitted=collector.emitted,
        received=collector.received,
        dropped=collector.dropped,
        placement=dict(pool.placement),
    )


def _collect(pool: ThreadPool, sf, reports) -> None:
    direction = Direction.DECODE if isinstance(sf, UplinkSubframe) else Direction.ENCODE
    if not sf.tbs:
        return
    reports[(direction, sf.subframe_id)] = pool.await_subframe(sf.subframe_id, direction)


def run_benchmark(cfg: BenchConfig, modes: Sequence[Granularity | str] = ("none", "cb")) -> dict[Granularity, ModeResult]:
    """Run every mode on identical traffic (same seed, same channel realization)."""
    traffic = prepare_traffic(cfg.profile, cfg.channel, cfg.directions)
    return {Granularity.parse(m): run_mode(traffic, cfg, m) for m in modes}


def physical_cores() -> int:
    try:
        import psutil

        n = psutil.cpu_count(logical=False)
    except Exception:  # noqa: BLE001
        n = None
    return n or os.cpu_count() or 1


def modes_from(text: str | Iterable[str]) -> list[Granularity]:
    items = text.split(",") if isinstance(text, str) else list(text)
    return [Granularity.parse(m) for m in items if str(m).strip()]
