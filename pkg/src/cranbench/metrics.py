"""Performance captor, measurements collector and KPI computation.

Workers hand :class:`KpiRecord` objects to a per-worker bounded channel; a
collector thread drains the channels off the hot path. When a channel is full
the record is dropped and counted, the worker never blocks.

CSV schema (one record per line, integer nanosecond timestamps)::

    ccdu_id, subframe_id, ue_id, cb_index, granularity, direction, worker_id,
    iterations, outcome, n_tb, n_tb_lost,
    t_enqueue_ns, t_start_ns, t_code_start_ns, t_code_end_ns, t_end_ns,
    queue_wait_ns, conditioning_ns

``ue_id`` is -1 for whole-subframe jobs, ``cb_index`` is -1 unless the job is
a single code block, ``worker_id`` is -1 for purged jobs. Lines starting with
``#`` carry run metadata as ``# key=value``.
"""

from __future__ import annotations

import csv
import enum
import io
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Sequence

import numpy as np

now_ns = time.monotonic_ns


class Granularity(str, enum.Enum):
    SUBFRAME = "subframe"
    TB = "tb"
    CB = "cb"

    @classmethod
    def parse(cls, text) -> "Granularity":
        if isinstance(text, Granularity):
            return text
        t = str(text).strip().lower()
        if t in ("none", "sf", "subframe", "no"):
            return cls.SUBFRAME
        try:
            return cls(t)
        except ValueError:
            raise ValueError(f"unknown parallelism mode {text!r} (none, tb, cb)") from None

    @property
    def mode_name(self) -> str:
        return "none" if self is Granularity.SUBFRAME else self.value


class Direction(str, enum.Enum):
    ENCODE = "encode"
    DECODE = "decode"


class Outcome(str, enum.Enum):
    SUCCESS = "success"
    DECODE_FAILURE = "decode_failure"
    PURGED = "purged"


@dataclass(slots=True)
class KpiRecord:
    ccdu_id: int
    subframe_id: int
    ue_id: int
    cb_index: int
    granularity: Granularity
    direction: Direction
    worker_id: int
    iterations: int
    outcome: Outcome
    n_tb: int
    n_tb_lost: int
    t_enqueue: int
    t_start: int
    t_code_start: int
    t_code_end: int
    t_end: int

    @property
    def tb_key(self) -> tuple[int, int]:
        return (self.ue_id, self.subframe_id)

    @property
    def queue_wait(self) -> int:
        return self.t_start - self.t_enqueue

    @property
    def conditioning(self) -> int:
        return self.t_code_start - self.t_start

    @property
    def pre_processing(self) -> int:
        return self.t_code_start - self.t_enqueue

    @property
    def coding(self) -> int:
        return self.t_code_end - self.t_code_start

    @property
    def post_processing(self) -> int:
        return self.t_end - self.t_code_end

    @property
    def total(self) -> int:
        return self.t_end - self.t_enqueue

    def problems(self, max_iterations: int | None = None) -> list[str]:
        out = []
        ts = (self.t_enqueue, self.t_start, self.t_code_start, self.t_code_end, self.t_end)
        if any(a > b for a, b in zip(ts, ts[1:])):
            out.append(f"non-monotonic timestamps {ts}")
        if max_iterations is not None:
            if self.iterations > max_iterations:
                out.append(f"iterations {self.iterations} > {max_iterations}")
            if self.outcome is Outcome.DECODE_FAILURE and self.iterations != max_iterations:
                out.append("decode failure with iterations below the maximum")
        if not 0 <= self.n_tb_lost <= self.n_tb:
            out.append(f"n_tb_lost={self.n_tb_lost} outside [0, {self.n_tb}]")
        if (self.cb_index >= 0) != (self.granularity is Granularity.CB):
            out.append("cb_index must be set exactly for CB jobs")
        return out


COLUMNS = (
    "ccdu_id",
    "subframe_id",
    "ue_id",
    "cb_index",
    "granularity",
    "direction",
    "worker_id",
    "iterations",
    "outcome",
    "n_tb",
    "n_tb_lost",
    "t_enqueue_ns",
    "t_start_ns",
    "t_code_start_ns",
    "t_code_end_ns",
    "t_end_ns",
    "queue_wait_ns",
    "conditioning_ns",
)


def record_row(r: KpiRecord) -> list:
    return [
        r.ccdu_id,
        r.subframe_id,
        r.ue_id,
        r.cb_index,
        r.granularity.value,
        r.direction.value,
        r.worker_id,
        r.iterations,
        r.outcome.value,
        r.n_tb,
        r.n_tb_lost,
        r.t_enqueue,
        r.t_start,
        r.t_code_start,
        r.t_code_end,
        r.t_end,
        r.queue_wait,
        r.conditioning,
    ]


def _row_to_record(row: dict) -> KpiRecord:
    i = lambda name: int(row[name])  # noqa: E731
    return KpiRecord(
        ccdu_id=i("ccdu_id"),
        subframe_id=i("subframe_id"),
        ue_id=i("ue_id"),
        cb_index=i("cb_index"),
        granularity=Granularity(row["granularity"]),
        direction=Direction(row["direction"]),
        worker_id=i("worker_id"),
        iterations=i("iterations"),
        outcome=Outcome(row["outcome"]),
        n_tb=i("n_tb"),
        n_tb_lost=i("n_tb_lost"),
        t_enqueue=i("t_enqueue_ns"),
        t_start=i("t_start_ns"),
        t_code_start=i("t_code_start_ns"),
        t_code_end=i("t_code_end_ns"),
        t_end=i("t_end_ns"),
    )


# -- capture ----------------------------------------------------------------


class Channel:
    """Bounded single-producer channel owned by one worker."""

    __slots__ = ("worker_id", "capacity", "_buf", "emitted", "dropped")

    def __init__(self, worker_id: int, capacity: int):
        self.worker_id = worker_id
        self.capacity = capacity
        self._buf: deque = deque()
        self.emitted = 0
        self.dropped = 0

    def capture(self, record: KpiRecord) -> None:
        self.emitted += 1
        if len(self._buf) >= self.capacity:
            self.dropped += 1
        else:
            self._buf.append(record)


class _LockedChannel(Channel):
    """Channel shared by several threads (control-plane events such as purges)."""

    __slots__ = ("_lock",)

    def __init__(self, worker_id: int, capacity: int):
        super().__init__(worker_id, capacity)
        self._lock = threading.Lock()

    def capture(self, record: KpiRecord) -> None:
        with self._lock:
            Channel.capture(self, record)


CONTROL_CHANNEL = -1


class Collector:
    """Merges worker channels in a background thread.

    ``stream_path`` optionally names a file or FIFO (``os.mkfifo``) that
    receives every collected record as a CSV line, as it arrives.
    """

    def __init__(
        self,
        capacity: int = 1 << 16,
        poll_interval: float = 0.0005,
        stream_path: str | os.PathLike | None = None,
    ):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.poll_interval = poll_interval
        self.stream_path = stream_path
        self._channels: dict[int, Channel] = {}
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._stream = None
        self._writer = None
        self.records: list[KpiRecord] = []
        self.received = 0

    def channel(self, worker_id: int) -> Channel:
        with self._lock:
            ch = self._channels.get(worker_id)
            if ch is None:
                cls = _LockedChannel if worker_id == CONTROL_CHANNEL else Channel
                ch = self._channels[worker_id] = cls(worker_id, self.capacity)
            return ch

    def capture(self, worker_id: int, record: KpiRecord) -> None:
        self.channel(worker_id).capture(record)

    @property
    def emitted(self) -> int:
        return sum(c.emitted for c in list(self._channels.values()))

    @property
    def dropped(self) -> int:
        return sum(c.dropped for c in list(self._channels.values()))

    def start(self) -> "Collector":
        if self._thread is not None:
            return self
        if self.stream_path is not None:
            self._stream = open(self.stream_path, "w", newline="", buffering=1)
            self._writer = csv.writer(self._stream)
            self._writer.writerow(COLUMNS)
        self._stop.clear()
        self._thread = threading.Thread(target=self._run, name="kpi-collector", daemon=True)
        self._thread.start()
        return self

    def _drain(self) -> int:
        n = 0
        with self._lock:
            channels = list(self._channels.values())
        for ch in channels:
            buf = ch._buf
            while buf:
                rec = buf.popleft()
                self.records.append(rec)
                if self._writer is not None:
                    self._writer.writerow(record_row(rec))
                n += 1
        self.received += n
        return n

    def _run(self) -> None:
        while not self._stop.is_set():
            if not self._drain():
                self._stop.wait(self.poll_interval)
        self._drain()

    def stop(self) -> None:
        if self._thread is not None:
            self._stop.set()
            self._thread.join()
            self._thread = None
        self._drain()
        if self._stream is not None:
            self._stream.close()
            self._stream = None
            self._writer = None

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    def per_worker(self) -> dict[int, list[KpiRecord]]:
        out: dict[int, list[KpiRecord]] = {}
        for r in self.records:
            out.setdefault(r.worker_id, []).append(r)
        return out


# -- summary ----------------------------------------------------------------


@dataclass(frozen=True)
class DelayStats:
    """Delay statistics in nanoseconds."""

    count: int = 0
    mean: float = float("nan")
    p50: float = float("nan")
    p95: float = float("nan")
    p99: float = float("nan")
    max: float = float("nan")

    @classmethod
    def of(cls, samples: Sequence[float]) -> "DelayStats":
        a = np.asarray(samples, dtype=np.float64)
        if a.size == 0:
            return cls()
        p50, p95, p99 = np.percentile(a, [50, 95, 99])
        return cls(int(a.size), float(a.mean()), float(p50), float(p95), float(p99), float(a.max()))

    @property
    def dispersion(self) -> float:
        """p99 / p50."""
        return self.p99 / self.p50 if self.p50 > 0 else float("nan")


@dataclass(frozen=True)
class GroupSummary:
    direction: Direction
    granularity: Granularity
    jobs: int
    queue_wait: DelayStats
    conditioning: DelayStats
    pre_processing: DelayStats
    coding: DelayStats
    post_processing: DelayStats
    total: DelayStats
    mean_iterations: float


@dataclass(frozen=True)
class KpiSummary:
    groups: dict = field(default_factory=dict)
    subframe_latency: dict = field(default_factory=dict)
    loss_rate: float = 0.0
    lost_tbs: int = 0
    total_tbs: int = 0
    worker_jobs: dict = field(default_factory=dict)
    records: int = 0

    @property
    def empty(self) -> bool:
        return self.records == 0


def loss_accounting(records: Iterable[KpiRecord]) -> tuple[int, int]:
    """``(lost_tbs, total_tbs)`` over decode jobs, counting each TB once."""
    keyed: dict[tuple[int, int], bool] = {}
    lost = total = 0
    for r in records:
        if r.direction is not Direction.DECODE:
            continue
        if r.granularity is Granularity.SUBFRAME:
            total += r.n_tb
            lost += r.n_tb_lost
        else:
            failed = r.outcome is not Outcome.SUCCESS or r.n_tb_lost > 0
            keyed[r.tb_key] = keyed.get(r.tb_key, False) or failed
    total += len(keyed)
    lost += sum(keyed.values())
    return lost, total


def subframe_latencies(records: Iterable[KpiRecord]) -> dict[Direction, dict[int, int]]:
    """Per subframe: last job end minus first job enqueue."""
    span: dict[tuple[Direction, int], list[int]] = {}
    for r in records:
        s = span.get((r.direction, r.subframe_id))
        if s is None:
            span[(r.direction, r.subframe_id)] = [r.t_enqueue, r.t_end]
        else:
            s[0] = min(s[0], r.t_enqueue)
            s[1] = max(s[1], r.t_end)
    out: dict[Direction, dict[int, int]] = {}
    for (d, sf), (a, b) in span.items():
        out.setdefault(d, {})[sf] = b - a
    return out


def summarize(records: Sequence[KpiRecord]) -> KpiSummary:
    if not records:
        return KpiSummary()
    groups: dict[tuple[Direction, Granularity], list[KpiRecord]] = {}
    workers: dict[int, int] = {}
    for r in records:
        groups.setdefault((r.direction, r.granularity), []).append(r)
        if r.outcome is not Outcome.PURGED:
            workers[r.worker_id] = workers.get(r.worker_id, 0) + 1
    out = {}
    for key, rs in groups.items():
        done = [r for r in rs if r.outcome is not Outcome.PURGED]
        stat = lambda attr: DelayStats.of([getattr(r, attr) for r in done])  # noqa: E731
        out[key] = GroupSummary(
            direction=key[0],
            granularity=key[1],
            jobs=len(done),
            queue_wait=stat("queue_wait"),
            conditioning=stat("conditioning"),
            pre_processing=stat("pre_processing"),
            coding=stat("coding"),
            post_processing=stat("post_processing"),
            total=stat("total"),
            mean_iterations=float(np.mean([r.iterations for r in done])) if done else float("nan"),
        )
    lat = {d: DelayStats.of(list(v.values())) for d, v in subframe_latencies(records).items()}
    lost, total = loss_accounting(records)
    return KpiSummary(
        groups=out,
        subframe_latency=lat,
        loss_rate=(lost / total) if total else 0.0,
        lost_tbs=lost,
        total_tbs=total,
        worker_jobs=dict(sorted(workers.items())),
        records=len(records),
    )


def gain(baseline_mean: float, other_mean: float) -> float:
    """Relative latency reduction ``1 - other / baseline``."""
    return 1.0 - other_mean / baseline_mean


# -- export -----------------------------------------------------------------


def _write_meta(fh, meta: dict | None) -> None:
    fh.write(f"# exported_at={datetime.now(timezone.utc).isoformat()}\n")
    fh.write("# clock=monotonic_ns\n")
    for k, v in (meta or {}).items():
        fh.write(f"# {k}={v}\n")


def export_csv(records: Iterable[KpiRecord], path, meta: dict | None = None) -> None:
    try:
        with open(path, "w", newline="") as fh:
            _write_meta(fh, meta)
            w = csv.writer(fh)
            w.writerow(COLUMNS)
            w.writerows(record_row(r) for r in records)
    except OSError as exc:
        raise OSError(f"cannot write KPI records to {path}: {exc}") from exc


def read_csv(path) -> tuple[list[KpiRecord], dict[str, str]]:
    meta: dict[str, str] = {}
    body = io.StringIO()
    try:
        with open(path, newline="") as fh:
            for line in fh:
                if line.startswith("#"):
                    k, _, v = line[1:].strip().partition("=")
                    meta[k.strip()] = v.strip()
                else:
                    body.write(line)
    except OSError as exc:
        raise OSError(f"cannot read KPI records from {path}: {exc}") from exc
    body.seek(0)
    return [_row_to_record(row) for row in csv.DictReader(body)], meta


SUMMARY_COLUMNS = ("direction", "granularity", "kpi", "count", "mean_ns", "p50_ns", "p95_ns", "p99_ns", "max_ns")


def export_summary_csv(summary: KpiSummary, path, meta: dict | None = None) -> None:
    try:
        with open(path, "w", newline="") as fh:
            _write_meta(fh, meta)
            fh.write(f"# loss_rate={summary.loss_rate}\n")
            fh.write(f"# lost_tbs={summary.lost_tbs}\n# total_tbs={summary.total_tbs}\n")
            fh.write("# worker_jobs=" + ";".join(f"{k}:{v}" for k, v in summary.worker_jobs.items()) + "\n")
            w = csv.writer(fh)
            w.writerow(SUMMARY_COLUMNS)
            for (d, g), gs in summary.groups.items():
                for kpi in ("queue_wait", "conditioning", "pre_processing", "coding", "post_processing", "total"):
                    s: DelayStats = getattr(gs, kpi)
                    w.writerow([d.value, g.value, kpi, s.count, s.mean, s.p50, s.p95, s.p99, s.max])
            for d, s in summary.subframe_latency.items():
                w.writerow([d.value, "", "subframe_latency", s.count, s.mean, s.p50, s.p95, s.p99, s.max])
    except OSError as exc:
        raise OSError(f"cannot write KPI summary to {path}: {exc}") from exc

