"""Thread pool for channel-coding jobs.

One FIFO queue of CCDUs (channel-coding data units: a whole subframe, one TB
or one code block) is shared under a mutex. A dispatcher thread takes the
head of the queue whenever a worker is idle and hands it to that worker,
which runs it to completion. A decode failure purges the queued jobs of the
same TB.
"""

from __future__ import annotations

import itertools
import logging
import os
import threading
import time
import traceback
from collections import deque
from dataclasses import dataclass, field
from queue import SimpleQueue
from typing import Callable

import numpy as np

from .codec import (
    DecodeResult,
    reassemble_tb,
    segment_tb,
    segmentation_info,
    turbo_decode,
    turbo_encode,
)
from .codec.segmentation import CB_MAX_INFO_BITS, SegmentationInfo, TbOutcome
from .metrics import (
    CONTROL_CHANNEL,
    Channel,
    Collector,
    Direction,
    Granularity,
    KpiRecord,
    Outcome,
    now_ns,
)
from .workload import Subframe, UplinkSubframe, UplinkTB

log = logging.getLogger(__name__)

DEFAULT_WORKERS = 6
SUBFRAME_UE = -1


class SchedulerError(RuntimeError):
    pass


class WorkerError(SchedulerError):
    """A job raised inside a worker; the run is aborted."""


@dataclass(frozen=True)
class PoolConfig:
    num_workers: int = DEFAULT_WORKERS
    mode: Granularity = Granularity.CB
    pinning: bool = False
    realtime_priority: bool = False
    max_iterations: int = 8
    early_stop: bool = True
    idle: str = "block"
    spin_us: float = 50.0
    drain_on_shutdown: bool = True
    shutdown_timeout: float = 10.0

    def __post_init__(self):
        if self.num_workers < 1:
            raise ValueError("num_workers must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.idle not in ("block", "spin"):
            raise ValueError("idle must be 'block' or 'spin'")
        object.__setattr__(self, "mode", Granularity.parse(self.mode))


@dataclass(eq=False)
class CCDU:
    ccdu_id: int
    granularity: Granularity
    direction: Direction
    subframe_id: int
    items: list
    tb_key: tuple[int, int]
    cb_index: int | None = None
    t_enqueue: int = 0

    def __post_init__(self):
        if not self.items:
            raise ValueError("CCDU payload must not be empty")
        if (self.cb_index is not None) != (self.granularity is Granularity.CB):
            raise ValueError("cb_index must be given exactly for code-block CCDUs")


class JobQueue:
    """FIFO of CCDUs guarded by a mutex, with a pending-job counter."""

    def __init__(self):
        self._items: deque[CCDU] = deque()
        self._lock = threading.Lock()
        self._cv = threading.Condition(self._lock)
        self._closed = False

    def __len__(self) -> int:
        return len(self._items)

    @property
    def pending(self) -> int:
        with self._lock:
            return len(self._items)

    def put_many(self, ccdus: list[CCDU]) -> None:
        with self._cv:
            if self._closed:
                raise SchedulerError("queue is closed")
            t = now_ns()
            for c in ccdus:
                c.t_enqueue = t
                self._items.append(c)
            self._cv.notify()

    def get(self, spin_s: float = 0.0) -> CCDU | None:
        """Remove the head; blocks while empty. ``None`` once closed and empty."""
        if spin_s > 0 and not self._items:
            deadline = time.perf_counter() + spin_s
            while not self._items and not self._closed and time.perf_counter() < deadline:
                time.sleep(0)
        with self._cv:
            while not self._items:
                if self._closed:
                    return None
                self._cv.wait()
            return self._items.popleft()

    def remove_if(self, pred: Callable[[CCDU], bool]) -> list[CCDU]:
        with self._lock:
            keep: deque[CCDU] = deque()
            removed = []
            for c in self._items:
                (removed if pred(c) else keep).append(c)
            self._items = keep
            return removed

    def close(self) -> None:
        with self._cv:
            self._closed = True
            self._cv.notify_all()


@dataclass(eq=False)
class _TbState:
    info: SegmentationInfo
    cb_results: dict = field(default_factory=dict)
    outcome: TbOutcome | None = None
    encoded: dict = field(default_factory=dict)
    lost: bool = False


@dataclass(eq=False)
class _SubframeState:
    direction: Direction
    tbs: dict[int, _TbState]
    pending: int = 0


@dataclass(eq=False)
class TbReport:
    ue_id: int
    success: bool
    payload: np.ndarray | None = None
    encoded: np.ndarray | None = None


@dataclass(eq=False)
class SubframeReport:
    subframe_id: int
    direction: Direction
    complete: bool
    tbs: dict[int, TbReport]

    @property
    def lost(self) -> int:
        return sum(not r.success for r in self.tbs.values())


def build_ccdus(
    sf: Subframe | UplinkSubframe, mode: Granularity, next_id: Callable[[], int]
) -> list[CCDU]:
    """Split a subframe into CCDUs, in UE order then CB index order."""
    mode = Granularity.parse(mode)
    if isinstance(sf, UplinkSubframe):
        direction = Direction.DECODE
    elif isinstance(sf, Subframe):
        direction = Direction.ENCODE
    else:
        raise TypeError(f"expected Subframe or UplinkSubframe, got {type(sf).__name__}")
    sid = sf.subframe_id
    if not sf.tbs:
        return []
    if mode is Granularity.SUBFRAME:
        return [CCDU(next_id(), mode, direction, sid, list(sf.tbs), (SUBFRAME_UE, sid))]
    out = []
    for tb in sf.tbs:
        if mode is Granularity.TB:
            out.append(CCDU(next_id(), mode, direction, sid, [tb], tb.key))
        elif direction is Direction.ENCODE:
            for cb in segment_tb(tb):
                out.append(CCDU(next_id(), mode, direction, sid, [cb], tb.key, cb.index))
        else:
            for idx in range(tb.info.num_blocks):
                out.append(CCDU(next_id(), mode, direction, sid, [tb], tb.key, idx))
    return out


class _Worker(threading.Thread):
    def __init__(self, pool: "ThreadPool", wid: int):
        super().__init__(name=f"cc-worker-{wid}", daemon=True)
        self.pool = pool
        self.wid = wid
        self.inbox: SimpleQueue = SimpleQueue()
        self.channel: Channel | None = pool.collector.channel(wid) if pool.collector else None

    def run(self) -> None:
        self.pool._local.channel = self.channel
        self.pool._apply_placement(self.wid)
        while True:
            ccdu = self.inbox.get()
            if ccdu is None:
                return
            try:
                self.pool._execute(self, ccdu)
            except Exception:  # noqa: BLE001
                self.pool._worker_failed(ccdu, traceback.format_exc())
            self.pool._idle.put(self.wid)


class ThreadPool:
    """Dispatcher plus ``num_workers`` non-preemptive worker threads."""

    def __init__(self, config: PoolConfig = PoolConfig(), collector: Collector | None = None):
        self.config = config
        self.collector = collector
        self.queue = JobQueue()
        self._idle: SimpleQueue = SimpleQueue()
        self._lock = threading.Lock()
        self._done = threading.Condition(self._lock)
        self._local = threading.local()
        self._subframes: dict[tuple[Direction, int], _SubframeState] = {}
        self._ids = itertools.count()
        self._workers: list[_Worker] = []
        self._dispatcher: threading.Thread | None = None
        self._errors: list[str] = []
        self.placement: dict[int, str] = {}
        self.enqueued = 0
        self.completed = 0
        self.purged = 0

    # -- lifecycle ------------------------------------------------------------

    def start(self) -> "ThreadPool":
        if self._dispatcher is not None:
            return self
        self._workers = [_Worker(self, i) for i in range(self.config.num_workers)]
        for w in self._workers:
            self._idle.put(w.wid)
            w.start()
        self._dispatcher = threading.Thread(target=self._dispatch_loop, name="cc-dispatcher", daemon=True)
        self._dispatcher.start()
        return self

    def shutdown(self, drain: bool | None = None, timeout: float | None = None) -> bool:
        """Stop the pool. Without ``drain`` queued jobs are cancelled (recorded
        as purged). Returns False if threads did not exit within ``timeout``."""
        drain = self.config.drain_on_shutdown if drain is None else drain
        timeout = self.config.shutdown_timeout if timeout is None else timeout
        if not drain:
            self._cancel_queued()
        self.queue.close()
        if self._dispatcher is None:
            return True
        deadline = time.monotonic() + timeout
        threads = [self._dispatcher, *self._workers]
        for t in threads:
            t.join(max(0.0, deadline - time.monotonic()))
        return not any(t.is_alive() for t in threads)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.shutdown()

    def _dispatch_loop(self) -> None:
        spin = self.config.spin_us * 1e-6 if self.config.idle == "spin" else 0.0
        while True:
            wid = self._idle.get()
            ccdu = self.queue.get(spin)
            if ccdu is None:
                break
            self._workers[wid].inbox.put(ccdu)
        for w in self._workers:
            w.inbox.put(None)

    def _apply_placement(self, wid: int) -> None:
        notes = []
        if self.config.pinning:
            try:
                cpus = sorted(os.sched_getaffinity(0))
                cpu = cpus[wid % len(cpus)]
                os.sched_setaffinity(0, {cpu})
                notes.append(f"cpu{cpu}")
            except (AttributeError, OSError) as exc:
                log.info("worker %d: core pinning skipped (%s)", wid, exc)
                notes.append("unpinned")
        if self.config.realtime_priority:
            try:
                os.sched_setscheduler(0, os.SCHED_FIFO, os.sched_param(1))
                notes.append("SCHED_FIFO")
            except (AttributeError, OSError) as exc:
                log.info("worker %d: real-time priority skipped (%s)", wid, exc)
                notes.append("default-priority")
        with self._lock:
            self.placement[wid] = ",".join(notes) or "default"

    # -- producer side --------------------------------------------------------

    def _next_id(self) -> int:
        return next(self._ids)

    def enqueue_subframe(self, sf: Subframe | UplinkSubframe, mode: Granularity | str | None = None) -> int:
        """Queue one subframe's channel-coding jobs; returns the CCDU count."""
        mode = self.config.mode if mode is None else Granularity.parse(mode)
        ccdus = build_ccdus(sf, mode, self._next_id)
        if not ccdus:
            return 0
        direction = ccdus[0].direction
        key = (direction, sf.subframe_id)
        tbs = {}
        for tb in sf.tbs:
            info = tb.info if isinstance(tb, UplinkTB) else segmentation_info(tb)
            tbs[tb.tb.ue_id if isinstance(tb, UplinkTB) else tb.ue_id] = _TbState(info)
        with self._lock:
            if key in self._subframes:
                raise SchedulerError(f"subframe {sf.subframe_id} ({direction.value}) already queued")
            self._subframes[key] = _SubframeState(direction, tbs, pending=len(ccdus))
            self.enqueued += len(ccdus)
        self.queue.put_many(ccdus)
        return len(ccdus)

    # -- worker side ----------------------------------------------------------

    def _execute(self, worker: _Worker, ccdu: CCDU) -> None:
        if ccdu.direction is Direction.ENCODE:
            record, results = self._encode_job(worker.wid, ccdu)
        else:
            record, results = self._decode_job(worker.wid, ccdu)
        if worker.channel is not None:
            worker.channel.capture(record)
        self._complete(ccdu, results)

    def _encode_job(self, wid: int, ccdu: CCDU):
        t_start = now_ns()
        if ccdu.granularity is Granularity.CB:
            blocks = [(ccdu.tb_key[0], ccdu.items[0])]
        else:
            blocks = [(tb.ue_id, cb) for tb in ccdu.items for cb in segment_tb(tb)]
        t_code_start = now_ns()
        encoded = [turbo_encode(cb) for _, cb in blocks]
        t_code_end = now_ns()
        per_tb: dict[int, dict[int, np.ndarray]] = {}
        for (ue, cb), eb in zip(blocks, encoded):
            per_tb.setdefault(ue, {})[cb.index] = eb.serialize()
        t_end = now_ns()
        record = self._record(ccdu, wid, 0, Outcome.SUCCESS, len(per_tb), 0,
                              t_start, t_code_start, t_code_end, t_end)
        return record, ("encoded", per_tb)

    def _decode_job(self, wid: int, ccdu: CCDU):
        cfg = self.config
        t_start = now_ns()
        if ccdu.granularity is Granularity.CB:
            utb: UplinkTB = ccdu.items[0]
            jobs = [(utb, ccdu.cb_index)]
        else:
            jobs = [(utb, i) for utb in ccdu.items for i in range(utb.info.num_blocks)]
        for utb, i in jobs:
            utb.llrs[i].validate()
        t_code_start = now_ns()
        results: dict[int, dict[int, DecodeResult]] = {}
        failed_ues: set[int] = set()
        iterations = 0
        for utb, i in jobs:
            ue = utb.tb.ue_id
            if ue in failed_ues:
                continue  # TB already lost within this job
            r = turbo_decode(utb.llrs[i], cfg.max_iterations, cfg.early_stop)
            iterations = max(iterations, r.iterations_used)
            results.setdefault(ue, {})[i] = r
            if not r.success:
                failed_ues.add(ue)
        t_code_end = now_ns()
        for ue in failed_ues:
            self.purge_tb((ue, ccdu.subframe_id))
        if ccdu.granularity is Granularity.CB:
            payload = ("cb", results)
            n_tb = 1
        else:
            outcomes = {}
            for utb in ccdu.items:
                ue = utb.tb.ue_id
                if ue in failed_ues:
                    outcomes[ue] = TbOutcome(utb.key, False, None)
                else:
                    outcomes[ue] = reassemble_tb(results[ue], utb.info)
            payload = ("tb", outcomes)
            n_tb = len(ccdu.items)
        t_end = now_ns()
        outcome = Outcome.DECODE_FAILURE if failed_ues else Outcome.SUCCESS
        record = self._record(ccdu, wid, iterations, outcome, n_tb, len(failed_ues),
                              t_start, t_code_start, t_code_end, t_end)
        return record, payload

    def _record(self, ccdu, wid, iterations, outcome, n_tb, n_lost, t0, t1, t2, t3) -> KpiRecord:
        return KpiRecord(
            ccdu_id=ccdu.ccdu_id,
            subframe_id=ccdu.subframe_id,
            ue_id=ccdu.tb_key[0],
            cb_index=-1 if ccdu.cb_index is None else ccdu.cb_index,
            granularity=ccdu.granularity,
            direction=ccdu.direction,
            worker_id=wid,
            iterations=iterations,
            outcome=outcome,
            n_tb=n_tb,
            n_tb_lost=n_lost,
            t_enqueue=ccdu.t_enqueue,
            t_start=t0,
            t_code_start=t1,
            t_code_end=t2,
            t_end=t3,
        )

    def _complete(self, ccdu: CCDU, results) -> None:
        kind, data = results
        with self._done:
            state = self._subframes[(ccdu.direction, ccdu.subframe_id)]
            if kind == "encoded":
                for ue, blocks in data.items():
                    state.tbs[ue].encoded.update(blocks)
            elif kind == "cb":
                for ue, by_idx in data.items():
                    tb = state.tbs[ue]
                    if not tb.lost:  # results of a purged TB are discarded
                        tb.cb_results.update(by_idx)
            else:
                for ue, outcome in data.items():
                    state.tbs[ue].outcome = outcome
                    if not outcome.success:
                        state.tbs[ue].lost = True
            state.pending -= 1
            self.completed += 1
            self._done.notify_all()

    def _worker_failed(self, ccdu: CCDU, tb_text: str) -> None:
        log.error("worker job %d failed:\n%s", ccdu.ccdu_id, tb_text)
        with self._done:
            self._errors.append(tb_text)
            state = self._subframes.get((ccdu.direction, ccdu.subframe_id))
            if state is not None:
                for ue in self._ues_of(ccdu):
                    state.tbs[ue].lost = True
                state.pending -= 1
            self.completed += 1
            self._done.notify_all()

    @staticmethod
    def _ues_of(ccdu: CCDU) -> list[int]:
        if ccdu.tb_key[0] != SUBFRAME_UE:
            return [ccdu.tb_key[0]]
        return [tb.tb.ue_id if isinstance(tb, UplinkTB) else tb.ue_id for tb in ccdu.items]

    # -- purge ----------------------------------------------------------------

    def purge_tb(self, tb_key: tuple[int, int]) -> int:
        """Drop queued decode jobs of ``tb_key`` and mark the TB lost.

        Jobs already running finish; their results are discarded.
        """
        ue, sid = tb_key
        removed = self.queue.remove_if(
            lambda c: c.direction is Direction.DECODE and c.tb_key == tb_key
        )
        self._account_purged(removed)
        with self._done:
            state = self._subframes.get((Direction.DECODE, sid))
            if state is not None and ue in state.tbs:
                state.tbs[ue].lost = True
        return len(removed)

    def _cancel_queued(self) -> int:
        removed = self.queue.remove_if(lambda c: True)
        self._account_purged(removed)
        with self._done:
            for c in removed:
                state = self._subframes.get((c.direction, c.subframe_id))
                if state is not None:
                    for ue in self._ues_of(c):
                        state.tbs[ue].lost = True
        return len(removed)

    def _account_purged(self, removed: list[CCDU]) -> None:
        if not removed:
            return
        t = now_ns()
        channel = getattr(self._local, "channel", None)
        if channel is None and self.collector is not None:
            channel = self.collector.channel(CONTROL_CHANNEL)
        with self._done:
            for c in removed:
                self._subframes[(c.direction, c.subframe_id)].pending -= 1
            self.purged += len(removed)
            self._done.notify_all()
        if channel is not None:
            for c in removed:
                n_tb = len(self._ues_of(c))
                channel.capture(self._record(c, -1, 0, Outcome.PURGED, n_tb, n_tb, t, t, t, t))

    # -- results --------------------------------------------------------------

    def raise_if_failed(self) -> None:
        if self._errors:
            raise WorkerError(f"{len(self._errors)} job(s) failed; first:\n{self._errors[0]}")

    def await_subframe(
        self,
        subframe_id: int,
        direction: Direction | str | None = None,
        timeout: float | None = None,
        release: bool = True,
    ) -> SubframeReport:
        """Block until every CCDU of the subframe is completed or purged."""
        with self._done:
            if direction is None:
                keys = [k for k in self._subframes if k[1] == subframe_id]
                if not keys:
                    raise KeyError(f"subframe {subframe_id} was never enqueued (or already collected)")
                if len(keys) > 1:
                    raise ValueError(f"subframe {subframe_id} queued in both directions; pass direction")
                key = keys[0]
            else:
                key = (Direction(direction), subframe_id)
                if key not in self._subframes:
                    raise KeyError(f"subframe {subframe_id} ({key[0].value}) was never enqueued")
            state = self._subframes[key]
            complete = self._done.wait_for(
                lambda: state.pending == 0 or bool(self._errors), timeout
            )
            complete = complete and state.pending == 0
            if release and complete:
                del self._subframes[key]
        self.raise_if_failed()
        return self._report(subframe_id, state, complete)

    def _report(self, sid: int, state: _SubframeState, complete: bool) -> SubframeReport:
        out = {}
        for ue, tb in state.tbs.items():
            n = tb.info.num_blocks
            if state.direction is Direction.ENCODE:
                ok = complete and len(tb.encoded) == n
                bits = np.concatenate([tb.encoded[i] for i in range(n)]) if ok else None
                out[ue] = TbReport(ue, ok, encoded=bits)
                continue
            if tb.outcome is not None:
                o = tb.outcome
            elif tb.lost or len(tb.cb_results) != n:
                o = TbOutcome(tb.info.tb_ref, False, None)
            else:
                o = reassemble_tb(tb.cb_results, tb.info)
            ok = complete and o.success and not tb.lost
            out[ue] = TbReport(ue, ok, payload=o.payload if ok else None)
        return SubframeReport(sid, state.direction, complete, out)


def cb_count(tbs_bits: int) -> int:
    return -(-tbs_bits // CB_MAX_INFO_BITS)
