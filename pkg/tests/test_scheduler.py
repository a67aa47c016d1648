import threading
import time

import numpy as np
import pytest

from cranbench.codec import LlrBlock, segment_tb, turbo_encode
from cranbench.metrics import Collector, Direction, Granularity, Outcome, summarize
from cranbench.scheduler import (
    JobQueue,
    PoolConfig,
    SchedulerError,
    ThreadPool,
    WorkerError,
    build_ccdus,
    cb_count,
)
from cranbench.workload import ChannelModel, TrafficProfile, UplinkSubframe, generate_subframe, transmit_subframe

HIGH_SNR = ChannelModel(6.0)


def uplink(sid, n_ues=2, tbs=24000, seed=0, snr=HIGH_SNR):
    sf = generate_subframe(TrafficProfile(n_ues=n_ues, tbs_bits=tbs, seed=seed), sid)
    return sf, transmit_subframe(sf, snr, seed)


def direction_of(sf):
    return Direction.DECODE if isinstance(sf, UplinkSubframe) else Direction.ENCODE


def run(subframes, mode, workers=1, **cfg):
    col = Collector()
    with col:
        with ThreadPool(PoolConfig(num_workers=workers, mode=mode, **cfg), col) as pool:
            for sf in subframes:
                pool.enqueue_subframe(sf)
            reports = [pool.await_subframe(sf.subframe_id, direction_of(sf), timeout=60) for sf in subframes]
    return reports, col.records, pool


def test_build_ccdus_order():
    sf, ul = uplink(0, n_ues=2, tbs=13000)
    ids = iter(range(100))
    cc = build_ccdus(ul, Granularity.CB, lambda: next(ids))
    assert [(c.tb_key[0], c.cb_index) for c in cc] == [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]
    assert [c.ccdu_id for c in cc] == list(range(6))
    assert len(build_ccdus(sf, Granularity.TB, lambda: 0)) == 2
    (whole,) = build_ccdus(sf, Granularity.SUBFRAME, lambda: 0)
    assert whole.tb_key == (-1, 0) and whole.direction is Direction.ENCODE
    with pytest.raises(TypeError):
        build_ccdus(object(), Granularity.CB, lambda: 0)


def test_cb_count():
    assert [cb_count(n) for n in (1, 6120, 6121, 24000)] == [1, 1, 2, 4]


def test_job_queue_fifo_and_close():
    from cranbench.scheduler import CCDU

    q = JobQueue()
    items = [CCDU(i, Granularity.TB, Direction.ENCODE, 0, [i], (i, 0)) for i in range(5)]
    q.put_many(items)
    assert all(c.t_enqueue > 0 for c in items)
    assert [q.get().ccdu_id for _ in range(2)] == [0, 1]
    assert [c.ccdu_id for c in q.remove_if(lambda c: c.ccdu_id == 3)] == [3]
    q.close()
    assert [q.get().ccdu_id, q.get().ccdu_id] == [2, 4]
    assert q.get() is None
    with pytest.raises(SchedulerError):
        q.put_many(items[:1])


def test_job_queue_blocks_until_put():
    from cranbench.scheduler import CCDU

    q = JobQueue()
    got = []
    t = threading.Thread(target=lambda: got.append(q.get()))
    t.start()
    time.sleep(0.05)
    assert not got
    q.put_many([CCDU(9, Granularity.TB, Direction.ENCODE, 0, [1], (0, 0))])
    t.join(2)
    assert got[0].ccdu_id == 9


def test_single_worker_runs_fifo():
    ups = [uplink(i, n_ues=2, tbs=13000)[1] for i in range(3)]
    col = Collector()
    with col:
        with ThreadPool(PoolConfig(num_workers=1, mode="cb"), col) as pool:
            for ul in ups:
                pool.enqueue_subframe(ul)
            for ul in ups:
                pool.await_subframe(ul.subframe_id)
    recs = sorted(col.records, key=lambda r: r.t_start)
    assert [r.ccdu_id for r in recs] == sorted(r.ccdu_id for r in recs)
    assert len(recs) == 18


@pytest.mark.parametrize("mode", ["none", "tb", "cb"])
def test_decode_and_encode_correct(mode):
    sfs, uls = zip(*(uplink(i, n_ues=2, tbs=(7000)) for i in range(2)))
    reports, records, pool = run(list(uls) + list(sfs), mode, workers=2)
    for rep, sf in zip(reports[:2], sfs):
        assert rep.complete and rep.lost == 0
        for tb in sf.tbs:
            assert np.array_equal(rep.tbs[tb.ue_id].payload, tb.payload)
    for rep, sf in zip(reports[2:], sfs):
        for tb in sf.tbs:
            expect = np.concatenate([turbo_encode(cb).serialize() for cb in segment_tb(tb)])
            assert np.array_equal(rep.tbs[tb.ue_id].encoded, expect)
    assert pool.enqueued == pool.completed + pool.purged


def inject(ul, ue, cb):
    utb = ul.tbs[ue]
    utb.llrs[cb] = LlrBlock.zeros(utb.llrs[cb].k)
    return ul


def test_purge_removes_queued_siblings_only():
    _, ul = uplink(0, n_ues=2, tbs=24000)
    inject(ul, 0, 1)
    (rep,), records, pool = run([ul], "cb", workers=1, max_iterations=2)
    assert rep.complete
    assert not rep.tbs[0].success and rep.tbs[0].payload is None
    assert rep.tbs[1].success
    purged = [r for r in records if r.outcome is Outcome.PURGED]
    assert sorted(r.cb_index for r in purged) == [2, 3]
    assert all(r.tb_key == (0, 0) and r.worker_id == -1 for r in purged)
    failed = [r for r in records if r.outcome is Outcome.DECODE_FAILURE]
    assert [(r.ue_id, r.cb_index, r.iterations) for r in failed] == [(0, 1, 2)]
    s = summarize(records)
    assert (s.lost_tbs, s.total_tbs, s.loss_rate) == (1, 2, 0.5)
    assert pool.purged == 2


@pytest.mark.parametrize("mode", ["none", "tb"])
def test_failure_in_coarse_modes_loses_tb(mode):
    _, ul = uplink(0, n_ues=2, tbs=24000)
    inject(ul, 1, 0)
    (rep,), records, _ = run([ul], mode, max_iterations=2)
    assert rep.tbs[0].success and not rep.tbs[1].success
    assert summarize(records).loss_rate == 0.5
    assert not any(r.outcome is Outcome.PURGED for r in records)


def test_failure_does_not_touch_other_subframes():
    _, a = uplink(0, n_ues=1, tbs=24000)
    _, b = uplink(1, n_ues=1, tbs=24000)
    inject(a, 0, 0)
    reports, records, _ = run([a, b], "cb", max_iterations=1)
    assert not reports[0].tbs[0].success and reports[1].tbs[0].success
    assert {r.subframe_id for r in records if r.outcome is Outcome.PURGED} == {0}


def test_workers_are_non_preemptive():
    uls = [uplink(i, n_ues=3, tbs=13000)[1] for i in range(3)]
    _, records, _ = run(uls, "cb", workers=3)
    by_worker = {}
    for r in records:
        by_worker.setdefault(r.worker_id, []).append((r.t_start, r.t_end))
    for spans in by_worker.values():
        spans.sort()
        assert all(e0 <= s1 for (_, e0), (s1, _) in zip(spans, spans[1:]))


def test_deterministic_across_modes_and_workers():
    uls = [uplink(i, n_ues=2, tbs=7000, snr=ChannelModel(-0.5))[1] for i in range(4)]
    seen = None
    for mode in ("none", "tb", "cb"):
        for workers in (1, 3):
            reports, _, _ = run(uls, mode, workers=workers, max_iterations=4)
            v = [(r.subframe_id, ue, t.success, None if t.payload is None else t.payload.tobytes())
                 for r in reports for ue, t in sorted(r.tbs.items())]
            assert seen is None or v == seen, (mode, workers)
            seen = v


def test_await_unknown_subframe():
    with ThreadPool(PoolConfig(num_workers=1)) as pool:
        with pytest.raises(KeyError):
            pool.await_subframe(42)


def test_enqueue_twice_rejected():
    _, ul = uplink(0, n_ues=1, tbs=100)
    with ThreadPool(PoolConfig(num_workers=1)) as pool:
        pool.enqueue_subframe(ul)
        with pytest.raises(SchedulerError):
            pool.enqueue_subframe(ul)
        pool.await_subframe(0)


def test_worker_exception_surfaces():
    _, ul = uplink(0, n_ues=1, tbs=100)
    bad = ul.tbs[0].llrs[0]
    ul.tbs[0].llrs[0] = LlrBlock(bad.sys_llr, bad.par1_llr[:-1], bad.par2_llr, bad.tail_llr)
    with ThreadPool(PoolConfig(num_workers=1)) as pool:
        pool.enqueue_subframe(ul)
        with pytest.raises(WorkerError):
            pool.await_subframe(0, timeout=10)


def test_shutdown_without_drain_is_bounded():
    uls = [uplink(i, n_ues=3, tbs=24000, snr=ChannelModel(-3.0))[1] for i in range(4)]
    col = Collector()
    with col:
        pool = ThreadPool(PoolConfig(num_workers=1, mode="cb", max_iterations=8, early_stop=False), col).start()
        for ul in uls:
            pool.enqueue_subframe(ul)
        t0 = time.monotonic()
        assert pool.shutdown(drain=False, timeout=5.0)
        assert time.monotonic() - t0 < 5.0
    assert pool.purged > 0
    assert pool.enqueued == pool.completed + pool.purged
    assert len(col.records) == pool.enqueued


def test_await_timeout_reports_incomplete():
    uls = [uplink(i, n_ues=3, tbs=24000)[1] for i in range(2)]
    with ThreadPool(PoolConfig(num_workers=1, mode="none", early_stop=False)) as pool:
        for ul in uls:
            pool.enqueue_subframe(ul)
        rep = pool.await_subframe(1, timeout=0.001, release=False)
        assert not rep.complete and not any(t.success for t in rep.tbs.values())
        assert pool.await_subframe(1, timeout=60).complete


def test_pinning_and_priority_are_best_effort():
    _, ul = uplink(0, n_ues=1, tbs=100)
    with ThreadPool(PoolConfig(num_workers=2, pinning=True, realtime_priority=True, idle="spin")) as pool:
        pool.enqueue_subframe(ul)
        assert pool.await_subframe(0).tbs[0].success
    assert set(pool.placement) == {0, 1}


@pytest.mark.parametrize("kw", [dict(num_workers=0), dict(max_iterations=0), dict(idle="poll"), dict(mode="x")])
def test_pool_config_validation(kw):
    with pytest.raises(ValueError):
        PoolConfig(**kw)


def test_ccdu_counts_per_mode():
    ids = iter(range(100))
    nxt = lambda: next(ids)  # noqa: E731
    sf3 = generate_subframe(TrafficProfile(n_ues=3, tbs_bits=5000), 0)
    assert len(build_ccdus(sf3, Granularity.TB, nxt)) == 3
    assert len(build_ccdus(sf3, Granularity.SUBFRAME, nxt)) == 1
    sf1 = generate_subframe(TrafficProfile(n_ues=1, tbs_bits=12000), 0)
    assert len(build_ccdus(sf1, Granularity.CB, nxt)) == 2
    from cranbench.workload import Subframe

    with ThreadPool(PoolConfig(num_workers=1)) as pool:
        assert pool.enqueue_subframe(Subframe(5, [])) == 0


def test_one_block_tb_failure_purges_nothing():
    _, ul = uplink(0, n_ues=2, tbs=3000)
    inject(ul, 0, 0)
    (rep,), records, pool = run([ul], "cb", max_iterations=2)
    assert not rep.tbs[0].success and rep.tbs[1].success
    assert pool.purged == 0


def test_more_workers_shorten_makespan():
    from cranbench.bench import physical_cores

    if physical_cores() < 4:
        pytest.skip(f"needs >= 4 physical cores, host has {physical_cores()}")
    sfs = [generate_subframe(TrafficProfile(n_ues=10, tbs_bits=6120, seed=3), 0)]
    uls = [transmit_subframe(sfs[0], HIGH_SNR, 0)]
    spans = {}
    for w in (1, 4):
        t0 = time.perf_counter()
        run(uls, "tb", workers=w, early_stop=False)
        spans[w] = time.perf_counter() - t0
    assert spans[4] < spans[1]
