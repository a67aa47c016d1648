import numpy as np
import pytest

from cranbench.codec import turbo_encode
from cranbench.workload import (
    ChannelModel,
    TrafficProfile,
    channel_pass,
    generate_run,
    generate_subframe,
    mean_tbs,
    transmit_subframe,
)


def test_subframe_deterministic():
    p = TrafficProfile(n_ues=3, tbs_bits=1000, seed=5)
    a, b = generate_subframe(p, 4), generate_subframe(p, 4)
    assert all(x == y for x, y in zip(a.tbs, b.tbs))
    assert [tb.key for tb in a.tbs] == [(0, 4), (1, 4), (2, 4)]
    other = generate_subframe(p, 5)
    assert not np.array_equal(a.tbs[0].payload, other.tbs[0].payload)
    reseeded = generate_subframe(TrafficProfile(n_ues=3, tbs_bits=1000, seed=6), 4)
    assert not np.array_equal(a.tbs[0].payload, reseeded.tbs[0].payload)


def test_tbs_choices():
    p = TrafficProfile(n_ues=4, tbs_bits=(100, 200, 300), n_subframes=30)
    sizes = {tb.tbs for sf in generate_run(p) for tb in sf.tbs}
    assert sizes == {100, 200, 300}
    assert 100 <= mean_tbs(generate_run(p)) <= 300
    assert mean_tbs([]) == 0.0


@pytest.mark.parametrize("kw", [dict(n_ues=0), dict(n_subframes=-1), dict(tick_ms=-1.0),
                                dict(tbs_bits=0), dict(tbs_bits=())])
def test_profile_validation(kw):
    with pytest.raises(ValueError):
        TrafficProfile(**kw)


def test_channel_statistics(rng):
    ch = ChannelModel(snr_db=0.0)
    assert ch.noise_var == pytest.approx(1.0)
    eb = turbo_encode(np.zeros(6144, dtype=np.uint8))
    llr = channel_pass(eb, ch, 3).serialize()
    # all-zero codeword -> y ~ N(1, sigma^2), llr = 2y/sigma^2
    assert llr.mean() == pytest.approx(2.0, abs=0.05)
    assert llr.std() == pytest.approx(2.0, abs=0.05)


def test_channel_high_snr_sign(rng):
    eb = turbo_encode(rng.integers(0, 2, 512, dtype=np.uint8))
    llr = channel_pass(eb, ChannelModel(30.0), (1, 2))
    hard = (llr.serialize() < 0).astype(np.uint8)
    assert np.array_equal(hard, eb.serialize())
    assert np.array_equal(channel_pass(eb, ChannelModel(30.0), (1, 2)).serialize(), llr.serialize())


def test_transmit_subframe_layout():
    p = TrafficProfile(n_ues=2, tbs_bits=7000)
    ul = transmit_subframe(generate_subframe(p, 0), ChannelModel(3.0), 0)
    assert len(ul.tbs) == 2
    for utb in ul.tbs:
        assert utb.info.num_blocks == 2 == len(utb.llrs)
        for llr, k in zip(utb.llrs, utb.info.block_sizes):
            assert llr.k == k
            llr.validate()


def test_fixed_size_structure():
    sf = generate_subframe(TrafficProfile(n_ues=3, tbs_bits=8000), 0)
    assert [tb.tbs for tb in sf.tbs] == [8000, 8000, 8000]


def test_mean_tbs_law_of_large_numbers():
    p = TrafficProfile(n_ues=1, tbs_bits=(4000, 12000), n_subframes=10_000, seed=2)
    assert abs(mean_tbs(generate_run(p)) - 8000) / 8000 < 0.02


@pytest.mark.parametrize("snr,expect_ok", [(60.0, True), (-20.0, False)])
def test_snr_extremes(snr, expect_ok):
    from cranbench.codec import turbo_decode
    from cranbench.workload import transmit_tb

    p = TrafficProfile(n_ues=1, tbs_bits=488, n_subframes=100)
    results = []
    for sf in generate_run(p):
        utb = transmit_tb(sf.tbs[0], ChannelModel(snr), 1)
        r = turbo_decode(utb.llrs[0])
        results.append(r.success)
        if expect_ok:
            assert r.iterations_used <= 2
    assert all(results) if expect_ok else not any(results)
