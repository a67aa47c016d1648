import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cranbench.codec import (
    SUPPORTED_SIZES,
    EncodedBlock,
    LengthMismatch,
    LlrBlock,
    UnsupportedBlockSize,
    crc24_attach,
    depuncture,
    puncture,
    qpp_params,
    turbo_decode,
    turbo_encode,
)
from cranbench.codec.turbo import HALF_RATE_PATTERN, TAIL_LEN, rsc_encode, rsc_terminate, siso_extrinsic
from oracles import maxlog_extrinsic_bruteforce, rsc_shift_register, turbo_encode_reference


def crc_block(rng, k):
    return crc24_attach(rng.integers(0, 2, k - 24, dtype=np.uint8))


def noisy(eb, snr_db, rng):
    sigma2 = 10 ** (-snr_db / 10)
    x = 1.0 - 2.0 * eb.serialize()
    llr = 2 * (x + rng.normal(0, np.sqrt(sigma2), x.size)) / sigma2
    k = eb.k
    return LlrBlock(llr[:k], llr[k:2 * k], llr[2 * k:3 * k], llr[3 * k:])


# -- encoder ------------------------------------------------------------------


@pytest.mark.parametrize("k", [40, 512])
def test_encoder_matches_shift_register_oracle(k, rng, backend):
    for _ in range(100):
        bits = rng.integers(0, 2, k, dtype=np.uint8)
        ref = turbo_encode_reference(bits, *qpp_params(k))
        assert np.array_equal(turbo_encode(bits, backend=backend).serialize(), ref)


def test_rsc_matches_oracle(rng, backend):
    bits = rng.integers(0, 2, 97, dtype=np.uint8)
    par, state = rsc_encode(bits, backend=backend)
    ref_par, ref_ts, ref_tp = rsc_shift_register(bits.tolist())
    assert par.tolist() == ref_par
    ts, tp = rsc_terminate(state)
    assert ts.tolist() == ref_ts and tp.tolist() == ref_tp


@pytest.mark.parametrize("k", [40, 48, 1008, 6144])
def test_output_length(k, rng):
    eb = turbo_encode(rng.integers(0, 2, k, dtype=np.uint8))
    assert len(eb) == 3 * k + 12 == eb.serialize().size
    assert eb.tail.size == TAIL_LEN


def test_linearity(rng):
    k = 512
    a = rng.integers(0, 2, k, dtype=np.uint8)
    b = rng.integers(0, 2, k, dtype=np.uint8)
    ea, eb, eab = (turbo_encode(x).serialize() for x in (a, b, a ^ b))
    assert np.array_equal(ea ^ eb, eab)
    assert not turbo_encode(np.zeros(k, dtype=np.uint8)).serialize().any()


def test_serialize_roundtrip(rng):
    eb = turbo_encode(rng.integers(0, 2, 40, dtype=np.uint8))
    assert EncodedBlock.deserialize(eb.serialize()) == eb
    with pytest.raises(LengthMismatch):
        EncodedBlock.deserialize(np.zeros(131, dtype=np.uint8))


def test_encoder_rejects_bad_input():
    with pytest.raises(UnsupportedBlockSize):
        turbo_encode(np.zeros(41, dtype=np.uint8))
    with pytest.raises(ValueError):
        turbo_encode(np.full(40, 2, dtype=np.uint8))


def test_accepts_code_block_objects(rng):
    from cranbench.codec import TransportBlock, segment_tb

    cb = segment_tb(TransportBlock(0, 0, rng.integers(0, 2, 100, dtype=np.uint8)))[0]
    assert np.array_equal(turbo_encode(cb).systematic, cb.bits)


# -- SISO ---------------------------------------------------------------------


@pytest.mark.parametrize("k", [4, 7, 9])
def test_siso_matches_bruteforce_maxlog(k, rng, backend):
    for _ in range(10):
        args = [rng.normal(0, 2, k), rng.normal(0, 2, k), rng.normal(0, 1, k),
                rng.normal(0, 2, 3), rng.normal(0, 2, 3)]
        got = siso_extrinsic(*args, backend=backend)
        assert got == pytest.approx(maxlog_extrinsic_bruteforce(*args), abs=1e-9)


# -- decoder ------------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(SUPPORTED_SIZES), st.integers(0, 2**32 - 1))
def test_noiseless_roundtrip(k, seed):
    bits = crc_block(np.random.default_rng(seed), k)
    res = turbo_decode(LlrBlock.from_bits(turbo_encode(bits), 4.0))
    assert res.success and res.iterations_used == 1
    assert np.array_equal(res.bits, bits)


def test_moderate_noise_decodes(rng, backend):
    k = 1024
    for _ in range(5):
        bits = crc_block(rng, k)
        res = turbo_decode(noisy(turbo_encode(bits), 1.0, rng), backend=backend)
        assert res.success and np.array_equal(res.bits, bits)


def test_backends_bit_identical(rng):
    from cranbench.codec._backend import available_backends

    if len(available_backends()) < 2:
        pytest.skip("compiled kernels not built")
    for k in (40, 1008):
        llr = noisy(turbo_encode(crc_block(rng, k)), -1.0, rng)
        a = turbo_decode(llr, 4, False, backend="python")
        b = turbo_decode(llr, 4, False, backend="cython")
        assert np.array_equal(a.llr, b.llr)
        assert a.iterations_used == b.iterations_used == 4
        assert a.success == b.success


def test_all_zero_llrs_fail(backend):
    res = turbo_decode(LlrBlock.zeros(40), max_iterations=3, backend=backend)
    assert not res.success
    assert res.iterations_used == 3


def test_hopeless_snr_exhausts_iterations(rng):
    res = turbo_decode(noisy(turbo_encode(crc_block(rng, 512)), -8.0, rng), max_iterations=4)
    assert not res.success and res.iterations_used == 4


def test_no_early_stop_runs_all_iterations(rng):
    llr = LlrBlock.from_bits(turbo_encode(crc_block(rng, 40)))
    assert turbo_decode(llr, 5, early_stop=False).iterations_used == 5


def test_decoder_input_validation(rng):
    llr = LlrBlock.from_bits(turbo_encode(crc_block(rng, 40)))
    with pytest.raises(LengthMismatch):
        turbo_decode(LlrBlock(llr.sys_llr, llr.par1_llr[:-1], llr.par2_llr, llr.tail_llr))
    with pytest.raises(LengthMismatch):
        turbo_decode(LlrBlock(llr.sys_llr, llr.par1_llr, llr.par2_llr, llr.tail_llr[:6]))
    bad = llr.sys_llr.copy()
    bad[3] = np.nan
    with pytest.raises(ValueError):
        turbo_decode(LlrBlock(bad, llr.par1_llr, llr.par2_llr, llr.tail_llr))
    with pytest.raises(ValueError):
        turbo_decode(llr, max_iterations=0)


@pytest.mark.slow
def test_error_rate_falls_with_snr(rng):
    k, trials = 512, 40
    failures = []
    for snr in (-3.0, -1.5, 0.0):
        fails = 0
        for _ in range(trials):
            bits = crc_block(rng, k)
            fails += not turbo_decode(noisy(turbo_encode(bits), snr, rng)).success
        failures.append(fails)
    assert failures[0] >= failures[1] >= failures[2]
    assert failures[0] > failures[2]


# -- puncturing ---------------------------------------------------------------


def test_half_rate_puncturing_roundtrip(rng):
    k = 1024
    bits = crc_block(rng, k)
    eb = turbo_encode(bits)
    tx = puncture(eb, HALF_RATE_PATTERN)
    assert tx.size == 2 * k + 12
    llr = depuncture(3.0 * (1.0 - 2.0 * tx), k, HALF_RATE_PATTERN)
    assert llr.par1_llr[1] == 0 and llr.par2_llr[0] == 0
    res = turbo_decode(llr)
    assert res.success and np.array_equal(res.bits, bits)


def test_identity_puncturing(rng):
    eb = turbo_encode(crc_block(rng, 40))
    assert np.array_equal(puncture(eb), eb.serialize())


@pytest.mark.parametrize("pattern", [((0, 1), (1, 1), (1, 1)), ((1,), (1,)), ((1,), (2,), (1,))])
def test_bad_puncturing_patterns(pattern, rng):
    eb = turbo_encode(crc_block(rng, 40))
    with pytest.raises(ValueError):
        puncture(eb, pattern)


def test_depuncture_length_check():
    with pytest.raises(LengthMismatch):
        depuncture(np.zeros(10), 40, HALF_RATE_PATTERN)


def test_rsc_impulse_response_hand_trace(backend):
    # register (d1, d2, d3) from zero, input 1 then zeros:
    # a = u ^ d2 ^ d3, z = a ^ d1 ^ d3, shift (a, d1, d2)
    par, state = rsc_encode(np.array([1, 0, 0, 0, 0, 0, 0, 0], dtype=np.uint8), backend=backend)
    assert par.tolist() == [1, 1, 1, 1, 0, 0, 1, 0]
    par0, state0 = rsc_encode(np.zeros(8, dtype=np.uint8), backend=backend)
    assert not par0.any() and state0 == 0
    assert rsc_terminate(0)[0].tolist() == [0, 0, 0] and rsc_terminate(0)[1].tolist() == [0, 0, 0]


def test_all_zero_block_k40():
    out = turbo_encode(np.zeros(40, dtype=np.uint8)).serialize()
    assert out.size == 132 and not out.any()


@pytest.mark.slow
def test_high_snr_no_block_losses(rng):
    # 17 blocks of 6120 information bits > 1e5 bits; 3 dB is far past the waterfall
    errors = fails = 0
    for _ in range(17):
        bits = crc_block(rng, 6144)
        res = turbo_decode(noisy(turbo_encode(bits), 3.0, rng))
        fails += not res.success
        errors += int(np.count_nonzero(res.bits != bits))
    assert fails == 0 and errors / (17 * 6120) < 1e-4
