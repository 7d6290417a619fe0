import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nuscmodem import frames
from nuscmodem.frames import FramingError

from oracles import crc32_long_division


def ascii_bits(text):
    return frames.bytes_to_bits(text.encode("ascii"))


def test_crc_empty_payload_is_zero():
    assert frames.crc32_value([]) == 0
    assert not frames.crc32_compute([]).any()


def test_crc_check_value():
    bits = ascii_bits("123456789")
    assert frames.crc32_value(bits) == 0xCBF43926
    assert crc32_long_division(bits) == 0xCBF43926
    assert frames.bits_to_int(frames.crc32_compute(bits)) == 0xCBF43926


@given(st.lists(st.integers(0, 1), min_size=0, max_size=200))
@settings(max_examples=200, deadline=None)
def test_crc_matches_long_division(bits):
    # covers non-octet lengths, where zlib alone cannot be used
    assert frames.crc32_value(bits) == crc32_long_division(bits)


def test_crc_single_and_adjacent_double_flips_exhaustive_64(rng):
    payload = rng.integers(0, 2, 64, dtype=np.uint8)
    ref = crc32_long_division(payload)
    assert frames.crc32_value(payload) == ref
    seen = set()
    for i in range(64):
        p = payload.copy()
        p[i] ^= 1
        c = frames.crc32_value(p)
        assert c != ref and c == crc32_long_division(p)
        seen.add(c)
        if i < 63:
            p[i + 1] ^= 1
            assert frames.crc32_value(p) != ref
    assert len(seen) == 64


def test_crc_flips_randomized_5152(rng):
    payload = rng.integers(0, 2, 5152, dtype=np.uint8)
    ref = frames.crc32_value(payload)
    for i in rng.choice(5152, 200, replace=False):
        p = payload.copy()
        p[i] ^= 1
        assert frames.crc32_value(p) != ref
        if i < 5151:
            p[i + 1] ^= 1
            assert frames.crc32_value(p) != ref


def test_build_payload_default_packet():
    pkt = frames.build_payload(np.ones(5120, np.uint8), M=4)
    assert pkt.total_bits == 5152
    assert pkt.pad_bits == 0
    assert pkt.n_symbols == 2576
    assert len(pkt.symbol_indices()) == 2576
    assert frames.verify_payload(pkt)


def test_build_payload_two_bits_qpsk_no_pad():
    pkt = frames.build_payload([1, 0], M=4)
    assert pkt.total_bits == 34 and pkt.pad_bits == 0 and pkt.n_symbols == 17


def test_pad_rule_for_sixteen_qam():
    pkt = frames.build_payload([1, 0, 1], M=16)  # 35 bits -> pad 1
    assert pkt.pad_bits == 1
    assert len(pkt.bits) == 36 and pkt.bits[-1] == 0
    back = frames.Packet.from_bits(pkt.bits, 3, 4)
    assert frames.verify_payload(back)
    np.testing.assert_array_equal(back.payload, [1, 0, 1])


def test_build_payload_rejects_empty_and_oversize():
    with pytest.raises(FramingError):
        frames.build_payload([], M=4)
    with pytest.raises(FramingError, match="exceeds maximum"):
        frames.build_payload(np.zeros(65537, np.uint8), M=4)
    with pytest.raises(FramingError):
        frames.build_payload(np.zeros(17, np.uint8), M=4, max_data_bits=16)


def test_build_payload_accepts_config_object(config):
    pkt = frames.build_payload([1, 1, 0], config)
    assert pkt.bits_per_symbol == 2


def test_verify_detects_payload_and_crc_flips(rng):
    pkt = frames.build_payload(rng.integers(0, 2, 256), M=4)
    assert frames.verify_payload(pkt)
    for i in range(256):
        bad = pkt.payload.copy()
        bad[i] ^= 1
        assert not frames.verify_payload(frames.Packet(bad, pkt.crc))
    for i in range(32):
        bad = pkt.crc.copy()
        bad[i] ^= 1
        assert not frames.verify_payload(frames.Packet(pkt.payload, bad))


def test_build_then_verify_many_random(rng):
    for _ in range(1000):
        data = rng.integers(0, 2, rng.integers(1, 300), dtype=np.uint8)
        assert frames.verify_payload(frames.build_payload(data, M=4))


def test_group_bits_examples():
    np.testing.assert_array_equal(frames.group_bits([0, 0, 1, 1], 4), [0, 3])
    np.testing.assert_array_equal(frames.group_bits([1], 2), [1])
    np.testing.assert_array_equal(frames.group_bits([1, 0, 1, 1], 16), [11])
    assert len(frames.group_bits(np.zeros(5152, np.uint8), 4)) == 2576


def test_group_bits_rejects_bad_input():
    with pytest.raises(FramingError):
        frames.group_bits([0, 1, 1], 4)
    with pytest.raises(FramingError):
        frames.group_bits([0, 1, 1], 3)
    with pytest.raises(FramingError):
        frames.as_bits([0, 2])
    with pytest.raises(FramingError):
        frames.ungroup_bits([4], 4)


@given(st.sampled_from([2, 4, 16, 64, 256, 1024]), st.integers(0, 40), st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_group_roundtrip(M, n_groups, seed):
    k = M.bit_length() - 1
    bits = np.random.default_rng(seed).integers(0, 2, n_groups * k, dtype=np.uint8)
    idx = frames.group_bits(bits, M)
    assert len(idx) == n_groups and (idx < M).all()
    np.testing.assert_array_equal(frames.ungroup_bits(idx, M), bits)


def test_bytes_roundtrip_msb_first():
    bits = frames.bytes_to_bits(b"\x80\x01")
    assert bits[0] == 1 and bits[15] == 1 and bits.sum() == 2
    assert frames.bits_to_bytes(bits) == b"\x80\x01"
