import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vibesense import wireproto as wp


def reference_crc(data: bytes, poly: int, width: int, init: int) -> int:
    """Bit-at-a-time CRC, independent of the table-driven implementation."""
    crc = init
    top = 1 << (width - 1)
    mask = (1 << width) - 1
    for byte in data:
        crc ^= byte << (width - 8)
        for _ in range(8):
            crc = ((crc << 1) ^ poly) & mask if crc & top else (crc << 1) & mask
    return crc


def make_packet(n_blocks=4, block_len=48, seed=0, device_id=3, seq=9):
    rng = np.random.default_rng(seed)
    header = wp.PacketHeader(
        device_id=device_id,
        seq=seq,
        first_sample_index=1000,
        send_time_us=555_000,
        n_blocks=n_blocks,
        block_len=block_len,
    )
    samples = rng.integers(wp.SAMPLE_MIN, wp.SAMPLE_MAX + 1, header.samples_per_packet)
    return header, samples, wp.encode_packet(header, samples)


class TestCrc:
    def test_published_check_values(self):
        assert wp.crc8(b"123456789") == 0xF4
        assert wp.crc16(b"123456789") == 0x29B1

    def test_empty_input_is_the_init_constant(self):
        assert wp.crc8(b"") == 0x00
        assert wp.crc16(b"") == 0xFFFF

    def test_matches_independent_bitwise_reference(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            data = rng.bytes(int(rng.integers(0, 64)))
            assert wp.crc8(data) == reference_crc(data, 0x07, 8, 0x00)
            assert wp.crc16(data) == reference_crc(data, 0x1021, 16, 0xFFFF)

    def test_single_bit_difference_changes_checksum(self):
        rng = np.random.default_rng(2)
        for _ in range(10_000):
            data = bytearray(rng.bytes(16))
            original8, original16 = wp.crc8(bytes(data)), wp.crc16(bytes(data))
            pos = int(rng.integers(0, 128))
            data[pos // 8] ^= 1 << (pos % 8)
            assert wp.crc8(bytes(data)) != original8
            assert wp.crc16(bytes(data)) != original16


class TestEncode:
    def test_zero_samples_give_zero_parity(self):
        header = wp.PacketHeader(1, 0, 0, 0, n_blocks=2, block_len=12)
        pkt = wp.encode_packet(header, [0] * header.samples_per_packet)
        parity = pkt[-13:-1]
        assert parity == bytes(12)

    def test_parity_is_bytewise_xor(self):
        # blocks 0x01 / 0x02 / 0x04 xor to 0x07
        header = wp.PacketHeader(1, 0, 0, 0, n_blocks=3, block_len=3)
        pkt = wp.encode_packet(header, [0x000001, 0x000002, 0x000004])
        parity = pkt[-4:-1]
        assert parity == bytes([0x07, 0x00, 0x00])

    def test_oversize_framing_rejected(self):
        with pytest.raises(wp.WireError):
            wp.PacketHeader(1, 0, 0, 0, n_blocks=16, block_len=96).validate()

    def test_sample_out_of_range(self):
        header = wp.PacketHeader(1, 0, 0, 0, n_blocks=1, block_len=3)
        with pytest.raises(wp.WireError):
            wp.encode_packet(header, [1 << 23])

    def test_payload_size_mismatch(self):
        header = wp.PacketHeader(1, 0, 0, 0, n_blocks=2, block_len=12)
        with pytest.raises(wp.WireError):
            wp.encode_packet(header, [0] * 3)

    def test_size_bound_holds_for_max_framing(self):
        header = wp.PacketHeader(1, 0, 0, 0, n_blocks=16, block_len=81)
        pkt = wp.encode_packet(header, [0] * header.samples_per_packet)
        assert len(pkt) <= wp.MAX_DATAGRAM


class TestRoundTrip:
    def test_seeded_random_payloads(self):
        rng = np.random.default_rng(3)
        for i in range(10_000):
            n_blocks = int(rng.integers(1, 7))
            block_len = int(rng.integers(1, 9)) * 3
            header = wp.PacketHeader(
                device_id=int(rng.integers(0, 1 << 16)),
                seq=int(rng.integers(0, 1 << 32)),
                first_sample_index=int(rng.integers(0, 1 << 48)),
                send_time_us=int(rng.integers(0, 1 << 48)),
                n_blocks=n_blocks,
                block_len=block_len,
            )
            samples = rng.integers(wp.SAMPLE_MIN, wp.SAMPLE_MAX + 1, header.samples_per_packet)
            out = wp.decode_packet(wp.encode_packet(header, samples))
            assert out.status is wp.DecodeStatus.INTACT
            assert out.header == header
            assert np.array_equal(out.samples, samples)

    @settings(max_examples=50, deadline=None)
    @given(
        n_blocks=st.integers(1, 16),
        words=st.integers(1, 8),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_round_trip_property(self, n_blocks, words, seed):
        header, samples, pkt = make_packet(n_blocks, words * 3, seed)
        assert len(pkt) <= wp.MAX_DATAGRAM
        out = wp.decode_packet(pkt)
        assert out.status is wp.DecodeStatus.INTACT
        assert np.array_equal(out.samples, samples)


class TestCorruption:
    def test_every_single_bit_flip_in_payload_recovers(self):
        header, samples, pkt = make_packet(n_blocks=2, block_len=12)
        data_len = header.n_blocks * header.block_len
        for bit in range(data_len * 8):
            buf = bytearray(pkt)
            buf[wp.HEADER_LEN + bit // 8] ^= 1 << (bit % 8)
            out = wp.decode_packet(bytes(buf))
            assert out.status is wp.DecodeStatus.RECOVERED
            assert out.recovered_block == (bit // 8) // header.block_len
            assert np.array_equal(out.samples, samples)

    def test_two_block_corruption_unrecoverable(self):
        header, _, pkt = make_packet()
        buf = bytearray(pkt)
        buf[wp.HEADER_LEN + 0] ^= 0x40
        buf[wp.HEADER_LEN + 3 * header.block_len + 1] ^= 0x01
        out = wp.decode_packet(bytes(buf))
        assert out.status is wp.DecodeStatus.UNRECOVERABLE
        assert out.failed_blocks == (0, 3)

    def test_data_plus_parity_corruption_unrecoverable(self):
        header, _, pkt = make_packet()
        buf = bytearray(pkt)
        buf[wp.HEADER_LEN + 5] ^= 0x01  # block 0
        buf[-2] ^= 0x01  # inside the parity block
        out = wp.decode_packet(bytes(buf))
        assert out.status is wp.DecodeStatus.UNRECOVERABLE
        assert out.failed_blocks == (0,)
        assert out.parity_failed

    def test_parity_only_corruption_still_intact(self):
        _, samples, pkt = make_packet()
        buf = bytearray(pkt)
        buf[-2] ^= 0xFF
        out = wp.decode_packet(bytes(buf))
        assert out.status is wp.DecodeStatus.INTACT
        assert np.array_equal(out.samples, samples)

    def test_header_bit_flip_is_header_invalid(self):
        _, _, pkt = make_packet()
        for byte in range(wp.HEADER_LEN):
            buf = bytearray(pkt)
            buf[byte] ^= 0x04
            assert wp.decode_packet(bytes(buf)).status is wp.DecodeStatus.HEADER_INVALID

    def test_block_crc_byte_flip_recovers_identical_payload(self):
        header, samples, pkt = make_packet()
        crc_area = wp.HEADER_LEN + header.n_blocks * header.block_len
        buf = bytearray(pkt)
        buf[crc_area + 1] ^= 0x20  # claim block 1 is bad; rebuild equals original
        out = wp.decode_packet(bytes(buf))
        assert out.status is wp.DecodeStatus.RECOVERED
        assert out.recovered_block == 1
        assert np.array_equal(out.samples, samples)

    def test_detection_soundness_rate(self):
        # chance a random forged block passes CRC-8 should be ~2^-8;
        # assert the measured rate stays below 2^-6
        rng = np.random.default_rng(7)
        block = rng.bytes(12)
        target = wp.crc8(block)
        trials = 100_000
        collisions = 0
        for _ in range(trials):
            forged = rng.bytes(12)
            if forged != block and wp.crc8(forged) == target:
                collisions += 1
        assert collisions / trials < 2**-6


class TestArbitraryBytes:
    def test_short_and_empty_inputs(self):
        assert wp.decode_packet(b"").status is wp.DecodeStatus.HEADER_INVALID
        assert wp.decode_packet(b"\x56\x53").status is wp.DecodeStatus.HEADER_INVALID

    def test_truncated_packet_is_header_invalid(self):
        _, _, pkt = make_packet()
        assert wp.decode_packet(pkt[:-5]).status is wp.DecodeStatus.HEADER_INVALID

    @settings(max_examples=200, deadline=None)
    @given(st.binary(min_size=0, max_size=200))
    def test_never_raises_on_junk(self, data):
        outcome = wp.decode_packet(data)
        assert isinstance(outcome, wp.DecodeOutcome)
