import numpy as np
import pytest
import scipy.stats

from vibesense import netsim, wireproto as wp
from vibesense.netsim import ChannelConfig, transmit


def make_packets(n, size=64, seed=0):
    rng = np.random.default_rng(seed)
    return [rng.bytes(size) for _ in range(n)]


def test_identity_channel_delivers_everything_in_order():
    packets = make_packets(100)
    events = transmit(packets, ChannelConfig())
    assert [e.original_index for e in events] == list(range(100))
    assert all(e.delivered_bytes == packets[e.original_index] for e in events)


def test_total_loss_delivers_nothing():
    events = transmit(make_packets(50), ChannelConfig(loss_prob=1.0))
    assert events == []


def test_determinism():
    packets = make_packets(500)
    cfg = ChannelConfig(
        loss_prob=0.1,
        corrupt_prob=0.2,
        duplicate_prob=0.1,
        reorder_prob=0.1,
        delay_mean_us=500,
        delay_jitter_us=200,
        rng_seed=42,
    )
    a = transmit(packets, cfg)
    b = transmit(packets, cfg)
    assert [(e.original_index, e.delivered_bytes, e.deliver_time_us) for e in a] == [
        (e.original_index, e.delivered_bytes, e.deliver_time_us) for e in b
    ]


def test_loss_rate_within_binomial_bounds():
    n, p_loss = 10_000, 0.1
    events = transmit(make_packets(n, size=8), ChannelConfig(loss_prob=p_loss, rng_seed=5))
    # central 99.9% interval of Binomial(n, 1 - p_loss)
    lo = scipy.stats.binom.ppf(0.0005, n, 1 - p_loss)
    hi = scipy.stats.binom.ppf(0.9995, n, 1 - p_loss)
    assert lo <= len(events) <= hi


def test_duplication_doubles_when_certain():
    packets = make_packets(20)
    events = transmit(packets, ChannelConfig(duplicate_prob=1.0))
    assert len(events) == 40
    for i in range(20):
        copies = [e for e in events if e.original_index == i]
        assert len(copies) == 2
        assert all(c.delivered_bytes == packets[i] for c in copies)


def test_reorder_preserves_payload_multiset():
    packets = make_packets(200)
    events = transmit(packets, ChannelConfig(reorder_prob=0.5, rng_seed=3))
    assert sorted(e.original_index for e in events) == list(range(200))
    order = [e.original_index for e in events]
    assert order != sorted(order)
    times = [e.deliver_time_us for e in events]
    assert times == sorted(times)  # reordering swaps payloads, not time slots


def test_corruption_changes_exactly_the_configured_bits():
    packets = make_packets(300, size=32)
    events = transmit(packets, ChannelConfig(corrupt_prob=0.5, bits_per_corruption=3, rng_seed=9))
    changed = 0
    for e in events:
        orig = packets[e.original_index]
        if e.delivered_bytes != orig:
            changed += 1
            diff = int.from_bytes(orig, "little") ^ int.from_bytes(e.delivered_bytes, "little")
            assert bin(diff).count("1") == 3
    assert 0 < changed < len(events)


def test_delay_shifts_delivery_times():
    events = transmit(make_packets(10), ChannelConfig(delay_mean_us=5000))
    for i, e in enumerate(events):
        assert e.deliver_time_us == i * 1000 + 5000


def test_invalid_config_rejected():
    with pytest.raises(ValueError):
        ChannelConfig(loss_prob=1.5).validate()
    with pytest.raises(ValueError):
        ChannelConfig(bits_per_corruption=0).validate()
    with pytest.raises(ValueError):
        ChannelConfig(delay_mean_us=-1).validate()


def test_single_bit_corruption_never_defeats_framing():
    # 1 bit per packet on >=2-block framing: every delivery decodes as
    # Intact, Recovered, or HeaderInvalid -- no Unrecoverable outcomes
    rng = np.random.default_rng(11)
    header = wp.PacketHeader(1, 0, 0, 0, n_blocks=4, block_len=24)
    packets = []
    for seq in range(400):
        h = wp.PacketHeader(1, seq, seq * header.samples_per_packet, seq * 1000,
                            n_blocks=4, block_len=24)
        samples = rng.integers(wp.SAMPLE_MIN, wp.SAMPLE_MAX + 1, h.samples_per_packet)
        packets.append(wp.encode_packet(h, samples))
    events = transmit(packets, ChannelConfig(corrupt_prob=0.6, bits_per_corruption=1, rng_seed=13))
    counts = {status: 0 for status in wp.DecodeStatus}
    for e in events:
        counts[wp.decode_packet(e.delivered_bytes).status] += 1
    assert counts[wp.DecodeStatus.UNRECOVERABLE] == 0
    assert counts[wp.DecodeStatus.RECOVERED] > 0
    total = sum(counts.values())
    assert total == len(events)
