import numpy as np
import pytest

from aoi_relay.model import (AoiState, CaptureReport, ConfigError, ConnectivityMatrix, NetworkConfig, Packet,
                             Transmission, TransmissionPlan, advance_ages, apply_deliveries, resolve_at_ap)
from aoi_relay.rng import Entity, block_start, replication_seed, rng_stream


# -- NetworkConfig --------------------------------------------------------------

def test_config_defaults():
    c = NetworkConfig()
    assert (c.n_eds, c.activation_prob, c.n_channels, c.n_relays) == (30, 0.1, 2, 5)
    assert (c.erasure_p1, c.erasure_p2, c.buffer_size) == (0.1, 0.1, 1)
    assert c.horizon_slots == 1_000_000 and c.warmup_slots == 1_000
    assert c.rts_resolution is None and c.rts_max_delay == 0.1


@pytest.mark.parametrize("kw,field", [
    (dict(activation_prob=1.5), "activation_prob"),
    (dict(activation_prob=-0.1), "activation_prob"),
    (dict(erasure_p1=2.0), "erasure_p1"),
    (dict(erasure_p2=-1.0), "erasure_p2"),
    (dict(n_eds=0), "n_eds"),
    (dict(n_channels=0), "n_channels"),
    (dict(n_relays=0), "n_relays"),
    (dict(warmup_slots=10, horizon_slots=10), "warmup_slots"),
    (dict(buffer_size=-1), "buffer_size"),
    (dict(rts_resolution=0), "rts_resolution"),
    (dict(erasure_p1=(0.1, 0.2)), "erasure_p1"),
    (dict(hetero_eps1=(0.5, 0.1)), "hetero_eps1"),
])
def test_config_rejects_and_names_field(kw, field):
    with pytest.raises(ConfigError) as e:
        NetworkConfig(**kw)
    assert e.value.field == field
    assert field in str(e.value)


def test_per_ed_erasure_vector():
    c = NetworkConfig(n_eds=3, erasure_p1=[0.1, 0.2, 0.3])
    assert c.heterogeneous
    np.testing.assert_allclose(c.eps1_vector(), [0.1, 0.2, 0.3])


def test_hetero_draw_is_fixed_per_network_and_in_range():
    c = NetworkConfig(hetero_eps1=(0.05, 0.5), seed=7)
    v1, v2 = c.eps1_vector(), c.eps1_vector()
    assert np.array_equal(v1, v2)
    assert v1.min() >= 0.05 and v1.max() <= 0.5
    assert not np.array_equal(v1, c.replace(seed=8).eps1_vector())


# -- ages ---------------------------------------------------------------------------

def test_advance_ages_examples():
    assert advance_ages(AoiState([1, 1])).ages.tolist() == [2, 2]
    s = advance_ages(AoiState([3, 7]))
    assert s.ages.tolist() == [4, 8] and s.max_age == 8
    s = AoiState([1])
    for _ in range(5):
        s = advance_ages(s)
    assert s.ages.tolist() == [6]


def test_fresh_delivery_gives_age_one_next_slot():
    s = apply_deliveries(AoiState([5, 9]), [(Packet(1, 20, 0, 0), 0)], slot=20)
    assert s.ages.tolist() == [6, 1]


def test_buffered_delivery_three_slots_late():
    s = apply_deliveries(AoiState([10]), [(Packet(0, 17, 0, 0), 3)], slot=20)
    assert s.ages.tolist() == [4]


def test_empty_delivery_is_advance():
    assert apply_deliveries(AoiState([2, 3]), [], slot=4).ages.tolist() == [3, 4]


def test_freshest_delivery_wins_and_stale_never_raises_age():
    s = apply_deliveries(AoiState([8]), [(Packet(0, 18, 0, 0), 2), (Packet(0, 20, 1, 1), 0)], slot=20)
    assert s.ages.tolist() == [1]
    # a packet older than what the AP holds leaves the age on its sawtooth
    s = apply_deliveries(AoiState([2]), [(Packet(0, 10, 0, 0), 10)], slot=20)
    assert s.ages.tolist() == [3]


def test_delivery_from_the_future_rejected():
    with pytest.raises(ValueError):
        apply_deliveries(AoiState([1]), [(Packet(0, 21, 0, 0), -1)], slot=20)
    with pytest.raises(ValueError):
        apply_deliveries(AoiState([1]), [(Packet(0, 15, 0, 0), 4)], slot=20)


# -- captures, plans, AP ------------------------------------------------------------

def test_capture_report_one_per_relay_channel():
    CaptureReport([Packet(0, 1, 0, 0), Packet(1, 1, 1, 0)])
    with pytest.raises(ValueError):
        CaptureReport([Packet(0, 1, 0, 0), Packet(1, 1, 0, 0)])
    r = CaptureReport([Packet(0, 1, 0, 0), Packet(0, 1, 0, 1), Packet(1, 1, 1, 0)])
    assert r.identities() == {(0, 1), (1, 1)}
    assert {k: len(v) for k, v in r.by_relay().items()} == {0: 2, 1: 1}


def test_plan_check_catches_double_relay_and_replica():
    a, b = Packet(0, 5, 0, 0), Packet(1, 5, 1, 0)
    with pytest.raises(AssertionError):
        TransmissionPlan([Transmission(0, 0, a), Transmission(1, 0, b)]).check()
    rep = Packet(0, 5, 0, 1)
    with pytest.raises(AssertionError):
        TransmissionPlan([Transmission(0, 0, a), Transmission(1, 1, rep)]).check()
    TransmissionPlan([Transmission(0, 0, a), Transmission(1, 1, Packet(2, 5, 1, 1))]).check()


def test_resolve_at_ap_erasure_and_collision():
    h = [[True, False], [True, True]]  # h[f][k]
    a, b, c = Packet(0, 3, 0, 0), Packet(1, 3, 0, 1), Packet(2, 2, 1, 1)
    out = resolve_at_ap(TransmissionPlan([Transmission(0, 0, a), Transmission(0, 1, b)]), h, 3)
    assert [p for p, _ in out.delivered] == [a] and out.erased_tx == 1 and out.ap_collisions == 0
    out = resolve_at_ap(TransmissionPlan([Transmission(1, 0, a), Transmission(1, 1, c)]), h, 3)
    assert out.delivered == [] and out.ap_collisions == 1
    out = resolve_at_ap(TransmissionPlan([Transmission(1, 1, c)]), ConnectivityMatrix(np.array(h)), 3)
    assert out.delivered == [(c, 1)]


def test_lossless_plan_ignores_connectivity_and_dedupes():
    a, rep, b, c = Packet(0, 3, 0, 0), Packet(0, 3, 0, 1), Packet(1, 3, 1, 0), Packet(2, 3, 1, 2)
    plan = TransmissionPlan([Transmission(0, 0, a), Transmission(0, 1, rep), Transmission(1, 0, b),
                             Transmission(1, 2, c)], lossless=True)
    out = resolve_at_ap(plan, [[False] * 3, [False] * 3], 3)
    assert sorted(p.ident for p, _ in out.delivered) == [(0, 3), (1, 3), (2, 3)]


# -- random streams --------------------------------------------------------------------

def test_stream_determinism_and_independence():
    x = rng_stream(1, Entity.ED, 3, 1024).random(8)
    assert np.array_equal(x, rng_stream(1, "ed", 3, 1024).random(8))
    assert not np.array_equal(x, rng_stream(2, Entity.ED, 3, 1024).random(8))
    assert not np.array_equal(x, rng_stream(1, Entity.RELAY, 3, 1024).random(8))
    assert not np.array_equal(x, rng_stream(1, Entity.ED, 4, 1024).random(8))
    assert not np.array_equal(x, rng_stream(1, Entity.ED, 3, 0).random(8))
    with pytest.raises(ValueError):
        rng_stream(1, Entity.ED, -1, 0)


def test_block_start_and_replication_seed():
    assert block_start(0) == 0 and block_start(1023) == 0 and block_start(1025) == 1024
    assert replication_seed(42, 0) == 42
    seeds = {replication_seed(42, r) for r in range(50)}
    assert len(seeds) == 50
    assert replication_seed(42, 3) == replication_seed(42, 3)
