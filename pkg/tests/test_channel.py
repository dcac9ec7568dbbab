import math

import numpy as np
import pytest

from leoshare.antenna import UraGeometry, steering_vector
from leoshare.channel import (MultipathConfig, SatChannelTable, TerrestrialChannel, TerrestrialGeometry,
                              build_sat_table, normalize_terrestrial, normalize_vector_taps, synth_satellite,
                              synth_terrestrial, table_from_text, table_lookup, table_to_text)
from leoshare.geometry import BsOrientation, Frame, SteeringDirection

GEO = TerrestrialGeometry(SteeringDirection(-10.0, 20.0, Frame.LOCAL), SteeringDirection(5.0, -30.0, Frame.LOCAL),
                          UraGeometry(8, 8), UraGeometry(1, 2))


def _ch(taps):
    taps = np.asarray(taps, dtype=complex)
    return TerrestrialChannel(taps, np.zeros(taps.shape[0]))


def test_normalize_identity_like():
    out = normalize_terrestrial(_ch([np.eye(2) * 3.0]))
    assert np.linalg.norm(out.taps[0]) ** 2 == pytest.approx(4.0, rel=1e-12)


def test_normalize_random_and_idempotent():
    rng = np.random.default_rng(0)
    h = rng.standard_normal((3, 2, 4)) + 1j * rng.standard_normal((3, 2, 4))
    once = normalize_terrestrial(_ch(h))
    for tap in once.taps:
        assert np.linalg.norm(tap) ** 2 == pytest.approx(8.0, rel=1e-9)
    twice = normalize_terrestrial(once)
    assert np.allclose(twice.taps, once.taps, rtol=0, atol=1e-12)


def test_normalize_zero_channel():
    with pytest.raises(ValueError):
        normalize_terrestrial(_ch(np.zeros((1, 2, 2))))


def test_cluster_powers_sum_to_one():
    p = MultipathConfig(n_clusters=5, k_factor_db=7.0).cluster_powers()
    assert p.sum() == pytest.approx(1.0)
    assert p[0] / p[1:].sum() == pytest.approx(10 ** 0.7)


def test_config_validation():
    with pytest.raises(ValueError):
        MultipathConfig(n_clusters=0)


def test_single_cluster_is_rank_one():
    cfg = MultipathConfig(n_clusters=1, angular_spread_deg=0.0)
    h = synth_terrestrial(cfg, GEO, seed=4).taps
    for tap in h:
        s = np.linalg.svd(tap, compute_uv=False)
        assert s[1] < 1e-9 * s[0]


def test_terrestrial_determinism():
    cfg = MultipathConfig()
    a = synth_terrestrial(cfg, GEO, seed=11).taps
    b = synth_terrestrial(cfg, GEO, seed=11).taps
    assert np.array_equal(a, b)
    assert not np.array_equal(a, synth_terrestrial(cfg, GEO, seed=12).taps)


def test_four_clusters_give_rank_two():
    cfg = MultipathConfig(n_clusters=4, angular_spread_deg=10.0)
    full_rank = 0
    for seed in range(100):
        s = np.linalg.svd(synth_terrestrial(cfg, GEO, seed).taps[0], compute_uv=False)
        full_rank += s[1] > 1e-6 * s[0]
    assert full_rank == 100


def test_pure_los_satellite_is_steering_vector():
    d = SteeringDirection(40.0, -25.0, Frame.LOCAL)
    ch = synth_satellite(d, MultipathConfig(k_factor_db=math.inf), seed=0)
    e = steering_vector(d, UraGeometry(8, 8))
    for tap in ch.taps:
        assert abs(np.vdot(e, tap)) / (np.linalg.norm(e) * np.linalg.norm(tap)) == pytest.approx(1.0, abs=1e-9)
    assert ch.los


def test_satellite_norm():
    d = SteeringDirection(40.0, 25.0, Frame.LOCAL)
    for seed in range(10):
        ch = synth_satellite(d, MultipathConfig(k_factor_db=3.0), seed)
        assert np.allclose(np.linalg.norm(ch.taps, axis=1) ** 2, 64.0)


def test_rician_los_share():
    # K = 10 dB: mean |e^H h|^2 / N_t^2 over seeds, computed directly from the mixture
    d = SteeringDirection(30.0, 20.0, Frame.LOCAL)
    e = steering_vector(d, UraGeometry(8, 8))
    vals = []
    for seed in range(100):
        ch = synth_satellite(d, MultipathConfig(k_factor_db=10.0), seed)
        vals.append(np.mean(np.abs(ch.taps @ e.conj()) ** 2) / 64 ** 2)
    assert np.mean(vals) >= 0.8


def test_repointed_moves_los_only():
    d = SteeringDirection(30.0, 20.0, Frame.LOCAL)
    ch = synth_satellite(d, MultipathConfig(k_factor_db=30.0), seed=5)
    new = SteeringDirection(33.0, 24.0, Frame.LOCAL)
    moved = ch.repointed(new, UraGeometry(8, 8))
    e_new = steering_vector(new, UraGeometry(8, 8))
    assert np.mean(np.abs(moved.taps @ e_new.conj()) ** 2) / 64 ** 2 > 0.95
    assert np.allclose(np.linalg.norm(moved.taps, axis=1) ** 2, 64.0)


def test_normalize_vector_taps():
    v = normalize_vector_taps(np.array([[1.0, 1.0, 0.0, 0.0]]))
    assert np.linalg.norm(v) ** 2 == pytest.approx(4.0)


@pytest.fixture(scope="module")
def table():
    return build_sat_table(BsOrientation(), MultipathConfig(k_factor_db=20.0), seed=3)


def test_table_covers_grid(table):
    assert len(table.entries) == 7 * 6
    assert table.elevation_centers[0] - 5 == 25.0


def test_lookup_exact_center(table):
    ch = table_lookup(table, SteeringDirection(60.0, 120.0))
    assert ch is table.entries[(60.0, 120.0)]


def test_lookup_nearest_and_ties(table):
    assert table.bin_for(SteeringDirection(34.0, 0.0)) == (30.0, 0.0)
    assert table.bin_for(SteeringDirection(35.0, 0.0)) == (30.0, 0.0)
    assert table.bin_for(SteeringDirection(36.0, 30.0)) == (40.0, 0.0)
    assert table.bin_for(SteeringDirection(90.0, 179.0)) == (90.0, -180.0)


def test_lookup_empty_table():
    with pytest.raises(LookupError):
        table_lookup(SatChannelTable((), ()), SteeringDirection(40.0, 0.0))


def test_table_text_round_trip(table):
    back = table_from_text(table_to_text(table))
    assert set(back.entries) == set(table.entries)
    for k, ch in table.entries.items():
        assert np.array_equal(back.entries[k].taps, ch.taps)
        assert np.array_equal(back.entries[k].scatter, ch.scatter)
    assert table_to_text(back) == table_to_text(table)


def test_table_text_rejects_garbage():
    with pytest.raises(ValueError):
        table_from_text("not a table\n")
