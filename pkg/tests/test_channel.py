import json

import numpy as np
import pytest

from fbmc_preamble.channel import (FLAT, SUI3, ChannelProfile, ChannelRealization, apply, awgn, cfr,
                                   draw_realization, get_profile, propagate, quantize_delays)
from fbmc_preamble.filterbank import analyze, synthesize

FS = 64 * 10940.0


def test_sui3_quantization():
    assert list(quantize_delays(SUI3, FS)) == [0, 0, 1]
    assert list(quantize_delays(SUI3, 256 * 10940.0)) == [0, 1, 3]


def test_profile_normalized():
    assert SUI3.linear_powers.sum() == pytest.approx(1.0)


def test_profile_validation():
    with pytest.raises(ValueError):
        ChannelProfile("x", (1e-6,), (0,), (0,))
    with pytest.raises(ValueError):
        ChannelProfile("x", (0, 2e-6, 1e-6), (0, 0, 0), (0, 0, 0))
    with pytest.raises(ValueError):
        ChannelProfile("x", (0,), (0, 1), (0,))


def test_json_round_trip(tmp_path):
    p = tmp_path / "prof.json"
    p.write_text(json.dumps(SUI3.to_dict()))
    q = get_profile(str(p))
    assert q.name == "SUI-3"
    np.testing.assert_allclose(q.tap_delays, SUI3.tap_delays)
    assert get_profile("SUI-3") is SUI3


def test_single_tap_is_flat():
    r = draw_realization(FLAT, 2, 2, 64, FS, 7)
    H = r.cfr
    np.testing.assert_allclose(H, np.broadcast_to(H[0], H.shape), atol=1e-15)


def test_deterministic():
    a = draw_realization(SUI3, 2, 2, 64, FS, 99)
    b = draw_realization(SUI3, 2, 2, 64, FS, 99)
    np.testing.assert_array_equal(a.cir, b.cir)


def test_mean_link_power():
    rng = np.random.default_rng(3)
    p = np.array([np.sum(np.abs(draw_realization(SUI3, 2, 2, 256, 256 * 10940.0, rng).cir) ** 2, axis=2)
                  for _ in range(10_000)])
    assert p.mean() == pytest.approx(1.0, rel=0.02)


def test_delay_spread_guard():
    long = ChannelProfile("long", (0, 5e-3), (0, 0), (0, 0))
    with pytest.raises(ValueError):
        draw_realization(long, 1, 1, 64, FS, 0)
    with pytest.warns(UserWarning):
        draw_realization(long, 1, 1, 64, FS, 0, strict=False)


def test_cfr_examples():
    one = ChannelRealization(np.ones((1, 1, 1), complex), 16)
    np.testing.assert_allclose(cfr(one), 1)
    h = np.zeros((1, 1, 9), complex)
    h[0, 0, 0] = h[0, 0, 8] = 1
    H = np.abs(cfr(ChannelRealization(h, 16)))[:, 0, 0]
    np.testing.assert_allclose(H[0::2], 2, atol=1e-12)
    np.testing.assert_allclose(H[1::2], 0, atol=1e-12)


def test_cfr_matches_direct_dft(rng):
    r = draw_realization(SUI3, 2, 3, 256, 256 * 10940.0, rng)
    h = r.cir
    m = np.arange(256)[:, None]
    l = np.arange(h.shape[2])[None, :]
    F = np.exp(-2j * np.pi * m * l / 256)
    ref = np.einsum("ml,rtl->mrt", F, h)
    np.testing.assert_allclose(cfr(r), ref, atol=1e-12)


def test_noiseless_sum():
    r = ChannelRealization(np.ones((1, 2, 1), complex), 8)
    tx = np.arange(20).reshape(2, 10) + 0j
    rx, nv = apply(tx, r, np.inf, 0)
    assert nv == 0
    np.testing.assert_allclose(rx[0], tx.sum(axis=0))


def test_noise_variance():
    r = ChannelRealization(np.ones((1, 1, 1), complex), 8)
    rx, nv = apply(np.zeros((1, 100_000)), r, 10.0, 5, signal_power=2.0)
    assert nv == pytest.approx(0.2)
    assert np.mean(np.abs(rx) ** 2) == pytest.approx(0.2, rel=0.03)


def test_measured_power_snr(rng):
    r = ChannelRealization(np.ones((1, 1, 1), complex), 8)
    tx = rng.standard_normal((1, 50_000)) * 3
    _, nv = apply(tx, r, 20.0, 1)
    assert nv == pytest.approx(9.0 / 100, rel=0.03)


def test_identity_channel_through_filter_banks(filt64, rng):
    a = rng.standard_normal((64, 20))
    r = ChannelRealization(np.ones((1, 1, 1), complex), 64)
    rx, _ = apply(synthesize(a, filt64)[None], r, np.inf, 0)
    y = analyze(rx[0], filt64, 20)
    np.testing.assert_allclose(y, analyze(synthesize(a, filt64), filt64, 20))


def test_energy_conservation(filt64):
    rng = np.random.default_rng(0)
    ratios = []
    for _ in range(400):
        tx = rng.standard_normal((1, 2000)) + 0j
        r = draw_realization(SUI3, 1, 1, 64, FS, rng)
        ratios.append(np.sum(np.abs(propagate(tx, r)) ** 2) / np.sum(np.abs(tx) ** 2))
    assert np.mean(ratios) == pytest.approx(1.0, abs=0.1)


def test_awgn_shape():
    n = awgn((3, 4), 2.0, np.random.default_rng(0))
    assert n.shape == (3, 4) and np.iscomplexobj(n)
