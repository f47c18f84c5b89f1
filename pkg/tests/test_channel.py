import collections
import math

import numpy as np
import pytest

from djscc.channel import (NOISELESS, ChannelParams, ComplexSignal, DegenerateSignalError,
                           FramingError, awgn_transfer, draw_fading, frame, noiseless_transfer,
                           power_normalize, rayleigh_transfer, snr_to_noise_variance, transmit,
                           unframe)
from djscc.ndgrad import Tensor


def signal_from(z: np.ndarray) -> ComplexSignal:
    z = np.atleast_2d(z)
    return ComplexSignal(Tensor(np.stack([z.real, z.imag], axis=-1)))


def test_frame_symbol_count():
    assert frame(Tensor(np.zeros((1, 20, 16, 32)))).k == 5120


def test_frame_roundtrip(rng):
    t = Tensor(rng.standard_normal((3, 4, 2, 5)))
    sig = frame(t)
    np.testing.assert_array_equal(unframe(sig, (4, 2, 5)).data, t.data)


def test_frame_pairs_consecutive_entries():
    t = Tensor(np.arange(8, dtype=float).reshape(1, 2, 2, 2))
    np.testing.assert_array_equal(frame(t).to_complex(), [[0 + 1j, 2 + 3j, 4 + 5j, 6 + 7j]])


def test_frame_is_deterministic(rng):
    a = rng.standard_normal((2, 4, 2, 2))
    np.testing.assert_array_equal(frame(Tensor(a)).pairs.data, frame(Tensor(a.copy())).pairs.data)


def test_frame_rejects_odd_count():
    with pytest.raises(FramingError):
        frame(Tensor(np.zeros((1, 3, 1, 1))))


def test_power_normalize_hand_value():
    out = power_normalize(signal_from(np.array([3 + 4j])), 1.0).to_complex()
    np.testing.assert_allclose(out, [[0.6 + 0.8j]], atol=1e-15)


def test_power_normalize_fixed_point(rng):
    z = rng.standard_normal(50) + 1j * rng.standard_normal(50)
    z *= math.sqrt(50 * 2.0) / np.linalg.norm(z)
    out = power_normalize(signal_from(z), 2.0).to_complex()
    assert np.max(np.abs(out - z)) < 1e-12


def test_power_normalize_random_signal(rng):
    z = rng.standard_normal((4, 100)) + 1j * rng.standard_normal((4, 100))
    out = power_normalize(signal_from(z), 1.0)
    np.testing.assert_allclose(out.power(), 100.0, rtol=1e-6)
    # direction preserved
    cos = np.abs(np.sum(out.to_complex() * np.conj(z), axis=1)) / (
        np.linalg.norm(out.to_complex(), axis=1) * np.linalg.norm(z, axis=1))
    np.testing.assert_allclose(cos, 1.0, rtol=1e-12)


def test_power_normalize_rejects_zero_signal():
    with pytest.raises(DegenerateSignalError):
        power_normalize(signal_from(np.zeros(4, dtype=complex)))


@pytest.mark.parametrize("mu,expected", [(0.0, 1.0), (10.0, 0.1), (7.0, 0.19952623149688797)])
def test_noise_variance(mu, expected):
    # 10**-0.7 = 0.199526231496888 (independent decimal evaluation)
    assert snr_to_noise_variance(mu, 1.0) == pytest.approx(expected, rel=1e-12)


def test_noise_variance_rejects_noiseless():
    with pytest.raises(ValueError):
        snr_to_noise_variance(NOISELESS)


def test_channel_params_invariant():
    assert ChannelParams(1.0, 10.0, "awgn").noise_variance == pytest.approx(0.1)
    assert ChannelParams(1.0, NOISELESS, "noiseless").noise_variance == 0.0
    with pytest.raises(ValueError):
        ChannelParams(1.0, NOISELESS, "awgn")


def test_awgn_zero_noise_is_identity(rng):
    sig = signal_from(rng.standard_normal(10) + 1j)
    np.testing.assert_array_equal(awgn_transfer(sig, 0.0, rng).pairs.data, sig.pairs.data)


def test_awgn_statistics():
    sig = signal_from(np.zeros(100_000, dtype=complex))
    noise = awgn_transfer(sig, 0.5, np.random.default_rng(7)).to_complex()[0]
    assert abs(np.mean(np.abs(noise) ** 2) - 0.5) < 0.005
    assert abs(noise.mean()) < 0.01
    # circular symmetry: half the variance on each component
    assert abs(noise.real.var() - 0.25) < 0.005 and abs(noise.imag.var() - 0.25) < 0.005


def test_awgn_same_seed_same_output(rng):
    sig = signal_from(rng.standard_normal(32) + 0j)
    a = awgn_transfer(sig, 0.3, np.random.default_rng(3)).pairs.data
    b = awgn_transfer(sig, 0.3, np.random.default_rng(3)).pairs.data
    np.testing.assert_array_equal(a, b)


def test_awgn_rejects_negative_variance(rng):
    with pytest.raises(ValueError):
        awgn_transfer(signal_from(np.ones(3, dtype=complex)), -1.0, rng)


@pytest.mark.parametrize("mu", [-3.0, 0.0, 7.0, 14.0])
def test_awgn_empirical_snr(mu):
    rng = np.random.default_rng(11)
    k = 100_000
    z = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    sent = power_normalize(signal_from(z), 1.0)
    got = awgn_transfer(sent, snr_to_noise_variance(mu), rng)
    noise = got.to_complex() - sent.to_complex()
    measured = 10 * math.log10(1.0 / np.mean(np.abs(noise) ** 2))
    assert abs(measured - mu) < 0.1


def test_rayleigh_zero_noise_removes_fading(rng):
    sig = signal_from(rng.standard_normal(64) + 1j * rng.standard_normal(64))
    out = rayleigh_transfer(sig, 0.0, rng)
    np.testing.assert_array_equal(out.pairs.data, sig.pairs.data)


def test_rayleigh_effective_noise_is_heavier_than_awgn():
    sig = signal_from(np.zeros(100_000, dtype=complex))
    eff = rayleigh_transfer(sig, 0.2, np.random.default_rng(5)).to_complex()
    assert np.var(eff) > 0.2


def test_rayleigh_determinism(rng):
    sig = signal_from(rng.standard_normal(16) + 0j)
    a = rayleigh_transfer(sig, 0.1, np.random.default_rng(9)).pairs.data
    b = rayleigh_transfer(sig, 0.1, np.random.default_rng(9)).pairs.data
    np.testing.assert_array_equal(a, b)


def test_fading_redraws_near_zero_taps():
    class StuckRng:
        """Returns zeros on the first draw, then ones."""

        def __init__(self):
            self.calls = 0

        def standard_normal(self, shape):
            self.calls += 1
            return np.zeros(shape) if self.calls <= 2 else np.ones(shape)

    counter = collections.Counter()
    h = draw_fading((1, 3), StuckRng(), counter)
    assert counter["fading_redraws"] == 3
    assert np.all(np.abs(h) > 0.5)


def test_fading_has_unit_power():
    h = draw_fading((1, 100_000), np.random.default_rng(1))
    assert abs(np.mean(np.abs(h) ** 2) - 1.0) < 0.02


def test_noiseless_transfer_identity(rng):
    t = Tensor(rng.standard_normal((2, 4, 2, 2)))
    sig = power_normalize(frame(t))
    out = noiseless_transfer(sig)
    assert out is sig
    np.testing.assert_array_equal(unframe(out, (4, 2, 2)).data, sig.pairs.data.reshape(2, 4, 2, 2))
    np.testing.assert_array_equal(out.power(), sig.power())


def test_transmit_mixes_noiseless_and_noisy_items(rng):
    sig = signal_from(np.ones((3, 8), dtype=complex))
    out = transmit(sig, [NOISELESS, 0.0, NOISELESS], "awgn", rng).pairs.data
    np.testing.assert_array_equal(out[0], sig.pairs.data[0])
    np.testing.assert_array_equal(out[2], sig.pairs.data[2])
    assert not np.array_equal(out[1], sig.pairs.data[1])


def test_transfers_are_pure(rng):
    sig = signal_from(rng.standard_normal(16) + 0j)
    before = sig.pairs.data.copy()
    transmit(sig, [3.0], "rayleigh", rng)
    np.testing.assert_array_equal(sig.pairs.data, before)
