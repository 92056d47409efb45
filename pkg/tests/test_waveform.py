import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from cstoa import ChannelRealization, ConfigurationError, FrameConfig, ParameterError
from cstoa import gaussian2_pulse, synthesize_received
from cstoa.waveform import shifted_pulse


def channel(delays_samples, gains, ts=0.125e-9):
    return ChannelRealization(np.asarray(delays_samples, float) * ts * 1e9, np.asarray(gains, float))


def fd_second_derivative(t, sigma, h=1e-4):
    """Central-difference oracle for -d2/dt2 exp(-t^2 / 2 sigma^2), scaled to unit peak."""
    g = lambda x: np.exp(-0.5 * (x / sigma) ** 2)  # noqa: E731
    hs = h * sigma
    return -(g(t + hs) - 2 * g(t) + g(t - hs)) / hs**2 * sigma**2


class TestPulse:
    def test_reference_grid(self, pulse8):
        assert pulse8.P == 8
        assert pulse8.sample_period == pytest.approx(0.125e-9)
        assert abs(np.sum(pulse8.samples**2) - 1) < 1e-12

    @given(width=st.floats(0.3e-9, 3e-9), rate=st.floats(4e9, 40e9))
    @settings(max_examples=60, deadline=None)
    def test_symmetric_and_unit_energy(self, width, rate):
        if round(width * rate) < 2:
            return
        p = gaussian2_pulse(width, rate)
        assert np.allclose(p.samples, p.samples[::-1], atol=1e-12, rtol=0)
        assert abs(np.sum(p.samples**2) - 1) < 1e-12
        assert abs(p.P * p.sample_period - width) <= p.sample_period

    @pytest.mark.parametrize("rate", [8e9, 16e9])
    def test_raw_samples_are_the_analytic_pulse(self, rate):
        p = gaussian2_pulse(1e-9, rate)
        assert p.P == round(rate * 1e-9)
        oracle = fd_second_derivative(p.times, p.sigma)
        assert np.allclose(p.raw, oracle, atol=1e-6)

    def test_two_rates_share_one_analytic_shape(self):
        # the 16 GHz and 8 GHz pulses are samples of the same waveform; the
        # finer grid evaluated at the coarse instants reproduces the coarse pulse
        p8, p16 = gaussian2_pulse(1e-9, 8e9), gaussian2_pulse(1e-9, 16e9)
        assert p8.sigma == p16.sigma
        coarse_from_fine_shape = fd_second_derivative(p8.times, p16.sigma)
        assert np.max(np.abs(coarse_from_fine_shape - p8.raw)) < 1e-6

    def test_truncation_keeps_999_per_mille_of_energy(self, pulse8):
        s = pulse8.sigma * 1e9  # work in ns so quad tolerances are meaningful
        f = lambda t: ((1 - (t / s) ** 2) * math.exp(-0.5 * (t / s) ** 2)) ** 2  # noqa: E731
        inside, _ = integrate.quad(f, -0.5, 0.5, points=[0.0], epsabs=1e-14)
        total, _ = integrate.quad(f, -20 * s, 20 * s, points=[0.0], limit=200, epsabs=1e-14)
        assert inside / total >= 0.999
        assert inside / total < 0.9991

    @pytest.mark.parametrize("width, rate", [(0.0, 8e9), (-1e-9, 8e9), (1e-9, 0.0), (1e-9, 1e9)])
    def test_bad_parameters(self, width, rate):
        with pytest.raises(ParameterError):
            gaussian2_pulse(width, rate)


class TestFrame:
    def test_sample_count(self, frame):
        assert frame.N == 1600

    def test_rejects_non_integer_sample_count(self):
        with pytest.raises(ParameterError):
            FrameConfig(200.05e-9, 8e9)

    def test_rejects_short_frame(self):
        with pytest.raises(ConfigurationError):
            FrameConfig(100e-9, 8e9, delay_spread=60e-9)

    def test_only_single_frame_signalling(self):
        with pytest.raises(ParameterError):
            FrameConfig(n_frames=2)


class TestSynthesis:
    def test_identity_channel(self, pulse8, frame):
        rx = synthesize_received(pulse8, channel([0], [1.0]), frame)
        expected = np.zeros(frame.N)
        expected[:8] = pulse8.samples
        assert np.array_equal(rx.samples, expected)
        assert rx.true_toa == 0.0

    def test_two_tap_superposition(self, pulse8, frame):
        rx = synthesize_received(pulse8, channel([0, 10], [0.6, 0.8]), frame)
        w0 = np.concatenate([pulse8.samples, np.zeros(frame.N - 8)])
        w10 = np.roll(w0, 10)
        assert np.allclose(rx.samples, 0.6 * w0 + 0.8 * w10, atol=1e-15)

    def test_energy_conserved_for_disjoint_taps(self, pulse8, frame):
        g = np.array([0.5, -0.5, 0.5, 0.5])
        rx = synthesize_received(pulse8, channel([3, 40, 100, 900], g), frame)
        assert abs(rx.energy - 1) < 1e-10

    def test_energy_scale(self, pulse8):
        cfg = FrameConfig(200e-9, 8e9, energy=4.0)
        rx = synthesize_received(pulse8, channel([5], [1.0]), cfg)
        assert rx.energy == pytest.approx(4.0, abs=1e-12)

    def test_delays_snap_to_nearest_sample(self, pulse8, frame):
        ch = ChannelRealization(np.array([1.07, 2.3]), np.array([0.6, 0.8]))  # ns
        rx = synthesize_received(pulse8, ch, frame)
        assert rx.delays.tolist() == [9, 18]
        assert rx.true_toa == pytest.approx(9 * 0.125e-9)

    def test_tap_past_frame_end(self, pulse8, frame):
        with pytest.raises(ConfigurationError):
            synthesize_received(pulse8, channel([frame.N - 7], [1.0]), frame)
        synthesize_received(pulse8, channel([frame.N - 8], [1.0]), frame)

    @given(
        a=st.lists(st.tuples(st.integers(0, 500), st.floats(-1, 1)), min_size=1, max_size=6),
        b=st.lists(st.tuples(st.integers(0, 500), st.floats(-1, 1)), min_size=1, max_size=6),
    )
    @settings(max_examples=50, deadline=None)
    def test_linearity(self, pulse8, frame, a, b):
        ra = synthesize_received(pulse8, channel(*zip(*a)), frame).samples
        rb = synthesize_received(pulse8, channel(*zip(*b)), frame).samples
        both = sorted(a + b)
        rab = synthesize_received(pulse8, channel(*zip(*both)), frame).samples
        assert np.allclose(rab, ra + rb, atol=1e-12)

    @given(
        taps=st.lists(st.tuples(st.integers(0, 400), st.floats(-1, 1)), min_size=1, max_size=6),
        k=st.integers(0, 1000),
    )
    @settings(max_examples=50, deadline=None)
    def test_shift_covariance(self, pulse8, frame, taps, k):
        d, g = zip(*sorted(taps))
        r0 = synthesize_received(pulse8, channel(d, g), frame)
        rk = synthesize_received(pulse8, channel(np.array(d) + k, g), frame)
        assert np.array_equal(rk.samples[k:], r0.samples[: frame.N - k])
        assert np.all(rk.samples[:k] == 0)
        assert rk.true_toa == pytest.approx(r0.true_toa + k * frame.sample_period)


def test_shifted_pulse_truncates(pulse8):
    w = shifted_pulse(pulse8, 60, 64)
    assert np.array_equal(w[60:], pulse8.samples[:4])
    assert np.count_nonzero(w[:60]) == 0
