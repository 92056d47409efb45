"""Transmit pulse and noiseless received-frame synthesis.

All times in this module are in seconds unless a name says otherwise
(channel realizations carry their delays in nanoseconds).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from .errors import ConfigurationError, ParameterError

# Fraction of the analytic pulse energy that must fall inside the truncation window.
PULSE_ENERGY_FRACTION = 0.999


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def gaussian2(t, sigma: float):
    """Second Gaussian derivative (sign flipped so the peak is positive), unit peak.

    ``s(t) = (1 - (t/sigma)**2) * exp(-(t/sigma)**2 / 2)``
    """
    x = np.asarray(t, dtype=float) / sigma
    return (1.0 - x * x) * np.exp(-0.5 * x * x)


def _window_energy_fraction(half_width_in_sigmas: float) -> float:
    # integral of (1 - x^2)^2 exp(-x^2) over the real line is 3*sqrt(pi)/4
    inside, _ = integrate.quad(
        lambda x: (1.0 - x * x) ** 2 * math.exp(-x * x), -half_width_in_sigmas, half_width_in_sigmas
    )
    return inside / (0.75 * math.sqrt(math.pi))


@lru_cache(maxsize=None)
def _half_width_in_sigmas(fraction: float) -> float:
    return optimize.brentq(lambda a: _window_energy_fraction(a) - fraction, 0.5, 20.0, xtol=1e-14)


def pulse_sigma(width: float, energy_fraction: float = PULSE_ENERGY_FRACTION) -> float:
    """Gaussian standard deviation that puts ``energy_fraction`` of the pulse inside ``width``."""
    if width <= 0:
        raise ParameterError(f"pulse width must be positive, got {width!r}")
    # tiny margin keeps the root on the ">=" side of the target
    a = _half_width_in_sigmas(energy_fraction + 1e-10)
    return 0.5 * width / a


@dataclass(frozen=True)
class PulseSamples:
    """Sampled, unit-energy transmit pulse."""

    samples: np.ndarray
    sample_period: float
    width: float
    sigma: float
    raw: np.ndarray = field(repr=False)  # unit-peak samples before energy normalization

    @property
    def P(self) -> int:
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        """Sample instants relative to the pulse center."""
        return (np.arange(self.P) - 0.5 * (self.P - 1)) * self.sample_period


def gaussian2_pulse(width: float, sampling_rate: float) -> PulseSamples:
    """Second-order Gaussian pulse of the given width sampled at ``sampling_rate``.

    The pulse occupies ``P = round(width * sampling_rate)`` samples placed
    symmetrically about the peak, and is scaled to unit discrete energy.
    """
    if width <= 0 or sampling_rate <= 0:
        raise ParameterError("pulse width and sampling rate must be positive")
    P = int(round(width * sampling_rate))
    if P < 2:
        raise ParameterError(f"pulse of width {width} s spans {P} sample(s) at {sampling_rate} Hz; need >= 2")
    ts = 1.0 / sampling_rate
    sigma = pulse_sigma(width)
    t = (np.arange(P) - 0.5 * (P - 1)) * ts
    raw = gaussian2(t, sigma)
    # enforce exact mirror symmetry against rounding in t
    raw = 0.5 * (raw + raw[::-1])
    samples = raw / np.sqrt(np.sum(raw * raw))
    return PulseSamples(_frozen(samples), ts, float(width), sigma, _frozen(raw))


@dataclass(frozen=True)
class FrameConfig:
    """Single-frame signalling setup.

    Only one frame with no time hopping and positive polarity is supported, so
    ``n_frames``, ``th_code`` and ``polarity`` are fixed at 1, 0 and 1.
    """

    frame_duration: float = 200e-9
    sampling_rate: float = 8e9
    energy: float = 1.0
    delay_spread: float = 0.0
    n_frames: int = 1
    chip_duration: float = 0.0
    th_code: int = 0
    polarity: int = 1

    def __post_init__(self):
        if self.frame_duration <= 0 or self.sampling_rate <= 0:
            raise ParameterError("frame duration and sampling rate must be positive")
        if self.energy <= 0:
            raise ParameterError("captured energy must be positive")
        n = self.frame_duration * self.sampling_rate
        if abs(n - round(n)) > 1e-6 * max(1.0, n):
            raise ParameterError(f"T_f * F_s = {n} is not an integer sample count")
        if (self.n_frames, self.th_code, self.polarity) != (1, 0, 1):
            raise ParameterError("only N_f=1, c_j=0, d_j=1 is supported")
        if self.delay_spread < 0 or self.frame_duration < 2 * self.delay_spread * (1 - 1e-12):
            raise ConfigurationError(
                f"frame duration {self.frame_duration} s must be at least twice the delay spread {self.delay_spread} s"
            )

    @property
    def N(self) -> int:
        return int(round(self.frame_duration * self.sampling_rate))

    @property
    def sample_period(self) -> float:
        return 1.0 / self.sampling_rate


@dataclass(frozen=True)
class ReceivedWaveform:
    """One frame of Nyquist-rate received samples."""

    samples: np.ndarray
    true_toa: float
    sample_period: float
    delays: np.ndarray | None = None  # grid indices of the synthesized taps
    snr_db: float = math.inf

    @property
    def N(self) -> int:
        return self.samples.size

    @property
    def energy(self) -> float:
        return float(np.dot(self.samples, self.samples))


def shifted_pulse(pulse: PulseSamples, shift: int, N: int) -> np.ndarray:
    """Zero-padded copy of the pulse starting at sample ``shift``, truncated to length N."""
    out = np.zeros(N)
    stop = min(N, shift + pulse.P)
    if stop > shift:
        out[shift:stop] = pulse.samples[: stop - shift]
    return out


def synthesize_received(pulse: PulseSamples, channel, cfg: FrameConfig) -> ReceivedWaveform:
    """Noiseless frame ``sqrt(E_b/N_f) * sum_l alpha_l * w_{d_l}``.

    Tap delays (ns) are snapped to the nearest sample; the snapped first-path
    delay is reported as ``true_toa``.
    """
    if not math.isclose(pulse.sample_period, cfg.sample_period, rel_tol=1e-9):
        raise ConfigurationError("pulse and frame use different sample periods")
    N, P = cfg.N, pulse.P
    d = np.rint(np.asarray(channel.delays, dtype=float) * 1e-9 / cfg.sample_period).astype(np.int64)
    if d.size == 0:
        raise ConfigurationError("channel has no taps")
    if d.min() < 0:
        raise ConfigurationError("negative tap delay")
    if d.max() > N - P:
        raise ConfigurationError(
            f"tap at sample {int(d.max())} exceeds T_f - P*T_s (last admissible start {N - P})"
        )
    r = np.zeros(N)
    w = pulse.samples
    for di, a in zip(d, channel.gains):
        r[di : di + P] += a * w
    r *= math.sqrt(cfg.energy / cfg.n_frames)
    d.setflags(write=False)
    return ReceivedWaveform(_frozen(r), float(d.min() * cfg.sample_period), cfg.sample_period, d)
