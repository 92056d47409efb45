"""Time-of-arrival estimators.

* :func:`ml_toa` -- separable maximum likelihood at the Nyquist rate
  (matched filter, strongest ``L`` peaks, earliest one wins).
* :func:`greedy_toa` -- greedy pursuit over the holographic dictionary that
  keeps the lowest-indexed atom found in ``K`` iterations.
* :func:`greedy_toa_apriori` -- the same pursuit restricted to a maximum
  range and to a window before the strongest atom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import linalg

from .dictionary import HolographicDictionary
from .errors import DimensionError, ParameterError
from .waveform import PulseSamples

RANK_RTOL = 1e-10
# the pursuit stops once the residual is this small relative to y (nothing left to explain)
STOP_RTOL = 1e-10
ANCHORS = ("peak", "running")


def _floor_ratio(x: float, step: float) -> int:
    # guards against 50e-9 / 0.125e-9 == 399.99999999999994
    return int(math.floor(x / step + 1e-9))


@dataclass(frozen=True)
class MlConfig:
    L: int = 10
    exclusion: int | None = None  # minimum delay spacing in samples; None -> pulse length

    def __post_init__(self):
        if self.L < 1:
            raise ParameterError("L must be >= 1")
        if self.exclusion is not None and self.exclusion < 1:
            raise ParameterError("exclusion must be >= 1")


@dataclass(frozen=True)
class GreedyConfig:
    K: int = 5
    delta: float | None = None  # atom spacing (s); None -> taken from the dictionary

    def __post_init__(self):
        if self.K < 1:
            raise ParameterError("K must be >= 1")


@dataclass(frozen=True)
class AprioriConfig(GreedyConfig):
    toa_max: float = 50e-9
    pld_max: float = 20e-9
    anchor: str = "peak"

    def __post_init__(self):
        super().__post_init__()
        if not self.toa_max > 0:
            raise ParameterError("toa_max must be positive")
        if self.pld_max < 0:
            raise ParameterError("pld_max must be non-negative")
        if self.anchor not in ANCHORS:
            raise ParameterError(f"anchor must be one of {ANCHORS}")

    def omega(self, delta: float) -> int:
        return _floor_ratio(self.pld_max, delta)

    def z_max(self, delta: float, Z: int) -> int:
        return min(Z, _floor_ratio(self.toa_max, delta))


class MlEstimate(NamedTuple):
    toa: float
    delays: np.ndarray  # sample indices, in selection order
    gains: np.ndarray


def matched_filter(r: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``m[d] = w_d^T r`` for every full-support shift ``d = 0 .. N-P``."""
    return np.correlate(r, w, mode="valid")


def ml_toa(r, pulse: PulseSamples, cfg: MlConfig = MlConfig()) -> MlEstimate:
    """Separable ML estimate.

    The ``L`` largest squared matched-filter outputs are picked greedily with
    pairwise spacing of at least ``cfg.exclusion`` samples; the gains are the
    matched-filter outputs at those delays and the TOA is the earliest one.
    Picking stops early once the remaining outputs are numerically zero.
    """
    x = np.asarray(getattr(r, "samples", r), dtype=float)
    w = pulse.samples
    if x.size < w.size:
        raise DimensionError(f"received frame ({x.size} samples) is shorter than the pulse ({w.size})")
    excl = pulse.P if cfg.exclusion is None else cfg.exclusion
    m = matched_filter(x, w)
    score = m * m
    avail = np.ones(score.size, dtype=bool)
    floor = (STOP_RTOL**2) * score.max()
    picks = []
    for _ in range(cfg.L):
        if not avail.any():
            break
        d = int(np.argmax(np.where(avail, score, -1.0)))
        if picks and score[d] <= floor:
            break  # only numerically empty lags remain
        picks.append(d)
        avail[max(0, d - excl + 1) : d + excl] = False
    delays = np.asarray(picks, dtype=np.int64)
    return MlEstimate(float(delays.min() * pulse.sample_period), delays, m[delays])


def ls_residual(H_I: np.ndarray, y: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """``y`` minus its orthogonal projection onto the span of the columns of ``H_I``.

    Uses a column-pivoted QR; columns whose pivot falls below
    ``rtol * max column norm`` are treated as dependent and dropped.
    """
    A = np.asarray(H_I, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    y = np.asarray(y, dtype=float)
    if A.shape[1] < 1:
        raise ParameterError("need at least one column")
    if A.shape[0] != y.size:
        raise DimensionError(f"H_I has {A.shape[0]} rows, y has {y.size} entries")
    Q, R, _ = linalg.qr(A, mode="economic", pivoting=True)
    scale = np.linalg.norm(A, axis=0).max()
    if scale == 0.0:
        return y.copy()
    rank = int(np.count_nonzero(np.abs(np.diag(R)) > rtol * scale))
    Qr = Q[:, :rank]
    return y - Qr @ (Qr.T @ y)


@dataclass
class PursuitTrace:
    """What a greedy run did, in selection order."""

    selected: list[int]
    toa_index: int
    residual_norms: list[float]  # ||e_0|| .. ||e_k||
    delta: float
    residuals: list[np.ndarray] | None = None

    @property
    def toa(self) -> float:
        return self.toa_index * self.delta


def _pursuit(
    y: np.ndarray,
    H: np.ndarray,
    K: int,
    accept: Callable[[int, int, int], bool],
    delta: float,
    keep_residuals: bool,
) -> PursuitTrace:
    M, Z = H.shape
    if y.size != M:
        raise DimensionError(f"y has {y.size} entries, dictionary has {M} rows")
    if K > M:
        raise ParameterError(f"K={K} exceeds the number of measurements M={M}")
    if K > Z:
        raise ParameterError(f"K={K} exceeds the number of searchable atoms ({Z})")

    ynorm = float(np.linalg.norm(y))
    e = y
    norms = [ynorm]
    residuals = [e] if keep_residuals else None
    selected: list[int] = []
    ell = peak = 0
    for k in range(K):
        if k > 0 and norms[-1] <= STOP_RTOL * ynorm:
            break
        corr = np.abs(H.T @ e)
        corr[selected] = -1.0  # never re-pick an atom already in the support
        t = int(np.argmax(corr))  # lowest index on ties
        if k == 0:
            ell = peak = t
        elif accept(t, ell, peak):
            ell = t
        selected.append(t)
        e = ls_residual(H[:, selected], y)
        norms.append(float(np.linalg.norm(e)))
        if keep_residuals:
            residuals.append(e)
    return PursuitTrace(selected, ell, norms, delta, residuals)


def _inputs(y, H: HolographicDictionary, cfg: GreedyConfig):
    yv = np.asarray(getattr(y, "y", y), dtype=float)
    delta = H.delta if cfg.delta is None else cfg.delta
    return yv, delta


def greedy_pursuit(y, H: HolographicDictionary, cfg: GreedyConfig, keep_residuals: bool = False) -> PursuitTrace:
    """Full trace of the unconstrained greedy estimator (see :func:`greedy_toa`)."""
    yv, delta = _inputs(y, H, cfg)
    return _pursuit(yv, H.columns, cfg.K, lambda t, ell, peak: t < ell, delta, keep_residuals)


def greedy_toa(y, H: HolographicDictionary, cfg: GreedyConfig) -> float:
    """TOA from ``K`` rounds of correlation-and-projection.

    Each round picks the atom most correlated with the residual and refits
    ``y`` on all atoms picked so far; the estimate is the lowest picked atom
    index times the atom spacing.
    """
    return greedy_pursuit(y, H, cfg).toa


def apriori_pursuit(y, H: HolographicDictionary, cfg: AprioriConfig, keep_residuals: bool = False) -> PursuitTrace:
    yv, delta = _inputs(y, H, cfg)
    z_max = cfg.z_max(delta, H.Z)
    if z_max < 1:
        raise ParameterError(f"toa_max={cfg.toa_max} s leaves no searchable atom at spacing {delta} s")
    omega = cfg.omega(delta)
    if cfg.anchor == "peak":
        accept = lambda t, ell, peak: t < ell and t >= peak - omega  # noqa: E731
    else:
        accept = lambda t, ell, peak: t < ell and t >= ell - omega  # noqa: E731
    return _pursuit(yv, H.columns[:, :z_max], cfg.K, accept, delta, keep_residuals)


def greedy_toa_apriori(y, H: HolographicDictionary, cfg: AprioriConfig) -> float:
    """Greedy TOA using range and peak-lag priors.

    Only atoms below ``floor(toa_max / delta)`` are searched, and after the
    first (strongest) pick an earlier atom replaces the current estimate only
    if it lies at most ``floor(pld_max / delta)`` atoms before the anchor
    (the first pick, or the current estimate when ``anchor='running'``).
    """
    return apriori_pursuit(y, H, cfg).toa
