"""Shifted-pulse dictionary and its measurement-domain (holographic) image."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .acquisition import MeasurementMatrix
from .errors import DimensionError, ParameterError
from .waveform import FrameConfig, PulseSamples

MIN_COLUMN_NORM = 1e-12


@dataclass(frozen=True)
class ShiftDictionary:
    """Rows are the pulse shifted by ``l * n0`` samples, zero padded to N.

    Atoms running past the end of the frame are truncated and left
    unnormalized.
    """

    atoms: np.ndarray  # Z x N
    n0: int
    sample_period: float

    @property
    def Z(self) -> int:
        return self.atoms.shape[0]

    @property
    def N(self) -> int:
        return self.atoms.shape[1]

    @property
    def delta(self) -> float:
        """Atom spacing in seconds."""
        return self.n0 * self.sample_period


@dataclass(frozen=True)
class HolographicDictionary:
    columns: np.ndarray  # M x Z, unit-norm columns
    column_norms: np.ndarray
    delta: float

    @property
    def M(self) -> int:
        return self.columns.shape[0]

    @property
    def Z(self) -> int:
        return self.columns.shape[1]


def build_dictionary(pulse: PulseSamples, cfg: FrameConfig, n0: int = 1) -> ShiftDictionary:
    if n0 < 1:
        raise ParameterError("n0 must be >= 1")
    N = cfg.N
    Z = N // n0
    if Z < 2:
        raise ParameterError(f"n0={n0} leaves only {Z} atom(s) in a frame of {N} samples")
    D = np.zeros((Z, N))
    w = pulse.samples
    for ell in range(Z):
        s = ell * n0
        k = min(pulse.P, N - s)
        D[ell, s : s + k] = w[:k]
    D.setflags(write=False)
    return ShiftDictionary(D, n0, cfg.sample_period)


def holographic(phi: MeasurementMatrix, D: ShiftDictionary) -> HolographicDictionary:
    """``Phi D^T`` with every column scaled to unit l2 norm."""
    if phi.N != D.N:
        raise DimensionError(f"Phi has N={phi.N} but the dictionary atoms have length {D.N}")
    H = phi.entries @ D.atoms.T
    norms = np.linalg.norm(H, axis=0)
    bad = np.flatnonzero(norms < MIN_COLUMN_NORM)
    if bad.size:
        raise ParameterError(f"degenerate projection: {bad.size} column(s) vanish, first at atom {bad[0]}")
    H /= norms
    H.setflags(write=False)
    norms.setflags(write=False)
    return HolographicDictionary(H, norms, D.delta)
