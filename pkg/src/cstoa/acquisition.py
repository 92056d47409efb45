"""Sub-Nyquist front end: AWGN, Gaussian measurement matrix, projection.

Noise is added to the Nyquist-rate frame before projection, ``y = Phi (r + n)``.
SNR is ``10 log10(E_b / sigma^2)`` with ``E_b`` the clean frame energy and
``sigma^2`` the per-sample noise variance.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DimensionError, ParameterError
from .waveform import ReceivedWaveform

_MAGIC = b"CSPHI\x00\x01\x00"
_HEADER = struct.Struct("<8sQQq")  # magic, M, N, seed


@dataclass(frozen=True)
class MeasurementMatrix:
    entries: np.ndarray
    seed: int | None = None

    @property
    def M(self) -> int:
        return self.entries.shape[0]

    @property
    def N(self) -> int:
        return self.entries.shape[1]

    @property
    def undersampling(self) -> float:
        """``U = N / M``."""
        return self.N / self.M


@dataclass(frozen=True)
class Measurements:
    y: np.ndarray
    snr_db: float = math.inf
    seed: int | None = None

    @property
    def M(self) -> int:
        return self.y.size


def noise_std(clean_energy: float, snr_db: float) -> float:
    return math.sqrt(clean_energy * 10.0 ** (-snr_db / 10.0))


def awgn(signal: ReceivedWaveform, snr_db: float | None, rng: np.random.Generator) -> ReceivedWaveform:
    """Add white Gaussian noise at ``snr_db``; ``None`` or ``+inf`` disables noise.

    A standard-normal vector is drawn and then scaled, so the same generator
    state yields proportional noise at every SNR.
    """
    if signal.N == 0:
        raise ParameterError("cannot add noise to an empty waveform")
    if snr_db is None or snr_db == math.inf:
        return signal
    if math.isnan(snr_db):
        raise ParameterError("snr_db is NaN")
    z = rng.standard_normal(signal.N)
    noisy = signal.samples + noise_std(signal.energy, snr_db) * z
    noisy.setflags(write=False)
    return replace(signal, samples=noisy, snr_db=float(snr_db))


def gaussian_matrix(
    M: int, N: int, rng: np.random.Generator | None = None, *, identity: bool = False, seed: int | None = None
) -> MeasurementMatrix:
    """M x N matrix of i.i.d. N(0, 1) entries.

    ``identity=True`` (requires ``M == N``) returns the identity, i.e. a
    Nyquist pass-through front end. When ``rng`` is omitted one is seeded
    from ``seed``.
    """
    if not (1 <= M <= N):
        raise ParameterError(f"need 1 <= M <= N, got M={M}, N={N}")
    if identity:
        if M != N:
            raise ParameterError("identity front end requires M == N")
        entries = np.eye(N)
    else:
        if rng is None:
            rng = np.random.default_rng(seed)
        entries = rng.standard_normal((M, N))
    entries.setflags(write=False)
    return MeasurementMatrix(entries, seed)


def project(phi: MeasurementMatrix, r) -> Measurements:
    """``y = Phi r``. ``r`` may be a :class:`ReceivedWaveform` or a plain vector."""
    snr = getattr(r, "snr_db", math.inf)
    x = np.asarray(getattr(r, "samples", r), dtype=float)
    if x.ndim != 1 or x.size != phi.N:
        raise DimensionError(f"Phi has N={phi.N} columns but the frame has shape {x.shape}")
    y = phi.entries @ x
    y.setflags(write=False)
    return Measurements(y, snr, phi.seed)


def dump_phi(phi: MeasurementMatrix, path) -> None:
    """Write Phi as a little-endian header (magic, M, N, seed) plus row-major float64 data.

    A seed of -1 in the header means "unknown".
    """
    seed = -1 if phi.seed is None else int(phi.seed)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, phi.M, phi.N, seed))
        fh.write(np.ascontiguousarray(phi.entries, dtype="<f8").tobytes(order="C"))


def load_phi(path) -> MeasurementMatrix:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ParameterError(f"{path}: too short for a measurement-matrix header")
    magic, M, N, seed = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise ParameterError(f"{path}: not a measurement-matrix dump")
    body = data[_HEADER.size :]
    if len(body) != 8 * M * N:
        raise ParameterError(f"{path}: expected {M}x{N} float64 entries, found {len(body)} bytes")
    entries = np.frombuffer(body, dtype="<f8").reshape(M, N).astype(float)
    entries.setflags(write=False)
    return MeasurementMatrix(entries, None if seed == -1 else seed)
