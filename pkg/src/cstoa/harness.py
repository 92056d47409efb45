"""Monte-Carlo experiment runner.

Every trial draws its TOA, channel and noise from independent generators
keyed by ``(master_seed, stream, trial_index)``, so results do not depend on
execution order or on how trials are split across workers.  Grid points of a
sweep reuse the same trial draws (common random numbers).
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from . import config as _cfg
from .acquisition import MeasurementMatrix, awgn, gaussian_matrix, project
from .channel import ChannelParams, sample_channel
from .dictionary import HolographicDictionary, ShiftDictionary, build_dictionary, holographic
from .errors import ConfigurationError, CstoaError, ParameterError, SweepError, TrialError
from .estimators import AprioriConfig, GreedyConfig, MlConfig, greedy_toa, greedy_toa_apriori, ml_toa
from .waveform import FrameConfig, PulseSamples, gaussian2_pulse, synthesize_received

log = logging.getLogger(__name__)

ESTIMATORS = ("ml", "alg1", "alg2")
AXES = ("snr", "k", "u", "delta")
CSV_HEADER = ("axis", "axis_value", "snr_db", "estimator", "mse_s2", "rmse_ns", "n_trials", "runtime_ms")

_STREAMS = {"toa": 0, "channel": 1, "noise": 2, "phi": 3, "phi_trial": 4}


def substream(master_seed: int, name: str, *key: int) -> np.random.Generator:
    """Generator for one named stream, keyed by integers (e.g. the trial index)."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(_STREAMS[name], *key))
    return np.random.default_rng(ss)


# file key -> (field name, parser)
_NS = lambda v: _cfg.to_float(v) * 1e-9  # noqa: E731
_KEYS = {
    "frame_duration_ns": ("frame_duration", _NS),
    "sampling_rate_ghz": ("sampling_rate", lambda v: _cfg.to_float(v) * 1e9),
    "pulse_width_ns": ("pulse_width", _NS),
    "energy": ("energy", _cfg.to_float),
    "snr_db": ("snr_db", _cfg.to_float),
    "undersampling": ("undersampling", _cfg.to_int),
    "delta_samples": ("delta_samples", _cfg.to_int),
    "K": ("K", _cfg.to_int),
    "ml_paths": ("ml_paths", _cfg.to_int),
    "ml_exclusion": ("ml_exclusion", lambda v: None if str(v).lower() in ("", "none") else _cfg.to_int(v)),
    "toa_max_ns": ("toa_max", _NS),
    "pld_max_ns": ("pld_max", _NS),
    "apriori_anchor": ("apriori_anchor", str),
    "toa_lo_ns": ("toa_lo", _NS),
    "toa_hi_ns": ("toa_hi", _NS),
    "n_trials": ("n_trials", _cfg.to_int),
    "seed": ("master_seed", _cfg.to_int),
    "estimators": ("estimators", lambda v: tuple(s.strip() for s in str(v).split(",") if s.strip())),
    "phi_per_trial": ("phi_per_trial", _cfg.to_bool),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One simulation operating point.  Times in seconds."""

    frame_duration: float = 200e-9
    sampling_rate: float = 8e9
    pulse_width: float = 1e-9
    energy: float = 1.0
    snr_db: float = 24.0
    undersampling: int = 4
    delta_samples: int = 1
    K: int = 5
    ml_paths: int = 10
    ml_exclusion: int | None = None
    toa_max: float = 50e-9
    pld_max: float = 20e-9
    apriori_anchor: str = "peak"
    toa_lo: float = 0.0
    toa_hi: float = 50e-9
    n_trials: int = 200
    master_seed: int = 1
    estimators: tuple[str, ...] = ESTIMATORS
    phi_per_trial: bool = False
    channel: ChannelParams = field(default_factory=ChannelParams.cm1)

    def __post_init__(self):
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown or not self.estimators:
            raise ParameterError(f"estimators must be a non-empty subset of {ESTIMATORS}, got {self.estimators}")
        if self.n_trials < 1:
            raise ParameterError("n_trials must be >= 1")
        if not 0 <= self.toa_lo <= self.toa_hi:
            raise ParameterError("need 0 <= toa_lo <= toa_hi")
        frame = self.frame  # validates T_f, F_s, T_d
        N = frame.N
        if self.undersampling < 1 or N % self.undersampling:
            raise ConfigurationError(f"undersampling U={self.undersampling} must divide N={N}")
        if self.delta_samples < 1:
            raise ConfigurationError("delta_samples must be >= 1")
        span = self.toa_hi + self.channel.max_delay * 1e-9 + self.pulse_width
        if span > self.frame_duration * (1 + 1e-12):
            raise ConfigurationError(
                f"toa_hi + T_d + pulse width = {span * 1e9:.3f} ns does not fit in T_f = {self.frame_duration * 1e9:.3f} ns"
            )
        MlConfig(self.ml_paths, self.ml_exclusion)
        self.apriori

    @property
    def frame(self) -> FrameConfig:
        return FrameConfig(self.frame_duration, self.sampling_rate, self.energy, self.channel.max_delay * 1e-9)

    @property
    def M(self) -> int:
        return self.frame.N // self.undersampling

    @property
    def delta(self) -> float:
        return self.delta_samples / self.sampling_rate

    @property
    def apriori(self) -> AprioriConfig:
        return AprioriConfig(self.K, None, self.toa_max, self.pld_max, self.apriori_anchor)

    @classmethod
    def from_mapping(cls, values: dict, base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        """Build from a flat mapping of file keys (channel keys are picked up too)."""
        base = base or cls()
        kw = {}
        for key, raw in values.items():
            if key in _KEYS:
                name, parse = _KEYS[key]
                kw[name] = parse(raw)
        kw["channel"] = ChannelParams.from_mapping(values, base=base.channel)
        return dataclasses.replace(base, **kw)

    @classmethod
    def from_file(cls, path, overrides: dict | None = None) -> "ExperimentConfig":
        values = _cfg.read_flat(path) if path else {}
        values.update(overrides or {})
        return cls.from_mapping(values)

    def at(self, axis: str, value) -> "ExperimentConfig":
        """Copy with one sweep axis set to ``value``."""
        if axis == "snr":
            return dataclasses.replace(self, snr_db=float(value))
        if axis == "k":
            return dataclasses.replace(self, K=int(value))
        if axis == "u":
            return dataclasses.replace(self, undersampling=int(value))
        if axis == "delta":
            return dataclasses.replace(self, delta_samples=int(value))
        raise ParameterError(f"unknown sweep axis {axis!r}; expected one of {AXES}")

    def describe(self) -> dict:
        d = dataclasses.asdict(self)
        d["estimators"] = list(self.estimators)
        return d


@dataclass(frozen=True)
class Setup:
    """Structures shared (read-only) by all trials of one operating point."""

    frame: FrameConfig
    pulse: PulseSamples
    phi: MeasurementMatrix
    dictionary: ShiftDictionary
    H: HolographicDictionary


def build_phi(cfg: ExperimentConfig) -> MeasurementMatrix:
    N = cfg.frame.N
    return gaussian_matrix(cfg.M, N, substream(cfg.master_seed, "phi", cfg.M, N), seed=cfg.master_seed)


def prepare(cfg: ExperimentConfig, phi: MeasurementMatrix | None = None, _cache: dict | None = None) -> Setup:
    frame = cfg.frame
    pulse = gaussian2_pulse(cfg.pulse_width, cfg.sampling_rate)
    if phi is None:
        phi = build_phi(cfg)
    elif (phi.M, phi.N) != (cfg.M, frame.N):
        raise ConfigurationError(f"supplied Phi is {phi.M}x{phi.N}, configuration needs {cfg.M}x{frame.N}")
    key = (phi.M, cfg.delta_samples, id(phi))
    if _cache is not None and key in _cache:
        D, H = _cache[key]
    else:
        D = build_dictionary(pulse, frame, cfg.delta_samples)
        H = holographic(phi, D)
        if _cache is not None:
            _cache[key] = (D, H)
    return Setup(frame, pulse, phi, D, H)


@dataclass(frozen=True)
class TrialResult:
    trial_index: int
    true_toa: float
    estimates: dict[str, float]
    runtime: dict[str, float] = field(default_factory=dict, compare=False)  # seconds per estimator


def draw_toa(cfg: ExperimentConfig, trial_index: int) -> float:
    """TOA (s) drawn for one trial, before snapping to the sample grid."""
    return float(substream(cfg.master_seed, "toa", trial_index).uniform(cfg.toa_lo, cfg.toa_hi))


def run_trial(cfg: ExperimentConfig, trial_index: int, setup: Setup | None = None) -> TrialResult:
    """Simulate one received frame and run every enabled estimator on it."""
    try:
        setup = setup or prepare(cfg)
        seed = cfg.master_seed
        toa = draw_toa(cfg, trial_index)
        ch = sample_channel(cfg.channel, substream(seed, "channel", trial_index)).shifted(toa * 1e9)
        clean = synthesize_received(setup.pulse, ch, setup.frame)
        rx = awgn(clean, cfg.snr_db, substream(seed, "noise", trial_index))

        H = setup.H
        phi = setup.phi
        if cfg.phi_per_trial and {"alg1", "alg2"} & set(cfg.estimators):
            phi = gaussian_matrix(cfg.M, setup.frame.N, substream(seed, "phi_trial", cfg.M, trial_index), seed=seed)
            H = holographic(phi, setup.dictionary)
        y = project(phi, rx) if {"alg1", "alg2"} & set(cfg.estimators) else None

        estimates, runtime = {}, {}
        for name in cfg.estimators:
            t0 = time.perf_counter()
            if name == "ml":
                est = ml_toa(rx, setup.pulse, MlConfig(cfg.ml_paths, cfg.ml_exclusion)).toa
            elif name == "alg1":
                est = greedy_toa(y, H, GreedyConfig(cfg.K))
            else:
                est = greedy_toa_apriori(y, H, cfg.apriori)
            runtime[name] = time.perf_counter() - t0
            estimates[name] = est
    except CstoaError as exc:
        raise TrialError(f"trial {trial_index} (seed {cfg.master_seed}): {exc}") from exc
    return TrialResult(trial_index, clean.true_toa, estimates, runtime)


def _run_chunk(cfg: ExperimentConfig, setup: Setup, indices: list[int]) -> list[TrialResult]:
    return [run_trial(cfg, i, setup) for i in indices]


def run_trials(cfg: ExperimentConfig, setup: Setup | None = None, jobs: int = 1) -> list[TrialResult]:
    """All ``cfg.n_trials`` trials, ordered by trial index."""
    setup = setup or prepare(cfg)
    indices = list(range(cfg.n_trials))
    if jobs <= 1 or cfg.n_trials < 2 * jobs:
        return _run_chunk(cfg, setup, indices)
    chunks = [indices[i::jobs] for i in range(jobs)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(_run_chunk, [cfg] * jobs, [setup] * jobs, chunks))
    return sorted((r for part in parts for r in part), key=lambda r: r.trial_index)


def mse(truths, estimates) -> float:
    """Mean squared error."""
    t = np.asarray(truths, dtype=float)
    e = np.asarray(estimates, dtype=float)
    if t.shape != e.shape:
        raise ParameterError(f"length mismatch: {t.shape} vs {e.shape}")
    if t.size == 0:
        raise ParameterError("mse of an empty sample")
    d = t - e
    return float(np.mean(d * d))


@dataclass(frozen=True)
class SweepRow:
    axis: str
    axis_value: float | int
    snr_db: float
    estimator: str
    mse: float
    n_trials: int
    runtime_ms: float
    sq_errors: np.ndarray = field(repr=False, compare=False)

    @property
    def rmse_ns(self) -> float:
        return math.sqrt(self.mse) * 1e9

    @property
    def mse_se(self) -> float:
        """Standard error of the MSE estimate."""
        n = self.sq_errors.size
        return float(np.std(self.sq_errors, ddof=1) / math.sqrt(n)) if n > 1 else math.inf


@dataclass
class SweepTable:
    rows: list[SweepRow]
    metadata: dict = field(default_factory=dict)

    def select(self, estimator: str) -> list[SweepRow]:
        return [r for r in self.rows if r.estimator == estimator]

    def row(self, axis_value, estimator: str) -> SweepRow:
        for r in self.rows:
            if r.estimator == estimator and r.axis_value == axis_value:
                return r
        raise KeyError((axis_value, estimator))

    def to_csv(self, fh=None, record_runtime: bool = False) -> str:
        """Write the table; returns the text.

        ``runtime_ms`` is left empty unless ``record_runtime`` is set, so that
        repeated runs produce identical files (timings go to the metadata).
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow(
                (
                    r.axis,
                    r.axis_value if isinstance(r.axis_value, int) else repr(float(r.axis_value)),
                    repr(float(r.snr_db)),
                    r.estimator,
                    repr(r.mse),
                    repr(r.rmse_ns),
                    r.n_trials,
                    f"{r.runtime_ms:.3f}" if record_runtime else "",
                )
            )
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text

    def write(self, path, record_runtime: bool = False) -> None:
        with open(path, "w", newline="") as fh:
            self.to_csv(fh, record_runtime)
        meta_path = f"{path}.meta.json"
        with open(meta_path, "w") as fh:
            json.dump(self.metadata, fh, indent=2, default=str)
            fh.write("\n")


def _rows_for_point(axis, value, cfg: ExperimentConfig, results: list[TrialResult]) -> list[SweepRow]:
    truths = np.array([r.true_toa for r in results])
    rows = []
    for name in cfg.estimators:
        est = np.array([r.estimates[name] for r in results])
        d = truths - est
        rows.append(
            SweepRow(
                axis, value, cfg.snr_db, name, mse(truths, est), len(results),
                1e3 * sum(r.runtime[name] for r in results), d * d,
            )
        )
    return rows


def run_sweep(
    cfg: ExperimentConfig,
    axis: str = "snr",
    grid=None,
    jobs: int = 1,
    phi: MeasurementMatrix | None = None,
) -> SweepTable:
    """Run ``cfg.n_trials`` trials at every grid point of ``axis``.

    Structures depending on the axis (Phi for ``u``, the dictionary for
    ``delta``) are rebuilt per point.  Rows are ordered by axis value, then
    by estimator.  An empty ``grid`` means the single point of ``cfg``.
    """
    if axis not in AXES:
        raise ParameterError(f"unknown sweep axis {axis!r}; expected one of {AXES}")
    if grid is None or len(grid) == 0:
        grid = [{"snr": cfg.snr_db, "k": cfg.K, "u": cfg.undersampling, "delta": cfg.delta_samples}[axis]]
    cast = float if axis == "snr" else int
    grid = sorted({cast(v) for v in grid})
    started = datetime.now(timezone.utc)
    rows, points = [], []
    cache: dict = {}
    for value in grid:
        try:
            pcfg = cfg.at(axis, value)
            if phi is not None and axis == "u":
                raise ConfigurationError("a fixed Phi cannot be combined with an undersampling sweep")
            setup = prepare(pcfg, phi, cache)
            t0 = time.perf_counter()
            results = run_trials(pcfg, setup, jobs)
            wall = time.perf_counter() - t0
        except CstoaError as exc:
            raise SweepError(f"grid point {axis}={value}: {exc}") from exc
        point_rows = _rows_for_point(axis, value, pcfg, results)
        rows.extend(point_rows)
        points.append(
            {
                "axis_value": value,
                "M": setup.phi.M,
                "N": setup.frame.N,
                "Z": setup.H.Z,
                "P": setup.pulse.P,
                "wall_s": wall,
                "runtime_ms": {r.estimator: r.runtime_ms for r in point_rows},
            }
        )
        log.info("%s=%s done in %.2fs: %s", axis, value, wall,
                 ", ".join(f"{r.estimator} rmse={r.rmse_ns:.3f}ns" for r in point_rows))
    meta = {
        "package": "cstoa",
        "version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
        "axis": axis,
        "grid": grid,
        "config": cfg.describe(),
        "points": points,
    }
    return SweepTable(rows, meta)
