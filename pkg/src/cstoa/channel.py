"""Saleh-Valenzuela cluster/ray multipath channel and its first-path statistics.

Delays are in nanoseconds, rates in 1/ns.  Default parameters are read from
``data/cm1.cfg`` (IEEE 802.15.4a CM1, residential LOS).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import config as _cfg
from .errors import ChannelError, ParameterError

FADING_LAWS = ("rayleigh", "nakagami", "fixed")

# taps weaker than this (relative to the strongest) are dropped
MIN_RELATIVE_POWER = 1e-6
_MAX_ATTEMPTS = 16

_ALIASES = {
    "Lambda": "cluster_rate",
    "lambda_1": "ray_rate_1",
    "lambda_2": "ray_rate_2",
    "beta": "ray_mixture",
    "Gamma": "cluster_decay",
    "gamma": "ray_decay",
    "T_d": "max_delay",
}


@dataclass(frozen=True)
class ChannelParams:
    """Arrival/decay parameters of the cluster-ray model.

    ``ray_mixture`` is the probability of drawing a ray inter-arrival from
    ``ray_rate_1`` rather than ``ray_rate_2``.  ``max_clusters`` and
    ``max_rays`` cap the per-realization counts (``None`` = no cap); they
    exist mostly to force degenerate single-tap channels.
    """

    cluster_rate: float
    ray_rate_1: float
    ray_rate_2: float
    ray_mixture: float
    cluster_decay: float
    ray_decay: float
    max_delay: float
    fading: str = "rayleigh"
    nakagami_m: float = 1.0
    rng_seed: int = 0
    max_clusters: int | None = None
    max_rays: int | None = None

    def __post_init__(self):
        for name in ("cluster_rate", "ray_rate_1", "ray_rate_2", "cluster_decay", "ray_decay", "max_delay"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be strictly positive")
        if not 0.0 <= self.ray_mixture <= 1.0:
            raise ParameterError("ray_mixture must lie in [0, 1]")
        if self.fading not in FADING_LAWS:
            raise ParameterError(f"fading must be one of {FADING_LAWS}, got {self.fading!r}")
        if self.nakagami_m < 0.5:
            raise ParameterError("nakagami_m must be >= 0.5")
        for name in ("max_clusters", "max_rays"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ParameterError(f"{name} must be >= 1 when given")

    @classmethod
    def from_mapping(cls, values: dict, base: "ChannelParams | None" = None) -> "ChannelParams":
        """Build from string/number values keyed by field name or symbol alias.

        Unknown keys are ignored so one flat file can hold the whole experiment.
        """
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kw = dataclasses.asdict(base) if base is not None else {}
        for key, raw in values.items():
            name = _ALIASES.get(key, key)
            if name not in fields:
                continue
            if name == "fading":
                kw[name] = str(raw).strip().lower()
            elif name in ("rng_seed", "max_clusters", "max_rays"):
                kw[name] = None if str(raw).strip().lower() in ("", "none") else _cfg.to_int(raw)
            else:
                kw[name] = _cfg.to_float(raw)
        missing = [n for n, f in fields.items() if n not in kw and f.default is dataclasses.MISSING]
        if missing:
            raise ParameterError(f"channel config is missing {', '.join(missing)}")
        return cls(**kw)

    @classmethod
    def from_file(cls, path, base: "ChannelParams | None" = None) -> "ChannelParams":
        return cls.from_mapping(_cfg.read_flat(path), base=base)

    @classmethod
    def cm1(cls, **overrides) -> "ChannelParams":
        text = resources.files("cstoa").joinpath("data/cm1.cfg").read_text()
        return dataclasses.replace(cls.from_mapping(_cfg.parse_flat(text)), **overrides)


@dataclass(frozen=True)
class ChannelRealization:
    """Merged, delay-sorted, unit-energy tap list."""

    delays: np.ndarray  # ns, strictly increasing
    gains: np.ndarray
    cluster_times: np.ndarray = dataclasses.field(default_factory=lambda: np.zeros(1), repr=False)

    @property
    def toa(self) -> float:
        return float(self.delays[0])

    @property
    def L(self) -> int:
        return int(self.delays.size)

    @property
    def taps(self) -> list[tuple[float, float]]:
        return list(zip(self.delays.tolist(), self.gains.tolist()))

    def shifted(self, offset_ns: float) -> "ChannelRealization":
        return ChannelRealization(self.delays + offset_ns, self.gains, self.cluster_times + offset_ns)


def _ray_offsets(params: ChannelParams, room: float, rng: np.random.Generator) -> list[float]:
    offsets = [0.0]
    g = 0.0
    while params.max_rays is None or len(offsets) < params.max_rays:
        rate = params.ray_rate_1 if rng.random() < params.ray_mixture else params.ray_rate_2
        g += rng.exponential(1.0 / rate)
        if g >= room:
            break
        offsets.append(g)
    return offsets


def _draw(params: ChannelParams, rng: np.random.Generator):
    clusters = [0.0]
    t = 0.0
    while params.max_clusters is None or len(clusters) < params.max_clusters:
        t += rng.exponential(1.0 / params.cluster_rate)
        if t >= params.max_delay:
            break
        clusters.append(t)

    delays, mean_power = [], []
    for T in clusters:
        for g in _ray_offsets(params, params.max_delay - T, rng):
            delays.append(T + g)
            mean_power.append(np.exp(-T / params.cluster_decay - g / params.ray_decay))
    delays = np.asarray(delays)
    mean_power = np.asarray(mean_power)

    if params.fading == "rayleigh":
        power = mean_power * rng.exponential(1.0, size=mean_power.size)
    elif params.fading == "nakagami":
        m = params.nakagami_m
        power = rng.gamma(m, mean_power / m)
    else:
        power = mean_power
    sign = np.where(rng.random(mean_power.size) < 0.5, -1.0, 1.0)
    return np.asarray(clusters), delays, sign * np.sqrt(power)


def _merge_coincident(delays: np.ndarray, gains: np.ndarray):
    order = np.argsort(delays, kind="stable")
    delays, gains = delays[order], gains[order]
    keep = np.concatenate(([True], np.diff(delays) > 0))
    if keep.all():
        return delays, gains
    groups = np.cumsum(keep) - 1
    return delays[keep], np.bincount(groups, weights=gains)


def sample_channel(params: ChannelParams, rng: np.random.Generator | None = None) -> ChannelRealization:
    """Draw one realization.

    The first cluster arrives at 0 and its first ray has zero offset, so the
    returned ``toa`` is 0; callers shift the realization to the desired TOA.
    The line-of-sight tap is never pruned by the weak-tap threshold.
    """
    if rng is None:
        rng = np.random.default_rng(params.rng_seed)
    for _ in range(_MAX_ATTEMPTS):
        clusters, delays, gains = _draw(params, rng)
        delays, gains = _merge_coincident(delays, gains)
        power = gains * gains
        total = power.sum()
        if not total > 0:
            continue
        keep = power >= MIN_RELATIVE_POWER * power.max()
        keep[0] = power[0] > 0
        delays, gains = delays[keep], gains[keep]
        if delays.size == 0 or delays[0] != 0.0:
            continue
        gains = gains / np.sqrt(np.sum(gains * gains))
        return ChannelRealization(delays, gains, clusters)
    raise ChannelError(f"no usable channel realization after {_MAX_ATTEMPTS} attempts")


def significant_paths(ch: ChannelRealization, energy_fraction: float) -> np.ndarray:
    """Indices (ascending) of the fewest taps holding ``energy_fraction`` of the energy.

    Taps are taken strongest first; equal powers go to the earlier tap.
    """
    if not 0.0 < energy_fraction <= 1.0:
        raise ParameterError("energy_fraction must lie in (0, 1]")
    power = np.asarray(ch.gains, dtype=float) ** 2
    order = np.argsort(-power, kind="stable")
    cum = np.cumsum(power[order]) / power.sum()
    n = int(np.searchsorted(cum, energy_fraction - 1e-12)) + 1
    return np.sort(order[: min(n, power.size)])


def first_path_lag(ch: ChannelRealization, energy_fraction: float) -> tuple[int, float]:
    """``(lambda, tau_pld)`` for one realization.

    ``lambda`` counts significant taps earlier than the strongest tap and
    ``tau_pld`` is the strongest-tap delay minus the first-tap delay (ns).
    """
    peak = int(np.argmax(np.abs(ch.gains)))  # first maximum wins ties
    sig = significant_paths(ch, energy_fraction)
    return int(np.count_nonzero(sig < peak)), float(ch.delays[peak] - ch.delays[0])


@dataclass(frozen=True)
class AprioriStats:
    lambda_pmf: dict[int, float]
    pld_edges: np.ndarray  # ns
    pld_density: np.ndarray  # 1/ns
    pld_samples: np.ndarray = dataclasses.field(repr=False)
    energy_fraction: float = 0.8

    def prob_pld_exceeds(self, tau_ns: float) -> float:
        return float(np.mean(self.pld_samples > tau_ns))


def apriori_stats(
    params: ChannelParams,
    n_realizations: int,
    energy_fraction: float = 0.8,
    sampling_rate: float = 8e9,
    rng: np.random.Generator | None = None,
    bin_scale: float = 1.0,
) -> AprioriStats:
    """Empirical PMF of ``lambda`` and density of ``tau_pld`` over many realizations.

    The histogram bin width is ``bin_scale / sampling_rate``.
    """
    if n_realizations < 1:
        raise ParameterError("n_realizations must be >= 1")
    if sampling_rate <= 0 or bin_scale <= 0:
        raise ParameterError("sampling_rate and bin_scale must be positive")
    if rng is None:
        rng = np.random.default_rng(params.rng_seed)
    lam = np.empty(n_realizations, dtype=np.int64)
    pld = np.empty(n_realizations)
    for i in range(n_realizations):
        lam[i], pld[i] = first_path_lag(sample_channel(params, rng), energy_fraction)

    values, counts = np.unique(lam, return_counts=True)
    pmf = {int(v): float(c) / n_realizations for v, c in zip(values, counts)}

    width = bin_scale / sampling_rate * 1e9
    nbins = max(1, int(np.floor(pld.max() / width)) + 1)
    edges = np.arange(nbins + 1) * width
    density, edges = np.histogram(pld, bins=edges, density=True)
    return AprioriStats(pmf, edges, density, pld, energy_fraction)
