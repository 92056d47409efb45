"""Compressive-sampling time-of-arrival estimation for impulse-radio UWB."""

__version__ = "0.1.0"

from .acquisition import MeasurementMatrix, Measurements, awgn, dump_phi, gaussian_matrix, load_phi, project
from .channel import (
    AprioriStats,
    ChannelParams,
    ChannelRealization,
    apriori_stats,
    sample_channel,
    significant_paths,
)
from .dictionary import HolographicDictionary, ShiftDictionary, build_dictionary, holographic
from .errors import (
    ChannelError,
    ConfigurationError,
    CstoaError,
    DimensionError,
    ParameterError,
    SweepError,
    TrialError,
)
from .estimators import (
    AprioriConfig,
    GreedyConfig,
    MlConfig,
    greedy_toa,
    greedy_toa_apriori,
    ls_residual,
    ml_toa,
)
from .harness import ExperimentConfig, SweepTable, mse, run_sweep, run_trial
from .waveform import FrameConfig, PulseSamples, ReceivedWaveform, gaussian2_pulse, synthesize_received
