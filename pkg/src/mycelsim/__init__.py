"""Simulation and spectral analysis of frequency discrimination in
nonlinear conductive (mycelium-like) networks.

Drive a small dual-transport network with low-frequency waveforms, record
differential channels, and push the recordings through the analysis chain:
Blackman-windowed amplitude spectra, harmonic extraction, THD, fuzzy
category inference, and two-tone intermodulation matching.
"""

__version__ = "0.1.0"

from .errors import (
    MycelsimError,
    NewtonConvergenceError,
    SimulationError,
    SingularNodalSystemError,
    ValidationError,
)
from .signals import (
    EndogenousNoiseSpec,
    TimeSeries,
    WaveformSpec,
    add_endogenous_noise,
    superpose,
    synthesize,
)
from .spectral import (
    HarmonicReport,
    PeakList,
    Spectrum,
    amplitude_spectrum,
    blackman_window,
    detect_peaks,
    harmonic_amplitudes,
    harmonic_report,
    normalized_ratio_series,
    thd,
)
from .netsim import (
    KERNEL_NAME,
    DualTransportParams,
    Edge,
    EdgeState,
    NetworkTopology,
    SimConfig,
    Terminals,
    default_params,
    default_topology,
    edge_current,
    simulate,
    state_derivative,
)
from .fuzzy import (
    Classification,
    FuzzyPartition,
    GaussianMF,
    SigmoidMF,
    classify,
    default_partition,
    fuzzify,
    membership,
    threshold_discriminate,
)
from .mixing import (
    IntermodProduct,
    MixReport,
    MixSpec,
    analyze_two_tone,
    match_products,
    predict_products,
    run_mixing_experiment,
)
from .pipeline import (
    AnalysisConfig,
    ExperimentConfig,
    SweepResult,
    emit_report,
    ingest_csv,
    load_config,
    run_sweep,
    save_config,
)
