"""entlink: stochastic simulator and analysis library for a telecom-photon /
solid-state quantum-memory entanglement link.

Event-level Monte Carlo of the pair source, the comb memory with on-demand
spin-wave storage, and the time-bin entanglement analyzers, together with the
estimators (cross-correlation, fringe fits, decay fits, entanglement
witnesses) that turn detection logs into physics numbers.
"""

__version__ = "0.1.0"

from .analyzer import (
    AnalyzerParams,
    Arm,
    TimeBinState,
    TransmitOrStore,
    TwoCombAfc,
    check_franson_condition,
    coincidence_probability,
    postselect_central_bin,
    route_through_interferometer,
)
from .engine import (
    Experiment,
    ExperimentConfig,
    SweepPoint,
    config_digest,
    estimate_spin_wave_efficiency,
    expected_g2,
    run_fringe_scan,
    run_g2_experiment,
    run_ts_sweep,
)
from .estimator import (
    CoincidenceHistogram,
    DecayModel,
    FringeDataset,
    G2Estimate,
    UndefinedEstimateError,
    WitnessReport,
    build_histogram,
    entanglement_witness,
    estimate_g2,
    fidelity_from_visibility,
    fit_fringe,
    fit_gaussian_decay,
    one_over_e_time,
    visibility_from_g2,
)
from .events import Channel, ConfigError, DetectionEvent, ParameterError
from .eventlog import EventLog, read_event_log, write_event_log
from .leastsq import FitResult, levenberg_marquardt
from .memory import (
    FilterParams,
    MemoryParams,
    StorageMode,
    StorageOutcome,
    control_noise_level,
    filter_chain_transmission,
    sample_control_pulse_noise,
    spin_wave_efficiency,
    spin_wave_g2_model,
    storage_trial,
    temporal_mode_capacity,
)
from .presets import Calibration, REFERENCE, build_preset, calibrate
from .source import (
    PairEvent,
    SourceParams,
    apply_pump_gate,
    sample_pair_emissions,
    select_idler_mode,
)
