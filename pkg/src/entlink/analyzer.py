"""Energy-time entanglement analysis with unbalanced interferometers.

Signal and idler each traverse an interferometer whose arms differ by tau_mz.
Arrival-time post-selection keeps the central coincidence bin, where the
both-short and both-long processes are indistinguishable and interfere; the
coincidence rate then oscillates with the summed arm phases.  The idler side
is a fiber interferometer; the signal side is realized in the filter crystal,
either as two combs with storage times differing by tau_mz or as transmission
versus a single short-delay echo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .events import ParameterError
from .source import PairEvent


class Arm(Enum):
    SHORT = "short"
    LONG = "long"


@dataclass(frozen=True)
class TwoCombAfc:
    """Signal analyzer built from two combs with storage times t_short/t_long."""

    t_short: float = 2e-6
    t_long: float = 2.42e-6


@dataclass(frozen=True)
class TransmitOrStore:
    """Signal analyzer: transmission (short) versus one echo of t_store (long)."""

    t_store: float = 420e-9
    p_transmit: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.p_transmit < 1.0:
            raise ParameterError("p_transmit must be in (0, 1)")


@dataclass(frozen=True)
class AnalyzerParams:
    """Interferometer pair for the entanglement measurement.

    analyzer_visibility lumps interferometer imbalance and imperfect overlap
    of the comb-based analyzer into a single fringe-contrast factor.
    """

    tau_mz: float = 420e-9
    phase_idler: float = 0.0
    phase_signal: float = 0.0
    analyzer_visibility: float = 1.0
    signal_analyzer: TwoCombAfc | TransmitOrStore = field(default_factory=TwoCombAfc)

    def __post_init__(self):
        if self.tau_mz <= 0:
            raise ParameterError("tau_mz must be > 0")
        if not 0.0 <= self.analyzer_visibility <= 1.0:
            raise ParameterError("analyzer_visibility must be in [0, 1]")
        sa = self.signal_analyzer
        if isinstance(sa, TwoCombAfc):
            if abs((sa.t_long - sa.t_short) - self.tau_mz) > 1e-12:
                raise ParameterError("t_long - t_short must equal tau_mz")
        elif isinstance(sa, TransmitOrStore):
            if abs(sa.t_store - self.tau_mz) > 1e-12:
                raise ParameterError("t_store must equal tau_mz")
        else:
            raise ParameterError("unknown signal analyzer kind")


@dataclass(frozen=True)
class TimeBinState:
    """Post-selected two-time-bin state under the white-noise model.

    visibility is the effective entangled fraction; phase is the intrinsic
    phase of the late-late amplitude relative to early-early.
    """

    visibility: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.visibility <= 1.0:
            raise ParameterError("visibility must be in [0, 1]")


def check_franson_condition(tau_pump: float, tau_mz: float, tau_pair: float) -> bool:
    """True when tau_pump > tau_mz > tau_pair, the working regime of the scheme."""
    if tau_pump <= 0 or tau_mz <= 0 or tau_pair <= 0:
        raise ParameterError("all times must be > 0")
    return tau_pump > tau_mz > tau_pair


def coincidence_probability(state: TimeBinState, phase_sum: float, v_an: float) -> float:
    """Normalized central-bin coincidence probability.

    (1 + V * v_an * cos(phase + phase_sum)) / 2, where V is the state
    visibility and v_an the analyzer visibility.
    """
    return 0.5 * (1.0 + state.visibility * v_an * math.cos(state.phase + phase_sum))


def route_through_interferometer(
    photon_time: float,
    params: AnalyzerParams,
    arm_phase: float,
    rng: np.random.Generator,
    signal_side: bool = False,
) -> tuple[float, float, Arm]:
    """Route one photon through its analyzer.

    Idler side: fiber interferometer, short leaves the time unchanged, long
    adds tau_mz and the arm phase, both with probability 1/2.  Signal side:
    the arms are the two storage paths of the configured analyzer (equal
    probability for the two combs, configurable split for transmit-or-store).

    Returns (output_time, accumulated_phase, arm).
    """
    if signal_side:
        sa = params.signal_analyzer
        if isinstance(sa, TwoCombAfc):
            if rng.random() < 0.5:
                return photon_time + sa.t_short, 0.0, Arm.SHORT
            return photon_time + sa.t_long, arm_phase, Arm.LONG
        if rng.random() < sa.p_transmit:
            return photon_time, 0.0, Arm.SHORT
        return photon_time + sa.t_store, arm_phase, Arm.LONG
    if rng.random() < 0.5:
        return photon_time, 0.0, Arm.SHORT
    return photon_time + params.tau_mz, arm_phase, Arm.LONG


def postselect_central_bin(
    signal_time: float,
    idler_time: float,
    tau_mz: float,
    bin_tolerance: float,
    expected_offset: float = 0.0,
) -> bool:
    """True when a coincidence falls in the central time bin.

    The central bin sits at the configured memory-plus-path offset; the
    distinguishable short-long combinations land in side bins at +-tau_mz.
    """
    if not 0.0 < bin_tolerance < tau_mz / 2.0:
        raise ParameterError("bin_tolerance must be in (0, tau_mz / 2)")
    return abs((signal_time - idler_time) - expected_offset) <= bin_tolerance
