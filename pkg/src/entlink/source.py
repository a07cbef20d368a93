"""Cavity-enhanced photon-pair source model.

The source emits photon pairs into a comb of cavity frequency modes.  Pair
numbers per coincidence-window slot follow thermal (Bose-Einstein) statistics
independently in each mode, which is what makes the heralded cross-correlation
of an ideally filtered single mode converge to 1 + 1/mu.  The signal photon is
delayed with respect to its idler partner by a two-sided exponential whose 1/e
half-width is the pair coherence time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .events import ParameterError

# Measured input cross-correlation of the modeled link; the ideal single-mode
# thermal model gives g2 = 1 + 1/mu, so this fixes the default mean pair number.
G2_INPUT_REFERENCE = 23.3
MU_IDEAL_DEFAULT = 1.0 / (G2_INPUT_REFERENCE - 1.0)


@dataclass(frozen=True)
class SourceParams:
    """Pair-generation statistics and spectral structure of the source.

    Attributes:
        mean_pairs_per_window: mean pair number per coincidence window in the
            selected frequency mode (dimensionless).
        tau_pair: pair coherence time in seconds; sets the 1/e half-width of
            the signal-idler delay distribution.
        tau_pump: pump coherence time in seconds.
        n_freq_modes: number of populated cavity frequency modes.
        mode_spacing: separation of adjacent frequency modes in Hz.
        signal_wavelength, idler_wavelength: wavelengths in meters.
        pump_off_delay: time between a heralding detection and the pump
            switching off, in seconds.
        pump_off_duration: how long the pump stays off after the delay.
    """

    mean_pairs_per_window: float = MU_IDEAL_DEFAULT
    tau_pair: float = 120e-9
    tau_pump: float = 1e-6
    n_freq_modes: int = 15
    mode_spacing: float = 261.1e6
    signal_wavelength: float = 606e-9
    idler_wavelength: float = 1436e-9
    pump_off_delay: float = 1e-6
    # The gate has to outlast the longest storage readout (50 us covers an
    # AFC delay of 10 us plus spin storage up to 37.7 us).
    pump_off_duration: float = 50e-6

    def __post_init__(self):
        if self.mean_pairs_per_window < 0:
            raise ParameterError("mean_pairs_per_window must be >= 0")
        if self.n_freq_modes < 1:
            raise ParameterError("n_freq_modes must be >= 1")
        if self.mode_spacing <= 0:
            raise ParameterError("mode_spacing must be > 0")
        if self.tau_pair <= 0 or self.tau_pump <= 0:
            raise ParameterError("coherence times must be > 0")
        if self.tau_pump <= self.tau_pair:
            raise ParameterError("tau_pump must exceed tau_pair")


@dataclass(frozen=True)
class PairEvent:
    """One emitted photon pair.

    freq_mode 0 is the central cavity mode, in resonance with the memory.
    """

    idler_time: float
    signal_time: float
    freq_mode: int = 0
    trial_index: int = 0


def sample_pair_delays(tau_pair: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Signal minus idler emission delays: Laplace with 1/e half-width tau_pair."""
    return rng.laplace(0.0, tau_pair, size=size)


def sample_mode_counts(
    params: SourceParams, n_slots: int, rng: np.random.Generator
) -> np.ndarray:
    """Thermal pair counts, shape (n_slots, n_freq_modes).

    Each frequency mode is an independent Bose-Einstein variable with mean
    mean_pairs_per_window per slot: P(n) = mu^n / (1 + mu)^(n + 1).
    """
    mu = params.mean_pairs_per_window
    if mu == 0.0:
        return np.zeros((n_slots, params.n_freq_modes), dtype=np.int64)
    p = 1.0 / (1.0 + mu)
    return rng.geometric(p, size=(n_slots, params.n_freq_modes)).astype(np.int64) - 1


def sample_pair_emissions(
    params: SourceParams,
    window: tuple[float, float],
    rng: np.random.Generator,
    slot_duration: float = 280e-9,
    trial_index: int = 0,
) -> list[PairEvent]:
    """Sample all pair emissions inside a time window.

    The window is divided into coincidence-window-equivalent slots of length
    ``slot_duration``; each slot draws a thermal pair count per frequency mode.
    Idler times are uniform in their slot and the signal follows at a
    two-sided-exponential delay.

    Args:
        params: source parameters (mean_pairs_per_window may be zero).
        window: (start, stop) in seconds; stop == start yields no pairs.
        rng: seeded numpy Generator; identical seeds give identical output.
        slot_duration: length of one coincidence-window slot in seconds.
        trial_index: propagated into the emitted PairEvent records.

    Returns:
        Pairs sorted by idler time.
    """
    start, stop = window
    duration = stop - start
    if duration < 0:
        raise ParameterError("window stop precedes start")
    if duration == 0:
        return []
    n_slots = max(1, int(round(duration / slot_duration)))
    counts = sample_mode_counts(params, n_slots, rng)

    pairs: list[PairEvent] = []
    slot_len = duration / n_slots
    for slot in range(n_slots):
        slot_start = start + slot * slot_len
        for mode in range(params.n_freq_modes):
            n = int(counts[slot, mode])
            if n == 0:
                continue
            idler_times = slot_start + rng.uniform(0.0, slot_len, size=n)
            delays = sample_pair_delays(params.tau_pair, n, rng)
            for t_i, d in zip(idler_times, delays):
                pairs.append(
                    PairEvent(
                        idler_time=float(t_i),
                        signal_time=float(t_i + d),
                        freq_mode=mode,
                        trial_index=trial_index,
                    )
                )
    pairs.sort(key=lambda p: p.idler_time)
    return pairs


def select_idler_mode(
    event: PairEvent, passband_mode: int, out_of_band: float = 0.0
) -> float:
    """Survival probability of an idler photon at the mode-selecting filter.

    The filter cavity passes exactly one frequency mode.  Off-resonant modes
    survive with the configurable ``out_of_band`` probability (0 = ideal).
    """
    if not 0.0 <= out_of_band <= 1.0:
        raise ParameterError("out_of_band must be in [0, 1]")
    if passband_mode < 0:
        raise ParameterError("passband_mode must be a valid mode index")
    return 1.0 if event.freq_mode == passband_mode else out_of_band


def apply_pump_gate(events: list[PairEvent], params: SourceParams) -> list[PairEvent]:
    """Drop pairs created while the pump is gated off after a heralding click.

    Every surviving idler counts as a heralding detection: it opens a gate
    ``[t + pump_off_delay, t + pump_off_delay + pump_off_duration]`` and any
    later pair whose idler falls inside an open gate is removed.  The
    heralding pair itself is always kept.  Events must be sorted by idler
    time.
    """
    delay = params.pump_off_delay
    duration = params.pump_off_duration
    kept: list[PairEvent] = []
    open_gates: list[float] = []  # herald times whose gates may still apply
    for ev in events:
        t = ev.idler_time
        open_gates = [h for h in open_gates if h + delay + duration >= t]
        if any(h + delay <= t <= h + delay + duration for h in open_gates):
            continue
        kept.append(ev)
        open_gates.append(t)
    return kept
