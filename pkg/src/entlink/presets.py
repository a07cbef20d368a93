"""Calibrated experiment presets reproducing the published link measurements.

The measured observables pin down the free parameters of the window model
exactly (all inversions are linear):

  * the spin-wave correlation at the reference storage time fixes the product
    of gate capture and chain transmission,
  * the direct (transparency) correlation fixes the broadband background,
  * the comb-echo correlation fixes how much of that background survives the
    storage gate,
  * the fringe visibilities fix the two analyzer-contrast factors.

The mean pair number per window is split between true pairs and background;
the published data do not constrain the split, so the pair component is a
declared model choice (MU_ENGINE) and the background absorbs the rest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .analyzer import AnalyzerParams, TransmitOrStore, TwoCombAfc
from .engine import Experiment, ExperimentConfig
from .memory import (
    FilterParams,
    MemoryParams,
    SPIN_WAVE_REFERENCE_TS,
    control_noise_level,
    spin_wave_efficiency,
)
from .predict import (
    gate_capture_fraction,
    solve_analyzer_visibility,
    solve_echo_background,
    solve_input_background,
    solve_spin_wave_acceptance,
)
from .source import SourceParams

DEFAULT_SEED = 42

# Published reference measurements of the modeled link: value, one sigma.
REFERENCE = {
    "g2_input": (23.3, 0.2),
    "g2_afc": (91.0, 4.0),
    "g2_spin_wave": (9.8, 0.6),
    "eta_afc": (0.197, 0.005),
    "eta_spin_wave": (0.062, 0.003),
    "visibility_afc_1": (0.90, 0.03),
    "visibility_afc_2": (0.88, 0.03),
    "visibility_sw_1": (0.71, 0.03),
    "visibility_sw_2": (0.68, 0.05),
    "fidelity_afc": (0.92, 0.02),
    "fidelity_sw": (0.77, 0.02),
    "gamma_inhom_khz": (16.1, 0.7),
    "gamma_g2_khz": (14.8, 0.9),
    "mode_capacity": (17, 0.0),
}

# True-pair component of the effective mean pair number per window.  Bounded
# above by 1/(g2_afc - 1); the rest of the direct-measurement accidentals is
# carried by broadband background that the storage gate rejects.
MU_ENGINE = 0.004

# Raw fringe visibility targets: centered between the two conjugate-setting
# measurements, with the spin-wave value held slightly below their mean so the
# preset sits safely on the non-violating side of the CHSH threshold.
VISIBILITY_TARGET_AFC = 0.89
VISIBILITY_TARGET_SW = 0.685

SWEEP_TS = (6.9e-6, 15e-6, 25e-6, 37.7e-6)


@dataclass(frozen=True)
class Calibration:
    """Engine parameters derived from the reference measurements."""

    mu: float
    chain_transmission: float
    gate_capture: float
    background_per_window: float
    background_acceptance: float
    analyzer_visibility_afc: float
    analyzer_visibility_sw: float


def calibrate(
    mu: float = MU_ENGINE,
    memory: MemoryParams | None = None,
    source: SourceParams | None = None,
) -> Calibration:
    """Solve the preset parameters from the reference targets."""
    memory = memory or MemoryParams()
    source = source or SourceParams()
    w = memory.coincidence_window
    f_cap = gate_capture_fraction(w, source.tau_pair)

    lam_cp = control_noise_level(memory, SPIN_WAVE_REFERENCE_TS)
    eta_sw_ref = spin_wave_efficiency(memory, SPIN_WAVE_REFERENCE_TS)
    a_sw = solve_spin_wave_acceptance(mu, lam_cp, REFERENCE["g2_spin_wave"][0])
    chain = a_sw / (f_cap * eta_sw_ref)

    a_in = f_cap * chain
    lam_in = solve_input_background(mu, a_in, REFERENCE["g2_input"][0])

    a_afc = a_in * memory.eta_afc
    lam_afc = solve_echo_background(mu, a_afc, REFERENCE["g2_afc"][0])
    alpha = lam_afc / lam_in

    v_an_afc = solve_analyzer_visibility(VISIBILITY_TARGET_AFC, a_afc, mu, 0.0)
    v_an_sw = solve_analyzer_visibility(VISIBILITY_TARGET_SW, a_sw, mu, lam_cp)

    return Calibration(
        mu=mu,
        chain_transmission=chain,
        gate_capture=f_cap,
        background_per_window=lam_in,
        background_acceptance=alpha,
        analyzer_visibility_afc=v_an_afc,
        analyzer_visibility_sw=v_an_sw,
    )


def _base_config(cal: Calibration, seed: int) -> ExperimentConfig:
    source = SourceParams(mean_pairs_per_window=cal.mu)
    memory = MemoryParams(background_acceptance=cal.background_acceptance)
    # The chain transmission is a single lumped passive; carried by the etalon
    # field with the bandpass at unity.
    filt = FilterParams(etalon_transmission=cal.chain_transmission)
    return ExperimentConfig(
        source=source,
        memory=memory,
        filter=filt,
        seed=seed,
        signal_background_per_window=cal.background_per_window,
    )


PRESET_NAMES = (
    "input-g2",
    "afc-g2",
    "sw-g2",
    "afc-fringe",
    "sw-fringe",
    "ts-sweep",
    "paper-table",
)


def build_preset(name: str, seed: int = DEFAULT_SEED) -> ExperimentConfig:
    """Materialize a fully specified configuration for a named preset.

    The paper-table preset is handled by the reproduction driver, which runs
    the other presets in sequence; requesting it here raises.
    """
    cal = calibrate()
    base = _base_config(cal, seed)
    if name == "input-g2":
        return replace(base, experiment=Experiment.INPUT_G2, n_trials=4_000_000)
    if name == "afc-g2":
        return replace(base, experiment=Experiment.AFC_G2, n_trials=8_000_000)
    if name == "sw-g2":
        return replace(
            base,
            experiment=Experiment.SPIN_WAVE_G2,
            n_trials=8_000_000,
            t_s=SPIN_WAVE_REFERENCE_TS,
        )
    if name == "afc-fringe":
        analyzer = AnalyzerParams(
            analyzer_visibility=cal.analyzer_visibility_afc,
            signal_analyzer=TwoCombAfc(),
        )
        return replace(
            base,
            experiment=Experiment.AFC_FRINGE,
            analyzer=analyzer,
            n_trials=100_000,
            phase_list=_default_phases(),
        )
    if name == "sw-fringe":
        analyzer = AnalyzerParams(
            analyzer_visibility=cal.analyzer_visibility_sw,
            signal_analyzer=TransmitOrStore(),
        )
        return replace(
            base,
            experiment=Experiment.SPIN_WAVE_FRINGE,
            analyzer=analyzer,
            n_trials=900_000,
            t_s=SPIN_WAVE_REFERENCE_TS,
            phase_list=_default_phases(),
        )
    if name == "ts-sweep":
        analyzer = AnalyzerParams(
            analyzer_visibility=cal.analyzer_visibility_sw,
            signal_analyzer=TransmitOrStore(),
        )
        return replace(
            base,
            experiment=Experiment.TS_SWEEP,
            analyzer=analyzer,
            t_s_list=SWEEP_TS,
            n_trials=8_000_000,
            sweep_trials=(10_000_000, 13_000_000, 19_000_000, 42_000_000),
            sweep_fringe_trials=(900_000, 950_000, 1_400_000, 2_300_000),
            phase_list=_default_phases(),
        )
    raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")


def _default_phases() -> tuple[float, ...]:
    return tuple(float(p) for p in np.linspace(0.0, 2.0 * math.pi, 16, endpoint=False))
