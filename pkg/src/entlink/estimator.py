"""Statistical analysis of detection-event logs.

Coincidence counting and the normalized cross-correlation, fringe and
Gaussian-decay fits, and the visibility / fidelity / entanglement-witness
arithmetic used to judge the stored state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .events import ParameterError
from .leastsq import FitResult, levenberg_marquardt

LN2 = math.log(2.0)
CHSH_THRESHOLD = 1.0 / math.sqrt(2.0)  # exact, not a rounded 0.707
SEPARABILITY_BOUND = 1.0 / 3.0


class UndefinedEstimateError(RuntimeError):
    """A correlation estimate has a zero denominator (no singles counted)."""


@dataclass(frozen=True)
class G2Estimate:
    """Normalized cross-correlation with Poisson-propagated uncertainty."""

    value: float
    sigma: float
    n_coincidences: int
    n_signal: int
    n_idler: int
    n_trials: int
    window: float


@dataclass(frozen=True)
class CoincidenceHistogram:
    """Histogram of signal minus idler detection-time differences."""

    bin_edges: np.ndarray
    counts: np.ndarray
    analysis_window: tuple[float, float]  # (offset, width) in seconds


@dataclass(frozen=True)
class FringeDataset:
    """Coincidence counts versus analyzer phase for one fixed conjugate setting."""

    phases: np.ndarray
    counts: np.ndarray
    accidental_estimates: np.ndarray
    setting_phase: float = 0.0
    trials_per_point: int = 0
    t_s: float | None = None

    def __post_init__(self):
        if len(self.phases) != len(self.counts):
            raise ParameterError("phases and counts must have equal length")
        if np.any(np.asarray(self.counts) < 0):
            raise ParameterError("counts must be non-negative")


def estimate_g2(log, window: float | None = None) -> G2Estimate:
    """Estimate g2 = p_si / (p_s * p_i) from an event log.

    Each trial carries one idler gate and one signal gate of the analysis
    window width, centered on the nominal arrival times recorded in the log.
    p_i and p_si are per-trial probabilities of an idler click and of a joint
    click.  The unconditional signal probability p_s comes from all source
    trials when the log has none flagged noise-only, and from the noise-only
    trials when it does (storage readout only happens when the control pulses
    fired, so those trials are the unconditional ensemble).

    The uncertainty propagates Poisson errors of the three counts.

    Args:
        log: an EventLog from the engine.
        window: optional analysis-window override in seconds (defaults to the
            log's native coincidence window).
    """
    w = float(window) if window is not None else log.window
    if w <= 0:
        raise ParameterError("window must be > 0")
    if w > 3.0 * log.window:
        raise ParameterError("window override larger than the logged margins")

    n_src = log.n_source_trials
    n_noise = log.n_noise_trials
    half = w / 2.0

    idler_rel = log.idler_times - log.idler_gate_centers
    sig_rel = log.signal_times - log.signal_gate_centers

    idler_in = np.abs(idler_rel) <= half
    sig_in = np.abs(sig_rel) <= half

    idler_trials = np.unique(log.idler_trial_indices[idler_in])
    sig_trials_all = log.signal_trial_indices[sig_in]

    src_sig = np.unique(sig_trials_all[sig_trials_all < n_src])
    n_si = int(np.intersect1d(idler_trials, src_sig, assume_unique=True).size)
    n_i = int(idler_trials.size)

    if n_noise > 0:
        noise_sig = np.unique(sig_trials_all[sig_trials_all >= n_src])
        n_s = int(noise_sig.size)
        n_s_trials = n_noise
    else:
        n_s = int(src_sig.size)
        n_s_trials = n_src

    if n_i == 0 or n_s == 0 or n_src == 0:
        raise UndefinedEstimateError("no singles in one of the channels")

    p_si = n_si / n_src
    p_i = n_i / n_src
    p_s = n_s / n_s_trials
    g2 = p_si / (p_i * p_s)
    sigma = g2 * math.sqrt(1.0 / max(n_si, 1) + 1.0 / n_i + 1.0 / n_s)
    return G2Estimate(
        value=g2,
        sigma=sigma,
        n_coincidences=n_si,
        n_signal=n_s,
        n_idler=n_i,
        n_trials=n_src,
        window=w,
    )


def visibility_from_g2(g2: float) -> float:
    """Photon-statistics-limited fringe visibility, (g2 - 1) / (g2 + 1)."""
    if g2 < 1.0:
        raise ParameterError("g2 must be >= 1")
    return (g2 - 1.0) / (g2 + 1.0)


def fidelity_from_visibility(v: float) -> float:
    """Two-qubit conditional fidelity under white noise, (3 V + 1) / 4."""
    if not 0.0 <= v <= 1.0:
        raise ParameterError("visibility must be in [0, 1]")
    return (3.0 * v + 1.0) / 4.0


@dataclass(frozen=True)
class WitnessReport:
    """Entanglement thresholds for a measured visibility."""

    visibility: float
    sigma: float
    chsh_violating: bool
    chsh_sigmas: float
    separable_excluded_sigmas: float


def entanglement_witness(v: float, sigma_v: float) -> WitnessReport:
    """Compare a visibility against the CHSH and separability thresholds.

    CHSH violation requires v strictly above 1/sqrt(2); distances to both
    thresholds are reported in units of sigma_v.
    """
    if sigma_v <= 0:
        raise ParameterError("sigma_v must be > 0")
    return WitnessReport(
        visibility=v,
        sigma=sigma_v,
        chsh_violating=v > CHSH_THRESHOLD,
        chsh_sigmas=(v - CHSH_THRESHOLD) / sigma_v,
        separable_excluded_sigmas=(v - SEPARABILITY_BOUND) / sigma_v,
    )


def one_over_e_time(gamma: float) -> float:
    """1/e decay time of the Gaussian dephasing envelope, sqrt(2 ln 2)/(pi gamma)."""
    if gamma <= 0:
        raise ParameterError("gamma must be > 0")
    return math.sqrt(2.0 * LN2) / (math.pi * gamma)


# ---------------------------------------------------------------------------
# Fringe fit: C(phi) = A * (1 + V cos(phi + phi0))


def _fringe_model(phi: np.ndarray, p: np.ndarray) -> np.ndarray:
    a, v, phi0 = p
    return a * (1.0 + v * np.cos(phi + phi0))


def _fringe_jacobian(phi: np.ndarray, p: np.ndarray) -> np.ndarray:
    a, v, phi0 = p
    c = np.cos(phi + phi0)
    s = np.sin(phi + phi0)
    return np.column_stack([1.0 + v * c, a * c, -a * v * s])


def fit_fringe(data: FringeDataset, fix_phase: float | None = None) -> FitResult:
    """Weighted least-squares fit of a coincidence fringe.

    Model: C(phi) = A (1 + V cos(phi + phi0)) with Poisson weights.  Requires
    at least four phase points spanning more than pi.  Pass ``fix_phase`` to
    hold phi0 fixed and fit only amplitude and (signed) visibility.
    """
    phi = np.asarray(data.phases, dtype=float)
    y = np.asarray(data.counts, dtype=float)
    if len(phi) < 4:
        raise ParameterError("need at least 4 phase points")
    if np.ptp(phi) <= math.pi:
        raise ParameterError("phase points must span more than pi")
    weights = 1.0 / np.maximum(y, 1.0)

    a0 = max(float(np.mean(y)), 1e-12)
    spread = float(np.max(y) - np.min(y)) / max(float(np.max(y) + np.min(y)), 1e-12)
    v0 = min(max(spread, 1e-3), 0.999)
    if fix_phase is None:
        cphi = float(np.sum((y - a0) * np.cos(phi)))
        sphi = float(np.sum((y - a0) * np.sin(phi)))
        phi0 = math.atan2(-sphi, cphi)
        result = levenberg_marquardt(
            _fringe_model, _fringe_jacobian, phi, y, weights,
            np.array([a0, v0, phi0]), labels=("amplitude", "visibility", "phase"),
        )
        # Canonical sign: report V >= 0 by absorbing the flip into the phase.
        a, v, p0 = result.parameters
        if v < 0:
            result = FitResult(
                parameters=np.array([a, -v, math.remainder(p0 + math.pi, 2 * math.pi)]),
                uncertainties=result.uncertainties,
                reduced_chi_square=result.reduced_chi_square,
                converged=result.converged,
                n_iterations=result.n_iterations,
                labels=result.labels,
            )
        return result

    def model(x, p):
        return _fringe_model(x, np.array([p[0], p[1], fix_phase]))

    def jac(x, p):
        full = _fringe_jacobian(x, np.array([p[0], p[1], fix_phase]))
        return full[:, :2]

    return levenberg_marquardt(
        model, jac, phi, y, weights, np.array([a0, v0]),
        labels=("amplitude", "visibility"),
    )


# ---------------------------------------------------------------------------
# Gaussian decay fit: a * exp(-(t gamma pi)^2 / (2 ln 2)), optionally + 1


class DecayModel:
    EFFICIENCY = "efficiency"
    G2_MINUS_ONE = "g2-minus-one"


def _decay_envelope(t: np.ndarray, a: float, gamma: float) -> np.ndarray:
    x = t * gamma * math.pi
    return a * np.exp(-(x * x) / (2.0 * LN2))


def fit_gaussian_decay(
    points: list[tuple[float, float, float]],
    model: str = DecayModel.EFFICIENCY,
) -> FitResult:
    """Weighted fit of a Gaussian dephasing decay versus storage time.

    Model EFFICIENCY: y = a exp(-(t gamma pi)^2 / (2 ln 2)); G2_MINUS_ONE adds
    a baseline of 1.  Initialization follows the standard recipe: amplitude
    from the maximum value, gamma from the log-ratio of the first and last
    points.

    Args:
        points: (t_s, value, sigma) triples with sigma > 0.

    Returns:
        FitResult with labels ("amplitude", "gamma").
    """
    if len(points) < 3:
        raise ParameterError("need at least 3 points")
    t = np.array([p[0] for p in points], dtype=float)
    y = np.array([p[1] for p in points], dtype=float)
    s = np.array([p[2] for p in points], dtype=float)
    if np.unique(t).size != t.size:
        raise ParameterError("storage times must be distinct")
    if np.any(s <= 0):
        raise ParameterError("sigmas must be > 0")
    weights = 1.0 / (s * s)

    baseline = 1.0 if model == DecayModel.G2_MINUS_ONE else 0.0
    if model not in (DecayModel.EFFICIENCY, DecayModel.G2_MINUS_ONE):
        raise ParameterError(f"unknown decay model {model!r}")

    yb = y - baseline
    order = np.argsort(t)
    a0 = max(float(np.max(yb)), 1e-12)
    y_first, y_last = yb[order[0]], yb[order[-1]]
    t_first, t_last = t[order[0]], t[order[-1]]
    if y_first > 0 and y_last > 0 and y_first > y_last:
        ratio = math.log(y_first / y_last)
        gamma0 = math.sqrt(2.0 * LN2 * ratio / (t_last**2 - t_first**2)) / math.pi
    else:
        gamma0 = 0.5 / (math.pi * max(t_last, 1e-12))

    def model_fn(x, p):
        return baseline + _decay_envelope(x, p[0], p[1])

    def jac_fn(x, p):
        a, gamma = p
        env = _decay_envelope(x, 1.0, gamma)
        d_gamma = -a * env * (x * x * gamma * math.pi * math.pi) / LN2
        return np.column_stack([env, d_gamma])

    return levenberg_marquardt(
        model_fn, jac_fn, t, y, weights, np.array([a0, gamma0]),
        labels=("amplitude", "gamma"),
    )


def build_histogram(
    log,
    bin_width: float,
    hist_range: tuple[float, float],
    analysis_window: tuple[float, float] | None = None,
) -> CoincidenceHistogram:
    """Histogram signal minus idler time differences, paired within each trial.

    Differences are taken relative to the nominal gate offset so the central
    peak of every storage mode sits at zero.
    """
    if bin_width <= 0:
        raise ParameterError("bin_width must be > 0")
    lo, hi = hist_range
    edges = np.arange(lo, hi + bin_width / 2.0, bin_width)
    window = analysis_window if analysis_window is not None else (0.0, log.window)

    if log.idler_times.size == 0 or log.signal_times.size == 0:
        return CoincidenceHistogram(edges, np.zeros(edges.size - 1, dtype=np.int64), window)

    # Pair every signal with every idler of the same trial.  Events per trial
    # are few, so expand via sorted-run boundaries.
    diffs: list[np.ndarray] = []
    idler_by_trial: dict[int, np.ndarray] = {}
    order = np.argsort(log.idler_trial_indices, kind="stable")
    it = log.idler_trial_indices[order]
    irel = (log.idler_times - log.idler_gate_centers)[order]
    starts = np.flatnonzero(np.r_[True, it[1:] != it[:-1]])
    for k, s0 in enumerate(starts):
        s1 = starts[k + 1] if k + 1 < starts.size else it.size
        idler_by_trial[int(it[s0])] = irel[s0:s1]
    srel = log.signal_times - log.signal_gate_centers
    for rel, trial in zip(srel, log.signal_trial_indices):
        partners = idler_by_trial.get(int(trial))
        if partners is not None:
            diffs.append(rel - partners)
    if diffs:
        all_diffs = np.concatenate(diffs)
        counts, _ = np.histogram(all_diffs, bins=edges)
    else:
        counts = np.zeros(edges.size - 1, dtype=np.int64)
    return CoincidenceHistogram(edges, counts.astype(np.int64), window)


def fit_delay_constant(log) -> float:
    """Max-likelihood two-sided-exponential width of the coincidence peak.

    For a Laplace-shaped peak the decay constant equals the mean absolute
    signal-idler delay; background is negligible next to the peak for the
    source configurations this is used on.
    """
    hist = build_histogram(log, 4e-9, (-1.2e-6, 1.2e-6))
    centers = 0.5 * (hist.bin_edges[:-1] + hist.bin_edges[1:])
    total = hist.counts.sum()
    if total == 0:
        raise UndefinedEstimateError("no coincidences to fit")
    return float(np.sum(np.abs(centers) * hist.counts) / total)
