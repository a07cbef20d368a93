"""Closed-form expectations for the windowed correlation estimator.

The engine partitions time into trials of one coincidence window each.  With
a thermal pair number n per window (Bose-Einstein, mean mu), unit idler
efficiency, a per-pair signal acceptance a, and an independent flat background
with mean lam counts per window, every estimate the engine produces has an
exact expectation.  These forms are used to calibrate the presets and to
verify the Monte Carlo against analytics.

Notation: P0 = 1/(1+mu) is the empty-window probability and the conditional
generating function E[z^n | n >= 1] equals z / (1 + mu (1 - z)).
"""

from __future__ import annotations

import math


def gate_capture_fraction(window: float, tau_pair: float) -> float:
    """Probability that the partner photon falls in the same gate as its idler.

    Idler uniform in a gate of width ``window``; the signal is displaced by a
    two-sided exponential of 1/e half-width ``tau_pair``.
    """
    if window <= 0 or tau_pair <= 0:
        raise ValueError("window and tau_pair must be > 0")
    r = tau_pair / window
    return 1.0 - r * (1.0 - math.exp(-window / tau_pair))


def _check(mu: float, a: float, lam: float) -> None:
    if mu < 0 or not 0.0 <= a <= 1.0 or lam < 0:
        raise ValueError("require mu >= 0, a in [0, 1], lam >= 0")


def g2_input(mu: float, a: float, lam: float) -> float:
    """Expected g2 for direct (transparency) correlation measurements.

    Background is present in every trial since the pump-off gate only opens
    after the heralding window.  With lam = 0 this reduces to 1 + 1/mu for
    any signal acceptance: pure signal loss cancels in the estimator.
    """
    _check(mu, a, lam)
    p0 = 1.0 / (1.0 + mu)
    p_i = mu / (1.0 + mu)
    x = math.exp(-lam)
    g_a = 1.0 / (1.0 + mu * a)
    p_s = 1.0 - x * g_a
    p_si = p_s - p0 * (1.0 - x)
    return p_si / (p_i * p_s)


def g2_afc_echo(mu: float, a: float, lam: float) -> float:
    """Expected g2 at the comb-echo gate.

    Heralded trials see no background there (the pump is off by echo time);
    unheralded trials carry the storage-filtered background lam.
    """
    _check(mu, a, lam)
    p0 = 1.0 / (1.0 + mu)
    p_i = mu / (1.0 + mu)
    p_si = mu * a / (1.0 + mu * a)
    p_s = p_si + p0 * (1.0 - math.exp(-lam))
    return p_si / (p_i * p_s)


def g2_spin_wave(mu: float, a: float, lam: float) -> float:
    """Expected g2 for semiconditional spin-wave readout.

    Readout happens only in heralded trials; the unconditional signal
    probability is measured on noise-only trials whose level is lam.
    g2 = P(signal | heralded) / P(signal | noise trial).
    """
    _check(mu, a, lam)
    if lam == 0:
        raise ValueError("spin-wave estimate undefined without a noise floor")
    x = math.exp(-lam)
    p_sig_heralded = 1.0 - x * (1.0 - a) / (1.0 + mu * a)
    return p_sig_heralded / (1.0 - x)


def fringe_visibility(v_an: float, a: float, mu: float, lam: float) -> float:
    """Expected raw fringe visibility of the central coincidence bin.

    Per heralded trial the partner registers at rate (a/4)(1 + v_an cos), the
    thermal extra pairs add an incoherent mu * a / 4, and flat noise of mean
    lam per window contributes lam / 2 after analyzer routing.
    """
    _check(mu, a, lam)
    if not 0.0 <= v_an <= 1.0:
        raise ValueError("v_an must be in [0, 1]")
    denom = a * (1.0 + mu) + 2.0 * lam
    if denom == 0:
        return 0.0
    return v_an * a / denom


def fringe_central_rate(a: float, mu: float, lam: float, v_an: float, phase: float) -> float:
    """Expected central-bin coincidences per heralded trial at a given phase."""
    return (a / 4.0) * (1.0 + v_an * math.cos(phase)) + mu * a / 4.0 + lam / 2.0


# ---------------------------------------------------------------------------
# Calibration inverses (all linear, so they are exact)


def solve_spin_wave_acceptance(mu: float, lam: float, g2_target: float) -> float:
    """Per-pair acceptance a that makes g2_spin_wave(mu, a, lam) hit the target."""
    if g2_target <= 1:
        raise ValueError("g2_target must exceed 1")
    q = 1.0 - math.exp(-lam)
    k = (1.0 - g2_target * q) * math.exp(lam)
    if not 0.0 < k < 1.0:
        raise ValueError("target not reachable with this noise level")
    return (1.0 - k) / (1.0 + k * mu)


def solve_input_background(mu: float, a: float, g2_target: float) -> float:
    """Background level lam that brings the direct g2 down to the target.

    Requires g2_target <= 1 + 1/mu (the zero-background ceiling).
    """
    p0 = 1.0 / (1.0 + mu)
    p_i = mu / (1.0 + mu)
    g_a = 1.0 / (1.0 + mu * a)
    rest = 1.0 - g2_target * p_i
    x = (p0 - rest) / (p0 - g_a * rest)
    if not 0.0 < x <= 1.0:
        raise ValueError("target not reachable: needs g2 <= 1 + 1/mu")
    return -math.log(x)


def solve_echo_background(mu: float, a: float, g2_target: float) -> float:
    """Background level at the echo gate that sets the comb-echo g2 target."""
    p0 = 1.0 / (1.0 + mu)
    p_i = mu / (1.0 + mu)
    p_si = mu * a / (1.0 + mu * a)
    q = p_si * (1.0 - g2_target * p_i) / (g2_target * p_i * p0)
    if not 0.0 <= q < 1.0:
        raise ValueError("target not reachable: needs g2 <= 1 + 1/mu")
    return -math.log(1.0 - q)


def solve_analyzer_visibility(v_target: float, a: float, mu: float, lam: float) -> float:
    """Analyzer visibility that produces a raw fringe visibility v_target."""
    if a <= 0:
        raise ValueError("acceptance must be > 0")
    v_an = v_target * (a * (1.0 + mu) + 2.0 * lam) / a
    if not 0.0 < v_an <= 1.0:
        raise ValueError("required analyzer visibility outside (0, 1]")
    return v_an
