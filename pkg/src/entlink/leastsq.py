"""Small Levenberg-Marquardt solver for the two fit models used in analysis.

Damped normal equations with analytic Jacobians.  Convergence when the
weighted gradient norm drops below 1e-10 or after 200 iterations, whichever
comes first; a fit that stops on the iteration cap is flagged unconverged and
its parameters must not be trusted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

GRADIENT_TOL = 1e-10
MAX_ITERATIONS = 200


class FitConvergenceError(RuntimeError):
    """Raised by callers that require a converged fit."""


@dataclass(frozen=True)
class FitResult:
    """Parameter estimates with 1-sigma uncertainties from the covariance.

    ``converged`` False means the solver hit its iteration cap; parameters
    are reported for diagnostics only.
    """

    parameters: np.ndarray
    uncertainties: np.ndarray
    reduced_chi_square: float
    converged: bool
    n_iterations: int
    labels: tuple[str, ...] = field(default=())

    def __getitem__(self, name: str) -> float:
        return float(self.parameters[self.labels.index(name)])

    def sigma(self, name: str) -> float:
        return float(self.uncertainties[self.labels.index(name)])


def levenberg_marquardt(
    model: Callable[[np.ndarray, np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    p0: np.ndarray,
    labels: tuple[str, ...] = (),
) -> FitResult:
    """Minimize sum(w * (y - model(x, p))^2) starting from p0.

    Args:
        model: model(x, p) -> values, vectorized over x.
        jacobian: jacobian(x, p) -> (len(x), len(p)) array of d model / d p.
        weights: per-point weights, 1/sigma^2.

    Returns:
        FitResult; covariance is (J^T W J)^-1 at the solution.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(weights, dtype=float)
    p = np.asarray(p0, dtype=float).copy()
    if x.shape != y.shape or x.shape != w.shape:
        raise ValueError("x, y and weights must have matching shapes")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")

    def chi2(params: np.ndarray) -> float:
        r = y - model(x, params)
        return float(np.sum(w * r * r))

    lam = 1e-3
    current = chi2(p)
    converged = False
    iteration = 0
    for iteration in range(1, MAX_ITERATIONS + 1):
        r = y - model(x, p)
        jac = jacobian(x, p)
        grad = jac.T @ (w * r)
        if np.max(np.abs(grad)) < GRADIENT_TOL * max(1.0, current):
            converged = True
            break
        hess = jac.T @ (w[:, None] * jac)
        stepped = False
        for _ in range(50):
            damped = hess + lam * np.diag(np.maximum(np.diag(hess), 1e-30))
            try:
                step = np.linalg.solve(damped, grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = p + step
            trial_chi2 = chi2(trial)
            if trial_chi2 <= current:
                p = trial
                current = trial_chi2
                lam = max(lam * 0.3, 1e-12)
                stepped = True
                break
            lam *= 10.0
        if not stepped:
            # No downhill step found at any damping: local minimum.
            converged = True
            break

    jac = jacobian(x, p)
    hess = jac.T @ (np.asarray(weights)[:, None] * jac)
    try:
        cov = np.linalg.inv(hess)
        sigmas = np.sqrt(np.maximum(np.diag(cov), 0.0))
    except np.linalg.LinAlgError:
        sigmas = np.full(p.shape, np.nan)
        converged = False
    dof = max(len(x) - len(p), 1)
    return FitResult(
        parameters=p,
        uncertainties=sigmas,
        reduced_chi_square=current / dof,
        converged=converged,
        n_iterations=iteration,
        labels=labels,
    )
