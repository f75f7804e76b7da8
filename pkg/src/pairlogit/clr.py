"""Conditional likelihood for matched pairs and its Newton-Raphson MLE.

With delta_x the treated-minus-control covariate difference and z the
indicator that the treated member is the case, each discordant pair
contributes a Bernoulli term with success probability
sigmoid(beta_w + delta_x . beta). Concordant pairs contribute nothing.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .data import DiscordantDiffs
from .errors import DimensionMismatch, NonFiniteState, SeparationDetected

NEWTON_MAX_ITER = 50
NEWTON_TOL = 1e-8
SEPARATION_LIMIT = 15.0


@dataclass(frozen=True)
class Coefficients:
    """Treatment effect plus nuisance coefficients on covariate differences."""

    beta_w: float
    beta: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "beta", np.ascontiguousarray(np.asarray(self.beta, dtype=np.float64))
        )

    def as_vector(self) -> np.ndarray:
        """Stacked (beta_w, beta) with the treatment coordinate first."""
        return np.concatenate([[self.beta_w], self.beta])


@dataclass(frozen=True)
class ClrMleFit:
    estimate: Coefficients
    covariance: np.ndarray
    converged: bool
    n_iter: int
    loglik: float
    wald_p: float


def _check(coefficients: Coefficients, diffs: DiscordantDiffs) -> None:
    if coefficients.beta.shape[0] != diffs.n_covariates:
        raise DimensionMismatch(
            f"beta has {coefficients.beta.shape[0]} entries for "
            f"{diffs.n_covariates} covariates"
        )
    if not (np.isfinite(coefficients.beta_w) and np.isfinite(coefficients.beta).all()):
        raise NonFiniteState("coefficients contain non-finite values")


def clr_loglik(coefficients: Coefficients, diffs: DiscordantDiffs) -> float:
    _check(coefficients, diffs)
    z = diffs.case_is_treated.astype(np.float64)
    return float(
        kernels.clr_loglik(coefficients.beta_w, coefficients.beta, diffs.delta_x, z)
    )


def clr_grad(coefficients: Coefficients, diffs: DiscordantDiffs) -> np.ndarray:
    """Score vector, treatment coordinate first."""
    _check(coefficients, diffs)
    z = diffs.case_is_treated.astype(np.float64)
    grad = np.zeros(diffs.n_covariates + 1)
    kernels.clr_loglik_grad(
        coefficients.beta_w, coefficients.beta, diffs.delta_x, z, grad
    )
    return grad


def clr_neg_hessian(coefficients: Coefficients, diffs: DiscordantDiffs) -> np.ndarray:
    """Negative Hessian of the log likelihood (positive semidefinite)."""
    _check(coefficients, diffs)
    z = diffs.case_is_treated.astype(np.float64)
    d = diffs.n_covariates + 1
    out = np.zeros((d, d))
    kernels.clr_neg_hessian(
        coefficients.beta_w, coefficients.beta, diffs.delta_x, z, out
    )
    return out


def clr_fit_mle(diffs: DiscordantDiffs) -> ClrMleFit:
    """Newton-Raphson fit of the conditional likelihood.

    Converged when the score's max norm drops below 1e-8; a coefficient
    passing 15 in absolute value during iteration is treated as separation.
    """
    p = diffs.n_covariates
    z = diffs.case_is_treated.astype(np.float64)
    dx = diffs.delta_x
    d = p + 1
    theta = np.zeros(d)
    negh = np.zeros((d, d))
    converged = False
    n_iter = 0
    for n_iter in range(1, NEWTON_MAX_ITER + 1):
        grad = np.zeros(d)
        kernels.clr_loglik_grad(theta[0], theta[1:], dx, z, grad)
        if np.abs(grad).max() < NEWTON_TOL:
            converged = True
            break
        kernels.clr_neg_hessian(theta[0], theta[1:], dx, z, negh)
        try:
            step = np.linalg.solve(negh, grad)
        except np.linalg.LinAlgError:
            raise SeparationDetected(
                "conditional information matrix is singular"
            ) from None
        theta = theta + step
        if np.abs(theta).max() > SEPARATION_LIMIT:
            raise SeparationDetected(
                f"coefficient magnitude exceeded {SEPARATION_LIMIT} during Newton "
                "iteration"
            )

    kernels.clr_neg_hessian(theta[0], theta[1:], dx, z, negh)
    try:
        covariance = np.linalg.inv(negh)
    except np.linalg.LinAlgError:
        raise SeparationDetected(
            "conditional information matrix is singular at the optimum"
        ) from None
    loglik = float(kernels.clr_loglik(theta[0], theta[1:], dx, z))
    se = math.sqrt(max(covariance[0, 0], 0.0))
    if se > 0.0:
        zstat = theta[0] / se
        wald_p = math.erfc(abs(zstat) / math.sqrt(2.0))
    else:
        wald_p = float("nan")
    return ClrMleFit(
        estimate=Coefficients(beta_w=float(theta[0]), beta=theta[1:].copy()),
        covariance=covariance,
        converged=converged,
        n_iter=n_iter,
        loglik=loglik,
        wald_p=wald_p,
    )
