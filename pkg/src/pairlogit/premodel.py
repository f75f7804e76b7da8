"""Pre-models fit on concordant pairs.

The concordant pairs never enter the conditional likelihood, but an ordinary
logistic regression (or a paired GEE with exchangeable working correlation)
fit to their rows still locates the nuisance coefficients. The coefficient
vector and covariance from that fit, intercept dropped, seed the prior over
the nuisance block.
"""

from dataclasses import dataclass, field

import numpy as np

from .data import PairedDataset, PairPartition, concordant_rows
from .errors import (
    InsufficientConcordant,
    RankDeficient,
    SeparationDetected,
    SingularSandwich,
)

IRLS_MAX_ITER = 100
IRLS_TOL = 1e-8
SEPARATION_LIMIT = 15.0
RIDGE_LAMBDA = 1e-4
JITTER_BASE = 1e-8
JITTER_ESCALATIONS = 3


def _sigmoid(eta):
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _solve_spd(mat, rhs):
    """Cholesky solve with escalating diagonal jitter; RankDeficient if the
    matrix stays indefinite after the final escalation."""
    mat = 0.5 * (mat + mat.T)
    base = JITTER_BASE * max(float(np.mean(np.diag(mat))), 1e-12)
    jitter = 0.0
    for attempt in range(JITTER_ESCALATIONS + 2):
        try:
            chol = np.linalg.cholesky(mat + jitter * np.eye(mat.shape[0]))
        except np.linalg.LinAlgError:
            jitter = base * (10.0 ** attempt)
            continue
        y = np.linalg.solve(chol, rhs)
        return np.linalg.solve(chol.T, y)
    raise RankDeficient("matrix not positive definite after diagonal jitter")


def _spd_inverse(mat):
    return _solve_spd(mat, np.eye(mat.shape[0]))


def make_spd(mat: np.ndarray) -> np.ndarray:
    """Symmetrize and jitter a covariance until it admits a Cholesky factor."""
    mat = 0.5 * (mat + mat.T)
    base = JITTER_BASE * max(float(np.mean(np.diag(mat))), 1e-12)
    jitter = 0.0
    for attempt in range(JITTER_ESCALATIONS + 2):
        candidate = mat + jitter * np.eye(mat.shape[0])
        try:
            np.linalg.cholesky(candidate)
            return candidate
        except np.linalg.LinAlgError:
            jitter = base * (10.0 ** attempt)
    raise RankDeficient("covariance not positive definite after diagonal jitter")


@dataclass(frozen=True)
class LrFit:
    coefficients: np.ndarray
    covariance: np.ndarray
    converged: bool
    n_iter: int
    has_intercept: bool


@dataclass(frozen=True)
class GeeFit:
    coefficients: np.ndarray
    covariance: np.ndarray
    rho_hat: float
    phi_hat: float
    converged: bool
    n_iter: int


@dataclass(frozen=True)
class PremodelFit:
    """Prior inputs extracted from a concordant-pair fit: coefficients and
    covariance with the intercept removed."""

    b_c: np.ndarray
    sigma_c: np.ndarray
    method: str
    fallback_used: bool
    n_pairs_used: int
    detail: object = field(repr=False, default=None)


def irls_fit(
    X: np.ndarray,
    y: np.ndarray,
    add_intercept: bool = True,
    *,
    ridge: float = 0.0,
    max_iter: int = IRLS_MAX_ITER,
    tol: float = IRLS_TOL,
) -> LrFit:
    """Logistic regression by iteratively reweighted least squares.

    With ridge > 0 a quadratic penalty (intercept excluded) keeps the
    optimum finite, so the separation guard is disabled on that path.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    n = y.shape[0]
    if X.shape[0] != n:
        X = X.reshape(n, -1)
    design = np.column_stack([np.ones(n), X]) if add_intercept else X
    q = design.shape[1]
    penalty = np.zeros(q)
    if ridge > 0.0:
        penalty[:] = ridge
        if add_intercept:
            penalty[0] = 0.0

    coef = np.zeros(q)
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        mu = _sigmoid(design @ coef)
        score = design.T @ (y - mu) - penalty * coef
        if np.abs(score).max() < tol:
            converged = True
            break
        w = mu * (1.0 - mu)
        hess = design.T @ (design * w[:, None]) + np.diag(penalty)
        step = _solve_spd(hess, score)
        coef = coef + step
        if ridge == 0.0 and np.abs(coef).max() > SEPARATION_LIMIT:
            raise SeparationDetected(
                f"coefficient magnitude exceeded {SEPARATION_LIMIT} during IRLS"
            )

    mu = _sigmoid(design @ coef)
    w = mu * (1.0 - mu)
    hess = design.T @ (design * w[:, None]) + np.diag(penalty)
    covariance = _spd_inverse(hess)
    return LrFit(
        coefficients=coef,
        covariance=covariance,
        converged=converged,
        n_iter=n_iter,
        has_intercept=add_intercept,
    )


def gee_fit_pairs(
    X: np.ndarray,
    y: np.ndarray,
    *,
    fix_rho: float | None = None,
    max_iter: int = IRLS_MAX_ITER,
    tol: float = IRLS_TOL,
) -> GeeFit:
    """Paired logistic GEE with an exchangeable working correlation.

    Rows 2i and 2i+1 form cluster i. An intercept column is prepended.
    The correlation is re-estimated from Pearson residuals each sweep via
    the moment estimator, then clamped inside (-1, 1); the reported
    covariance is the robust sandwich.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    n = y.shape[0]
    if X.shape[0] != n:
        X = X.reshape(n, -1)
    if n % 2 != 0:
        raise ValueError("paired GEE needs an even number of rows")
    n_pairs = n // 2
    if n_pairs < 2:
        raise ValueError("paired GEE needs at least two clusters")
    design = np.column_stack([np.ones(n), X])
    q = design.shape[1]

    coef = np.zeros(q)
    rho = 0.0 if fix_rho is None else float(fix_rho)
    phi = 1.0
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        mu = _sigmoid(design @ coef)
        a = np.clip(mu * (1.0 - mu), 1e-10, None)
        sa = np.sqrt(a)
        resid = y - mu

        # per-cluster D^T V^{-1} applied without forming 2x2 blocks:
        # V^{-1/2} pair rotation with R(rho)^{-1} = [[1,-rho],[-rho,1]]/(1-rho^2)
        denom = 1.0 - rho * rho
        r1 = resid[0::2] / sa[0::2]
        r2 = resid[1::2] / sa[1::2]
        u1 = (r1 - rho * r2) / denom
        u2 = (r2 - rho * r1) / denom
        # weighted rows: row_k scaled by sqrt(a_k), i.e. D = A X~, V^{-1} folded in
        d1 = design[0::2] * sa[0::2, None]
        d2 = design[1::2] * sa[1::2, None]
        score = d1.T @ u1 + d2.T @ u2
        k11 = d1.T @ d1 + d2.T @ d2
        k12 = d1.T @ d2
        kmat = (k11 - rho * (k12 + k12.T)) / denom

        step = _solve_spd(kmat, score)
        coef = coef + step
        if np.abs(coef).max() > SEPARATION_LIMIT:
            raise SeparationDetected(
                f"coefficient magnitude exceeded {SEPARATION_LIMIT} during GEE sweep"
            )

        if fix_rho is None:
            mu = _sigmoid(design @ coef)
            a = np.clip(mu * (1.0 - mu), 1e-10, None)
            e = (y - mu) / np.sqrt(a)
            phi = float(np.mean(e * e))
            cross = float(np.sum(e[0::2] * e[1::2]))
            denom_pairs = max(n_pairs - q, 1)
            rho = cross / (denom_pairs * phi)
            rho = float(np.clip(rho, -0.99, 0.99))

        if np.abs(step).max() < tol:
            converged = True
            break

    # robust sandwich at the final state; the dispersion cancels
    mu = _sigmoid(design @ coef)
    a = np.clip(mu * (1.0 - mu), 1e-10, None)
    sa = np.sqrt(a)
    resid = y - mu
    denom = 1.0 - rho * rho
    r1 = resid[0::2] / sa[0::2]
    r2 = resid[1::2] / sa[1::2]
    u1 = (r1 - rho * r2) / denom
    u2 = (r2 - rho * r1) / denom
    d1 = design[0::2] * sa[0::2, None]
    d2 = design[1::2] * sa[1::2, None]
    k12 = d1.T @ d2
    kmat = (d1.T @ d1 + d2.T @ d2 - rho * (k12 + k12.T)) / denom
    contrib = d1 * u1[:, None] + d2 * u2[:, None]
    meat = contrib.T @ contrib
    try:
        bread = _spd_inverse(kmat)
    except RankDeficient:
        raise SingularSandwich("bread matrix of the sandwich is singular") from None
    covariance = bread @ meat @ bread
    return GeeFit(
        coefficients=coef,
        covariance=covariance,
        rho_hat=rho,
        phi_hat=phi,
        converged=converged,
        n_iter=n_iter,
    )


def premodel_concordant(
    data: PairedDataset,
    partition: PairPartition,
    method: str = "lr",
) -> PremodelFit:
    """Fit the chosen pre-model to concordant-pair rows.

    method 'lr' falls back to a ridge-stabilized fit on separation or rank
    failure; 'gee' falls back to 'lr' (then ridge) when the GEE sweep fails
    or does not converge. fallback_used records whether any fallback fired.
    """
    method = method.lower()
    if method not in ("lr", "gee"):
        raise ValueError(f"unknown premodel method {method!r}")
    if partition.n_concordant < 2:
        raise InsufficientConcordant(
            f"{partition.n_concordant} concordant pairs; at least 2 required"
        )
    rows = concordant_rows(data, partition)
    X = data.covariates[rows]
    y = data.response[rows].astype(np.float64)

    fallback_used = False
    detail = None
    if method == "gee":
        try:
            detail = gee_fit_pairs(X, y)
            if not detail.converged:
                raise SeparationDetected("GEE did not converge")
        except (SeparationDetected, RankDeficient, SingularSandwich, ValueError):
            fallback_used = True
            detail = None
    if detail is None:
        try:
            if method == "lr" or fallback_used:
                detail = irls_fit(X, y, True)
        except (SeparationDetected, RankDeficient):
            fallback_used = True
            detail = irls_fit(X, y, True, ridge=RIDGE_LAMBDA)

    b_c = detail.coefficients[1:].copy()
    sigma_c = make_spd(detail.covariance[1:, 1:].copy())
    return PremodelFit(
        b_c=b_c,
        sigma_c=sigma_c,
        method=method,
        fallback_used=fallback_used,
        n_pairs_used=partition.n_concordant,
        detail=detail,
    )
