"""Informative priors assembled from the concordant-pair pre-model.

Four kinds share one container:

    naive   beta ~ N(b_C, Sigma_C), beta_w ~ N(0, tau2)
    g       beta ~ N(b_C, g Sigma_C) with g ~ InvGamma(1/2, m/2); m = number
            of discordant pairs; beta_w ~ N(0, tau2)
    pmp     adds half the log observed information for the treatment
            coordinate and leaves beta_w flat (improper)
    hybrid  the information factor on top of the g prior

The g coordinate is carried on the log scale for gradient work, so its
density includes the log-scale Jacobian; its full conditional given beta
stays inverse-gamma and is drawn exactly.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .clr import Coefficients
from .data import DiscordantDiffs
from .errors import DimensionMismatch, NonFiniteState
from .premodel import PremodelFit, make_spd

DEFAULT_TAU2 = 1e4


class PriorKind(enum.Enum):
    NAIVE = "naive"
    G = "g"
    PMP = "pmp"
    HYBRID = "hybrid"

    @property
    def code(self) -> int:
        return {
            PriorKind.NAIVE: kernels.KIND_NAIVE,
            PriorKind.G: kernels.KIND_G,
            PriorKind.PMP: kernels.KIND_PMP,
            PriorKind.HYBRID: kernels.KIND_HYBRID,
        }[self]

    @property
    def has_g(self) -> bool:
        return self in (PriorKind.G, PriorKind.HYBRID)

    @property
    def needs_information(self) -> bool:
        return self in (PriorKind.PMP, PriorKind.HYBRID)


def orthogonalize_treatment(diffs: DiscordantDiffs) -> np.ndarray:
    """Residualize the constant treatment regressor off the difference
    columns. In the differenced design the treatment column is all ones;
    the returned weights are its least-squares residual against delta_x."""
    m = diffs.n_pairs
    ones = np.ones(m)
    if diffs.n_covariates == 0 or m == 0:
        return ones
    coef, *_ = np.linalg.lstsq(diffs.delta_x, ones, rcond=None)
    resid = ones - diffs.delta_x @ coef
    # exact collinearity leaves rounding dust; collapse it to a true zero so
    # the degenerate information case is detected instead of a log of dust
    if np.linalg.norm(resid) < 1e-10 * math.sqrt(m):
        return np.zeros(m)
    return resid


@dataclass(frozen=True)
class PriorSpec:
    """Everything the sampler needs to evaluate one prior kind."""

    kind: PriorKind
    b_c: np.ndarray
    sigma_c: np.ndarray
    n_discordant: int
    tau2: float = DEFAULT_TAU2
    diffs: DiscordantDiffs | None = None
    w_tilde: np.ndarray | None = None
    prec_c: np.ndarray = field(init=False, repr=False)
    logdet_sigma_c: float = field(init=False, repr=False)

    def __post_init__(self):
        b = np.ascontiguousarray(np.asarray(self.b_c, dtype=np.float64))
        object.__setattr__(self, "b_c", b)
        sig = make_spd(np.asarray(self.sigma_c, dtype=np.float64))
        object.__setattr__(self, "sigma_c", np.ascontiguousarray(sig))
        if sig.shape != (b.shape[0], b.shape[0]):
            raise DimensionMismatch(
                f"sigma_c shape {sig.shape} does not match b_c length {b.shape[0]}"
            )
        if not self.tau2 > 0.0:
            raise ValueError("tau2 must be positive")
        if self.n_discordant < 0:
            raise ValueError("n_discordant must be nonnegative")
        if self.kind.needs_information:
            if self.diffs is None:
                raise ValueError(f"{self.kind.value} prior requires diffs")
            if self.diffs.n_covariates != b.shape[0]:
                raise DimensionMismatch(
                    "diffs covariate count does not match b_c length"
                )
            wt = self.w_tilde
            if wt is None:
                wt = orthogonalize_treatment(self.diffs)
            wt = np.ascontiguousarray(np.asarray(wt, dtype=np.float64))
            if wt.shape[0] != self.diffs.n_pairs:
                raise DimensionMismatch(
                    "w_tilde length does not match the discordant pair count"
                )
            object.__setattr__(self, "w_tilde", wt)
        chol = np.linalg.cholesky(sig)
        prec = np.linalg.inv(sig)
        object.__setattr__(self, "prec_c", np.ascontiguousarray(0.5 * (prec + prec.T)))
        object.__setattr__(
            self, "logdet_sigma_c", float(2.0 * np.sum(np.log(np.diag(chol))))
        )

    @property
    def p(self) -> int:
        return self.b_c.shape[0]

    def kernel_arrays(self):
        """(dx, w_tilde) buffers for kernels; empty placeholders when the
        kind carries no information factor."""
        if self.kind.needs_information:
            return self.diffs.delta_x, self.w_tilde
        return np.zeros((0, self.p)), np.zeros(0)


@dataclass(frozen=True)
class PriorState:
    """A point in prior parameter space; g is None for kinds without it."""

    coefficients: Coefficients
    g: float | None = None

    def as_vector(self, kind: PriorKind) -> np.ndarray:
        vec = self.coefficients.as_vector()
        if kind.has_g:
            if self.g is None:
                raise ValueError(f"{kind.value} prior state requires g")
            return np.concatenate([vec, [math.log(self.g)]])
        return vec


def build_prior_spec(
    kind: PriorKind | str,
    premodel: PremodelFit,
    diffs: DiscordantDiffs,
    tau2: float = DEFAULT_TAU2,
) -> PriorSpec:
    if isinstance(kind, str):
        kind = PriorKind(kind.lower())
    return PriorSpec(
        kind=kind,
        b_c=premodel.b_c,
        sigma_c=premodel.sigma_c,
        n_discordant=diffs.n_pairs,
        tau2=tau2,
        diffs=diffs,
    )


def fisher_info_ww(
    coefficients: Coefficients,
    diffs: DiscordantDiffs,
    w_tilde: np.ndarray | None = None,
) -> float:
    """Observed information for the treatment coordinate, treatment regressor
    residualized off the difference columns."""
    if coefficients.beta.shape[0] != diffs.n_covariates:
        raise DimensionMismatch("beta length does not match diffs covariates")
    if w_tilde is None:
        w_tilde = orthogonalize_treatment(diffs)
    w_tilde = np.ascontiguousarray(np.asarray(w_tilde, dtype=np.float64))
    return float(
        kernels.fisher_info_ww(
            coefficients.beta_w, coefficients.beta, diffs.delta_x, w_tilde
        )
    )


def log_prior_and_grad(spec: PriorSpec, state: PriorState):
    """Log prior density and its gradient at `state`.

    Coordinates are (beta_w, beta) plus log g when the kind carries g; the
    returned value includes the log-scale Jacobian for that coordinate.
    """
    theta = state.coefficients.as_vector()
    if theta.shape[0] != spec.p + 1:
        raise DimensionMismatch(
            f"state has {theta.shape[0] - 1} nuisance coordinates, prior expects {spec.p}"
        )
    if not np.isfinite(theta).all():
        raise NonFiniteState("prior state contains non-finite coefficients")
    if spec.kind.has_g:
        if state.g is None:
            raise ValueError(f"{spec.kind.value} prior state requires g")
        if not (np.isfinite(state.g) and state.g > 0.0):
            raise NonFiniteState(f"g must be finite and positive, got {state.g}")
        g = float(state.g)
    else:
        g = 1.0

    dx, wt = spec.kernel_arrays()
    grad = np.zeros(spec.p + 1)
    val = float(
        kernels.prior_logp_grad(
            theta,
            g,
            spec.kind.code,
            spec.b_c,
            spec.prec_c,
            spec.logdet_sigma_c,
            spec.tau2,
            float(spec.n_discordant),
            dx,
            wt,
            grad,
        )
    )
    if not spec.kind.has_g:
        return val, grad

    # log-scale carry for g: value gains the Jacobian log g, and the
    # gradient in log g follows from d/dlog g = g d/dg
    val += math.log(g)
    delta = theta[1:] - spec.b_c
    q = float(delta @ spec.prec_c @ delta)
    grad_log_g = (q + spec.n_discordant) / (2.0 * g) - 0.5 * spec.p - 0.5
    return val, np.concatenate([grad, [grad_log_g]])


def g_conditional_draw(
    beta: np.ndarray, spec: PriorSpec, rng: np.random.Generator
) -> float:
    """Exact draw from g's inverse-gamma full conditional given beta."""
    if not spec.kind.has_g:
        raise ValueError(f"{spec.kind.value} prior carries no g")
    beta = np.asarray(beta, dtype=np.float64).ravel()
    if beta.shape[0] != spec.p:
        raise DimensionMismatch("beta length does not match prior dimension")
    if not np.isfinite(beta).all():
        raise NonFiniteState("beta contains non-finite values")
    delta = beta - spec.b_c
    q = float(delta @ spec.prec_c @ delta)
    shape = 0.5 + 0.5 * spec.p
    scale = 0.5 * (spec.n_discordant + q)
    return scale / float(rng.gamma(shape, 1.0))
