"""Hamiltonian Monte Carlo driver over the conditional-likelihood posterior.

Each chain runs dual-averaging step-size adaptation toward a target
acceptance rate, estimates a diagonal mass matrix from the second half of
warmup, and (for priors carrying g) interleaves an exact inverse-gamma
Gibbs update of g after every transition. Chains are independent streams
of one counter-based generator seeded from (seed, chain index), so results
are identical whether chains run serially or across threads.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from ._seeds import mix_seed
from .data import DiscordantDiffs
from .errors import AllDivergent, DimensionMismatch
from .priors import PriorSpec

MAX_DIVERGENCE_FRACTION = 0.5
DRIFT_RESTARTS = 1


@dataclass(frozen=True)
class SamplerConfig:
    chains: int = 4
    warmup: int = 1000
    draws_per_chain: int = 500
    target_accept: float = 0.8
    max_leapfrog: int = 256
    init_jitter: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.chains < 1:
            raise ValueError("chains must be at least 1")
        if self.warmup < 0:
            raise ValueError("warmup must be nonnegative")
        if self.draws_per_chain < 1:
            raise ValueError("draws_per_chain must be at least 1")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.max_leapfrog < 1:
            raise ValueError("max_leapfrog must be at least 1")
        if self.init_jitter < 0.0:
            raise ValueError("init_jitter must be nonnegative")


@dataclass(frozen=True)
class PosteriorSamples:
    """Retained draws, chain-major: arrays indexed (chain, draw)."""

    beta_w_draws: np.ndarray
    beta_draws: np.ndarray
    g_draws: np.ndarray | None
    accept_rate: np.ndarray
    divergence_count: np.ndarray

    @property
    def n_chains(self) -> int:
        return self.beta_w_draws.shape[0]

    @property
    def n_draws_per_chain(self) -> int:
        return self.beta_w_draws.shape[1]

    @property
    def n_total(self) -> int:
        return self.beta_w_draws.size

    def pooled_beta_w(self) -> np.ndarray:
        """All chains' treatment-effect draws concatenated in chain order."""
        return self.beta_w_draws.reshape(-1)

    def parameter_stack(self):
        """(names, array (chains, draws, k)) over beta_w, beta, and g."""
        parts = [self.beta_w_draws[:, :, None], self.beta_draws]
        names = ["beta_w"] + [
            f"beta[{j}]" for j in range(self.beta_draws.shape[2])
        ]
        if self.g_draws is not None:
            parts.append(self.g_draws[:, :, None])
            names.append("g")
        return names, np.concatenate(parts, axis=2)


@dataclass(frozen=True)
class Diagnostics:
    names: list
    rhat: np.ndarray
    ess: np.ndarray

    def lookup(self, name: str):
        i = self.names.index(name)
        return float(self.rhat[i]), float(self.ess[i])


def _run_chains(dim, kernel_args, cfg, n_threads):
    out_theta = np.empty((cfg.chains, cfg.draws_per_chain, dim))
    out_g = np.empty((cfg.chains, cfg.draws_per_chain))
    out_stats = np.empty((cfg.chains, 3))

    def one_chain(c):
        seed = np.uint64(mix_seed(cfg.seed, "chain", c))
        with np.errstate(over="ignore"):
            kernels.hmc_chain(
                *kernel_args,
                cfg.warmup,
                cfg.draws_per_chain,
                cfg.target_accept,
                cfg.max_leapfrog,
                cfg.init_jitter,
                seed,
                DRIFT_RESTARTS,
                out_theta[c],
                out_g[c],
                out_stats[c],
            )

    if n_threads > 1 and cfg.chains > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            list(pool.map(one_chain, range(cfg.chains)))
    else:
        for c in range(cfg.chains):
            one_chain(c)

    for c in range(cfg.chains):
        if out_stats[c, 2] != 0.0:
            raise AllDivergent(
                f"chain {c} exceeded its drift restart budget during warmup"
            )
        if out_stats[c, 1] / cfg.draws_per_chain > MAX_DIVERGENCE_FRACTION:
            raise AllDivergent(
                f"chain {c} lost {int(out_stats[c, 1])} of "
                f"{cfg.draws_per_chain} transitions to divergences"
            )
    accept_rate = out_stats[:, 0] / cfg.draws_per_chain
    divergences = out_stats[:, 1].astype(np.int64)
    return out_theta, out_g, accept_rate, divergences


def sample_posterior(
    diffs: DiscordantDiffs,
    spec: PriorSpec,
    config: SamplerConfig | None = None,
    n_threads: int = 1,
) -> PosteriorSamples:
    """Sample (beta_w, beta) and, when the prior carries it, g.

    With zero discordant pairs the likelihood is identically zero and the
    chains sample the prior itself.
    """
    cfg = config if config is not None else SamplerConfig()
    if diffs.n_covariates != spec.p:
        raise DimensionMismatch(
            f"diffs carry {diffs.n_covariates} covariates, prior expects {spec.p}"
        )
    dim = spec.p + 1
    dx = diffs.delta_x
    z = diffs.case_is_treated.astype(np.float64)
    _, wt = spec.kernel_arrays()
    kernel_args = (
        dx,
        z,
        wt,
        spec.b_c,
        spec.prec_c,
        spec.logdet_sigma_c,
        float(spec.tau2),
        float(spec.n_discordant),
        spec.kind.code,
        kernels.MODE_POSTERIOR,
        np.zeros(dim),
        np.zeros((dim, dim)),
    )
    out_theta, out_g, accept_rate, divergences = _run_chains(
        dim, kernel_args, cfg, n_threads
    )
    return PosteriorSamples(
        beta_w_draws=out_theta[:, :, 0].copy(),
        beta_draws=out_theta[:, :, 1:].copy(),
        g_draws=out_g.copy() if spec.kind.has_g else None,
        accept_rate=accept_rate,
        divergence_count=divergences,
    )


def sample_gaussian_target(
    mean: np.ndarray,
    prec: np.ndarray,
    config: SamplerConfig | None = None,
    n_threads: int = 1,
):
    """Run the identical transition kernel against a fixed Gaussian target.

    Calibration hook: returns (draws (chains, n, d), accept_rate,
    divergence_count) for checking the sampler against known moments.
    """
    cfg = config if config is not None else SamplerConfig()
    mean = np.ascontiguousarray(np.asarray(mean, dtype=np.float64))
    prec = np.ascontiguousarray(np.asarray(prec, dtype=np.float64))
    d = mean.shape[0]
    if prec.shape != (d, d):
        raise DimensionMismatch("precision shape does not match mean length")
    kernel_args = (
        np.zeros((0, max(d - 1, 0))),
        np.zeros(0),
        np.zeros(0),
        np.zeros(max(d - 1, 0)),
        np.zeros((max(d - 1, 0), max(d - 1, 0))),
        0.0,
        1.0,
        0.0,
        kernels.KIND_NAIVE,
        kernels.MODE_GAUSSIAN,
        mean,
        prec,
    )
    out_theta, _, accept_rate, divergences = _run_chains(
        d, kernel_args, cfg, n_threads
    )
    return out_theta, accept_rate, divergences


def _split_chains(draws: np.ndarray) -> np.ndarray:
    """(chains, n) -> (2*chains, n//2), dropping a trailing draw if n is odd."""
    c, n = draws.shape
    half = n // 2
    return draws[:, : 2 * half].reshape(c * 2, half)


def _rhat_one(draws: np.ndarray) -> float:
    split = _split_chains(draws)
    m, n = split.shape
    if n < 2:
        return float("nan")
    # constant chains: the variance is rounding dust, not spread
    if float(draws.max() - draws.min()) == 0.0:
        return 1.0
    within = split.var(axis=1, ddof=1)
    w = float(within.mean())
    means = split.mean(axis=1)
    if w <= 0.0:
        return 1.0
    b = n * float(means.var(ddof=1)) if m > 1 else 0.0
    var_plus = (n - 1) / n * w + b / n
    return float(np.sqrt(var_plus / w))


def _ess_one(draws: np.ndarray) -> float:
    split = _split_chains(draws)
    m, n = split.shape
    total = draws.size
    if n < 4:
        return float(total)
    within = split.var(axis=1, ddof=1)
    w = float(within.mean())
    if w <= 0.0:
        return float(total)
    means = split.mean(axis=1)
    b = n * float(means.var(ddof=1)) if m > 1 else 0.0
    var_plus = (n - 1) / n * w + b / n

    centered = split - means[:, None]
    acov = np.empty((m, n))
    for c in range(m):
        full = np.correlate(centered[c], centered[c], mode="full")
        acov[c] = full[n - 1 :] / n
    mean_acov = acov.mean(axis=0)

    # Geyer initial monotone positive sequence on paired correlations
    rho = 1.0 - (w - mean_acov) / var_plus
    rho[0] = 1.0
    tau = 0.0
    prev_pair = np.inf
    k = 0
    while 2 * k + 1 < n:
        pair = rho[2 * k] + rho[2 * k + 1]
        if pair <= 0.0:
            break
        if pair > prev_pair:
            pair = prev_pair
        tau += pair
        prev_pair = pair
        k += 1
    tau = max(2.0 * tau - 1.0, 1e-8)
    ess = total / tau
    return float(min(ess, 1.5 * total))


def diagnose(samples: PosteriorSamples) -> Diagnostics:
    """Split-chain R-hat and autocorrelation-adjusted effective sample size
    for every retained parameter."""
    names, stack = samples.parameter_stack()
    k = stack.shape[2]
    rhat = np.empty(k)
    ess = np.empty(k)
    for j in range(k):
        rhat[j] = _rhat_one(stack[:, :, j])
        ess[j] = _ess_one(stack[:, :, j])
    return Diagnostics(names=names, rhat=rhat, ess=ess)
