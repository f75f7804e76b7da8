"""Monte Carlo study harness for matched-pair methods.

One study holds the design matrix fixed, then repeatedly draws treatment
assignments and Bernoulli responses, runs every requested method, and
aggregates rejection rate (power or size), mean squared error of the
treatment-effect estimate, and interval coverage. Iterations are
independent tasks seeded by (master_seed, iteration index), so results do
not depend on worker count or scheduling order.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._seeds import mix_seed
from .clr import clr_fit_mle
from .data import PairedDataset, difference_discordant, partition_pairs
from .errors import EmptyStudy, PairlogitError
from .inference import IntervalMethod, decide
from .premodel import gee_fit_pairs, irls_fit, premodel_concordant
from .priors import DEFAULT_TAU2, build_prior_spec
from .sampler import SamplerConfig, sample_posterior

BASELINES = ("clr", "lr", "gee")
PREMODELS = ("lr", "gee")
PRIORS = ("naive", "g", "pmp", "hybrid")


@dataclass(frozen=True)
class MethodSpec:
    """Parsed method descriptor: a baseline name or bclr:<premodel>:<prior>."""

    descriptor: str
    family: str
    premodel: str | None = None
    prior: str | None = None


def parse_method(descriptor: str) -> MethodSpec:
    name = descriptor.strip().lower()
    if name in BASELINES:
        return MethodSpec(descriptor=name, family=name)
    parts = name.split(":")
    if parts[0] != "bclr" or len(parts) > 3:
        raise ValueError(f"unknown method descriptor {descriptor!r}")
    premodel = parts[1] if len(parts) > 1 else "lr"
    prior = parts[2] if len(parts) > 2 else "naive"
    if premodel not in PREMODELS:
        raise ValueError(f"unknown premodel {premodel!r} in {descriptor!r}")
    if prior not in PRIORS:
        raise ValueError(f"unknown prior {prior!r} in {descriptor!r}")
    return MethodSpec(descriptor=name, family="bclr", premodel=premodel, prior=prior)


@dataclass(frozen=True)
class SimConfig:
    n_total: int
    p: int = 6
    covariates_observed: int = 1
    response_model: str = "linear"
    beta_w_true: float = 0.5
    beta0: float = -0.5
    beta_true: np.ndarray | None = None
    noise_sd: float = 0.05
    n_sim: int = 1000
    alpha: float = 0.05
    methods: tuple = ("bclr:lr:naive",)
    master_seed: int = 0
    test_method: IntervalMethod = IntervalMethod.EQUAL_TAILED
    tau2: float = DEFAULT_TAU2

    def __post_init__(self):
        if self.n_total < 2 or self.n_total % 2 != 0:
            raise ValueError("n_total must be an even integer of at least 2")
        if self.p < 1:
            raise ValueError("p must be at least 1")
        if not 1 <= self.covariates_observed <= self.p:
            raise ValueError("covariates_observed must lie in [1, p]")
        model = self.response_model.strip().lower()
        if model not in ("linear", "friedman"):
            raise ValueError(f"unknown response model {self.response_model!r}")
        object.__setattr__(self, "response_model", model)
        if model == "friedman" and self.p < 5:
            raise ValueError("the friedman response model needs p >= 5")
        if self.n_sim < 0:
            raise ValueError("n_sim must be nonnegative")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        beta = self.beta_true
        if beta is None:
            beta = np.full(self.p, 1.25)
        beta = np.asarray(beta, dtype=np.float64)
        if beta.shape != (self.p,):
            raise ValueError("beta_true must have length p")
        object.__setattr__(self, "beta_true", beta)
        if isinstance(self.test_method, str):
            object.__setattr__(
                self, "test_method", IntervalMethod(self.test_method.lower())
            )
        if isinstance(self.methods, str):
            raise ValueError("methods must be a sequence of descriptors")
        if len(self.methods) == 0:
            raise ValueError("at least one method is required")
        parsed = tuple(parse_method(m) for m in self.methods)
        object.__setattr__(self, "methods", tuple(m.descriptor for m in parsed))

    @property
    def n_pairs(self) -> int:
        return self.n_total // 2

    def parsed_methods(self):
        return tuple(parse_method(m) for m in self.methods)


@dataclass(frozen=True)
class MethodMetrics:
    power_or_size: float
    mse: float
    coverage: float
    mc_se: float
    n_failed: int
    reject_rate_inclusive: float


@dataclass(frozen=True)
class SimResult:
    methods: dict
    n_sim: int


@dataclass(frozen=True)
class IterationRecord:
    reject: bool = False
    estimate: float = float("nan")
    covered: bool = False
    failed: bool = False
    error: str | None = None


def gen_design_matrix(n_pairs: int, p: int, noise_sd: float, seed: int) -> np.ndarray:
    """Fixed covariate matrix for one study.

    n_pairs base rows Uniform(-1,1) are each duplicated with independent
    N(0, noise_sd^2) perturbations and interleaved, so rows 2i and 2i+1
    form a near-identical pair; column 1 is then shuffled across all rows,
    making it the lone covariate uncorrelated within pairs.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    base = rng.uniform(-1.0, 1.0, size=(n_pairs, p))
    noise = rng.normal(0.0, noise_sd, size=(n_pairs, p))
    x = np.empty((2 * n_pairs, p))
    x[0::2] = base
    x[1::2] = base + noise
    perm = rng.permutation(2 * n_pairs)
    x[:, 0] = x[perm, 0]
    return x


def assign_treatment(n_pairs: int, seed: int) -> np.ndarray:
    """Treatment indicators, one fair coin per pair deciding which member."""
    rng = np.random.Generator(np.random.PCG64(seed))
    first_treated = rng.integers(0, 2, size=n_pairs)
    w = np.empty(2 * n_pairs, dtype=np.int8)
    w[0::2] = first_treated
    w[1::2] = 1 - first_treated
    return w


def response_probability(x_row: np.ndarray, w: int, cfg: SimConfig) -> float:
    """Success probability for one member under the configured model."""
    x_row = np.asarray(x_row, dtype=np.float64)
    if cfg.response_model == "linear":
        eta = cfg.beta0 + float(x_row @ cfg.beta_true) + cfg.beta_w_true * w
    else:
        eta = (
            math.sin(math.pi * x_row[0] * x_row[1])
            + x_row[2] ** 3
            + x_row[3] ** 2
            + x_row[4] ** 2
            + cfg.beta_w_true * w
        )
    return 1.0 / (1.0 + math.exp(-eta))


def _response_probs(x: np.ndarray, w: np.ndarray, cfg: SimConfig) -> np.ndarray:
    if cfg.response_model == "linear":
        eta = cfg.beta0 + x @ cfg.beta_true + cfg.beta_w_true * w
    else:
        eta = (
            np.sin(np.pi * x[:, 0] * x[:, 1])
            + x[:, 2] ** 3
            + x[:, 3] ** 2
            + x[:, 4] ** 2
            + cfg.beta_w_true * w
        )
    return 1.0 / (1.0 + np.exp(-eta))


def _wald_record(estimate: float, se: float, cfg: SimConfig) -> IterationRecord:
    if not (np.isfinite(estimate) and np.isfinite(se) and se > 0.0):
        return IterationRecord(failed=True, error="non-finite Wald statistics")
    p_null = math.erfc(abs(estimate) / (se * math.sqrt(2.0)))
    p_true = math.erfc(abs(estimate - cfg.beta_w_true) / (se * math.sqrt(2.0)))
    return IterationRecord(
        reject=p_null < cfg.alpha,
        estimate=estimate,
        covered=p_true >= cfg.alpha,
    )


def _run_method(method: MethodSpec, data: PairedDataset, cfg: SimConfig,
                sampler_seed: int) -> IterationRecord:
    w = data.treatment.astype(np.float64)
    y = data.response.astype(np.float64)
    if method.family == "lr":
        design = np.column_stack([data.covariates, w])
        fit = irls_fit(design, y, True)
        se = math.sqrt(max(fit.covariance[-1, -1], 0.0))
        return _wald_record(float(fit.coefficients[-1]), se, cfg)
    if method.family == "gee":
        design = np.column_stack([data.covariates, w])
        fit = gee_fit_pairs(design, y)
        se = math.sqrt(max(fit.covariance[-1, -1], 0.0))
        return _wald_record(float(fit.coefficients[-1]), se, cfg)

    partition = partition_pairs(data)
    diffs = difference_discordant(data, partition)
    if method.family == "clr":
        fit = clr_fit_mle(diffs)
        se = math.sqrt(max(fit.covariance[0, 0], 0.0))
        return _wald_record(fit.estimate.beta_w, se, cfg)

    premodel = premodel_concordant(data, partition, method.premodel)
    spec = build_prior_spec(method.prior, premodel, diffs, tau2=cfg.tau2)
    sampler_cfg = SamplerConfig(seed=sampler_seed)
    samples = sample_posterior(diffs, spec, sampler_cfg)
    pooled = samples.pooled_beta_w()
    decision = decide(pooled, theta0=0.0, alpha=cfg.alpha, method=cfg.test_method)
    return IterationRecord(
        reject=decision.reject,
        estimate=decision.point_estimate,
        covered=decision.interval_set.contains(cfg.beta_w_true),
    )


def run_iteration(cfg: SimConfig, x_fixed: np.ndarray, iter_index: int) -> dict:
    """Draw one (treatment, response) realization and run every method.

    Method failures are captured in the record, never raised.
    """
    n_pairs = cfg.n_pairs
    w = assign_treatment(n_pairs, mix_seed(cfg.master_seed, "iter", iter_index, "treat"))
    probs = _response_probs(x_fixed, w.astype(np.float64), cfg)
    rng = np.random.Generator(
        np.random.PCG64(mix_seed(cfg.master_seed, "iter", iter_index, "response"))
    )
    y = (rng.random(2 * n_pairs) < probs).astype(np.int8)
    data = PairedDataset(
        pair_id=np.repeat(np.arange(n_pairs), 2),
        treatment=w,
        response=y,
        covariates=x_fixed[:, : cfg.covariates_observed],
    )
    out = {}
    for method in cfg.parsed_methods():
        seed = mix_seed(cfg.master_seed, "iter", iter_index, "sampler",
                        method.descriptor)
        try:
            out[method.descriptor] = _run_method(method, data, cfg, seed)
        except (PairlogitError, np.linalg.LinAlgError, ValueError) as exc:
            out[method.descriptor] = IterationRecord(
                failed=True, error=f"{type(exc).__name__}: {exc}"
            )
    return out


def run_study(cfg: SimConfig, n_threads: int = 1) -> SimResult:
    """Run the full study and aggregate per-method metrics.

    Rejection and coverage proportions use non-failed iterations as the
    denominator; reject_rate_inclusive counts failures as non-rejections
    over all iterations, making both accounting conventions visible.
    """
    if cfg.n_sim == 0:
        raise EmptyStudy("n_sim is 0")
    x_fixed = gen_design_matrix(
        cfg.n_pairs, cfg.p, cfg.noise_sd, mix_seed(cfg.master_seed, "design")
    )
    records = [None] * cfg.n_sim

    def task(i):
        records[i] = run_iteration(cfg, x_fixed, i)

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            list(pool.map(task, range(cfg.n_sim)))
    else:
        for i in range(cfg.n_sim):
            task(i)

    methods = {}
    for method in cfg.parsed_methods():
        rec = [records[i][method.descriptor] for i in range(cfg.n_sim)]
        failed = np.array([r.failed for r in rec], dtype=bool)
        reject = np.array([r.reject for r in rec], dtype=bool)
        covered = np.array([r.covered for r in rec], dtype=bool)
        est = np.array([r.estimate for r in rec], dtype=np.float64)
        n_eff = int((~failed).sum())
        n_failed = int(failed.sum())
        if n_eff > 0:
            power = float(np.sum(reject[~failed]) / n_eff)
            cover = float(np.sum(covered[~failed]) / n_eff)
            mse = float(np.mean((est[~failed] - cfg.beta_w_true) ** 2))
            mc_se = math.sqrt(power * (1.0 - power) / n_eff)
        else:
            power = cover = mse = mc_se = float("nan")
        methods[method.descriptor] = MethodMetrics(
            power_or_size=power,
            mse=mse,
            coverage=cover,
            mc_se=mc_se,
            n_failed=n_failed,
            reject_rate_inclusive=float(np.sum(reject[~failed]) / cfg.n_sim),
        )
    return SimResult(methods=methods, n_sim=cfg.n_sim)
