"""Command-line front end.

`pairlogit fit data.csv` runs one analysis (BCLR or a baseline) on a paired
CSV and emits a JSON report; `pairlogit simulate` runs a Monte Carlo study
and emits a metrics table. Every failure exits nonzero with a
machine-readable error code on stderr:

    2  malformed input or invalid flag combination
    3  too few concordant pairs for the pre-model
    4  no discordant pairs
    5  sampler failure (divergent chains)
"""

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass

import numpy as np

from .clr import clr_fit_mle
from .data import PairedDataset, difference_discordant, partition_pairs
from .errors import (
    AllDivergent,
    EmptyStudy,
    InsufficientConcordant,
    MalformedInput,
    NoDiscordantPairs,
    PairlogitError,
)
from .inference import IntervalMethod, decide
from .premodel import gee_fit_pairs, irls_fit, premodel_concordant
from .priors import DEFAULT_TAU2, build_prior_spec
from .sampler import SamplerConfig, diagnose, sample_posterior
from .simulate import SimConfig, run_study

TEST_NAMES = {
    "cr": IntervalMethod.EQUAL_TAILED,
    "hpd-contiguous": IntervalMethod.HPD_CONTIGUOUS,
    "hpd-disjoint": IntervalMethod.HPD_DISJOINT,
}


@dataclass(frozen=True)
class FitRequest:
    input_path: str
    method: str = "bclr"
    premodel: str = "lr"
    prior: str = "naive"
    tau2: float = DEFAULT_TAU2
    test: str = "cr"
    theta0: float = 0.0
    alpha: float = 0.05
    chains: int = 4
    warmup: int = 1000
    draws: int = 500
    seed: int = 0
    n_threads: int = 1


@dataclass(frozen=True)
class InferenceReport:
    method: str
    estimate: float
    intervals: tuple
    interval_method: str
    reject: bool
    theta0: float
    alpha: float
    n_concordant: int
    n_discordant: int
    diagnostics: dict | None
    wald_p: float | None
    fallback_used: bool
    wall_time_s: float

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "estimate": self.estimate,
            "intervals": [[lo, hi] for lo, hi in self.intervals],
            "interval_method": self.interval_method,
            "reject": self.reject,
            "theta0": self.theta0,
            "alpha": self.alpha,
            "n_concordant": self.n_concordant,
            "n_discordant": self.n_discordant,
            "diagnostics": self.diagnostics,
            "wald_p": self.wald_p,
            "fallback_used": self.fallback_used,
            "wall_time_s": self.wall_time_s,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InferenceReport":
        return cls(
            method=d["method"],
            estimate=d["estimate"],
            intervals=tuple((lo, hi) for lo, hi in d["intervals"]),
            interval_method=d["interval_method"],
            reject=d["reject"],
            theta0=d["theta0"],
            alpha=d["alpha"],
            n_concordant=d["n_concordant"],
            n_discordant=d["n_discordant"],
            diagnostics=d["diagnostics"],
            wald_p=d["wald_p"],
            fallback_used=d["fallback_used"],
            wall_time_s=d["wall_time_s"],
        )


def z_critical(alpha: float) -> float:
    """Two-sided normal critical value, solved from erfc by bisection."""
    lo, hi = 0.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if math.erfc(mid / math.sqrt(2.0)) > alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def read_paired_csv(path: str) -> PairedDataset:
    """Parse the pinned CSV dialect: header pair_id,treatment,response then
    covariate columns. Malformed values are reported with file line numbers."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise MalformedInput(f"cannot read {path}: {exc}") from None
    if not rows:
        raise MalformedInput("empty file; expected a header row")
    header = [h.strip() for h in rows[0]]
    if header[:3] != ["pair_id", "treatment", "response"]:
        raise MalformedInput(
            "header must begin with pair_id,treatment,response; got "
            + ",".join(header[:3])
        )
    n_cov = len(header) - 3
    pair_id, treatment, response, covariates = [], [], [], []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise MalformedInput(
                f"line {line_no}: expected {len(header)} fields, got {len(row)}"
            )
        pair_id.append(row[0].strip())
        try:
            t = int(row[1])
            r = int(row[2])
        except ValueError:
            raise MalformedInput(
                f"line {line_no}: treatment and response must be integers"
            ) from None
        if t not in (0, 1) or r not in (0, 1):
            raise MalformedInput(
                f"line {line_no}: treatment and response must be 0 or 1"
            )
        treatment.append(t)
        response.append(r)
        try:
            covariates.append([float(c) for c in row[3:]])
        except ValueError:
            raise MalformedInput(
                f"line {line_no}: covariates must be numeric"
            ) from None
        if not all(math.isfinite(v) for v in covariates[-1]):
            raise MalformedInput(f"line {line_no}: covariates must be finite")
    if not pair_id:
        raise MalformedInput("no data rows found")
    return PairedDataset(
        pair_id=np.array(pair_id),
        treatment=np.array(treatment, dtype=np.int8),
        response=np.array(response, dtype=np.int8),
        covariates=np.array(covariates, dtype=np.float64).reshape(
            len(pair_id), n_cov
        ),
    )


def fit_command(req: FitRequest) -> InferenceReport:
    start = time.perf_counter()
    data = read_paired_csv(req.input_path)
    partition = partition_pairs(data)
    test_method = TEST_NAMES[req.test]

    if req.method == "bclr":
        diffs = difference_discordant(data, partition)
        premodel = premodel_concordant(data, partition, req.premodel)
        spec = build_prior_spec(req.prior, premodel, diffs, tau2=req.tau2)
        cfg = SamplerConfig(
            chains=req.chains,
            warmup=req.warmup,
            draws_per_chain=req.draws,
            seed=req.seed,
        )
        samples = sample_posterior(diffs, spec, cfg, n_threads=req.n_threads)
        decision = decide(
            samples.pooled_beta_w(),
            theta0=req.theta0,
            alpha=req.alpha,
            method=test_method,
        )
        diag = diagnose(samples)
        diagnostics = {
            "rhat": {n: float(v) for n, v in zip(diag.names, diag.rhat)},
            "ess": {n: float(v) for n, v in zip(diag.names, diag.ess)},
            "divergences": [int(v) for v in samples.divergence_count],
            "accept_rate": [float(v) for v in samples.accept_rate],
        }
        return InferenceReport(
            method=f"bclr:{req.premodel}:{req.prior}",
            estimate=decision.point_estimate,
            intervals=decision.interval_set.intervals,
            interval_method=test_method.value,
            reject=decision.reject,
            theta0=req.theta0,
            alpha=req.alpha,
            n_concordant=partition.n_concordant,
            n_discordant=partition.n_discordant,
            diagnostics=diagnostics,
            wald_p=None,
            fallback_used=premodel.fallback_used,
            wall_time_s=time.perf_counter() - start,
        )

    # baselines: Wald test of theta0 from estimate and standard error
    w = data.treatment.astype(np.float64)
    y = data.response.astype(np.float64)
    if req.method == "lr":
        fit = irls_fit(np.column_stack([data.covariates, w]), y, True)
        estimate, var = float(fit.coefficients[-1]), float(fit.covariance[-1, -1])
    elif req.method == "gee":
        fit = gee_fit_pairs(np.column_stack([data.covariates, w]), y)
        estimate, var = float(fit.coefficients[-1]), float(fit.covariance[-1, -1])
    elif req.method == "clr":
        fit = clr_fit_mle(difference_discordant(data, partition))
        estimate, var = fit.estimate.beta_w, float(fit.covariance[0, 0])
    else:
        raise ValueError(f"unknown method {req.method!r}")
    se = math.sqrt(max(var, 0.0))
    if se <= 0.0 or not math.isfinite(se):
        raise MalformedInput("degenerate standard error in baseline fit")
    zc = z_critical(req.alpha)
    wald_p = math.erfc(abs(estimate - req.theta0) / (se * math.sqrt(2.0)))
    return InferenceReport(
        method=req.method,
        estimate=estimate,
        intervals=((estimate - zc * se, estimate + zc * se),),
        interval_method="wald",
        reject=wald_p < req.alpha,
        theta0=req.theta0,
        alpha=req.alpha,
        n_concordant=partition.n_concordant,
        n_discordant=partition.n_discordant,
        diagnostics=None,
        wald_p=wald_p,
        fallback_used=False,
        wall_time_s=time.perf_counter() - start,
    )


def _resolved_config(cfg: SimConfig) -> dict:
    return {
        "n_total": cfg.n_total,
        "p": cfg.p,
        "covariates_observed": cfg.covariates_observed,
        "response_model": cfg.response_model,
        "beta_w_true": cfg.beta_w_true,
        "beta0": cfg.beta0,
        "beta_true": [float(b) for b in cfg.beta_true],
        "noise_sd": cfg.noise_sd,
        "n_sim": cfg.n_sim,
        "alpha": cfg.alpha,
        "methods": list(cfg.methods),
        "master_seed": cfg.master_seed,
        "test_method": cfg.test_method.value,
        "tau2": cfg.tau2,
    }


def simulate_command(cfg: SimConfig, n_threads: int = 1, fmt: str = "csv") -> str:
    """Run the study and render the metrics table with the resolved config
    echoed. Thread count is execution detail and is not echoed, so outputs
    are byte-identical across worker counts."""
    result = run_study(cfg, n_threads=n_threads)
    config_json = json.dumps(_resolved_config(cfg), sort_keys=True)
    columns = [
        "method",
        "power_or_size",
        "mse",
        "coverage",
        "mc_se",
        "n_failed",
        "reject_rate_inclusive",
    ]
    if fmt == "json":
        payload = {
            "config": json.loads(config_json),
            "n_sim": result.n_sim,
            "methods": {
                name: {
                    "power_or_size": m.power_or_size,
                    "mse": m.mse,
                    "coverage": m.coverage,
                    "mc_se": m.mc_se,
                    "n_failed": m.n_failed,
                    "reject_rate_inclusive": m.reject_rate_inclusive,
                }
                for name, m in result.methods.items()
            },
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    buf.write(f"# config {config_json}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for name in cfg.methods:
        m = result.methods[name]
        writer.writerow(
            [
                name,
                repr(m.power_or_size),
                repr(m.mse),
                repr(m.coverage),
                repr(m.mc_se),
                m.n_failed,
                repr(m.reject_rate_inclusive),
            ]
        )
    return buf.getvalue()


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairlogit",
        description="Bayesian conditional logistic regression for matched pairs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit one model to a paired CSV")
    fit.add_argument("input", help="CSV with pair_id,treatment,response,covariates")
    fit.add_argument("--method", choices=["bclr", "lr", "clr", "gee"],
                     default="bclr")
    fit.add_argument("--premodel", choices=["lr", "gee"], default="lr")
    fit.add_argument("--prior", choices=["naive", "g", "pmp", "hybrid"],
                     default="naive")
    fit.add_argument("--tau2", type=float, default=DEFAULT_TAU2)
    fit.add_argument("--test", choices=sorted(TEST_NAMES), default="cr")
    fit.add_argument("--theta0", type=float, default=0.0)
    fit.add_argument("--alpha", type=float, default=0.05)
    fit.add_argument("--chains", type=int, default=4)
    fit.add_argument("--warmup", type=int, default=1000)
    fit.add_argument("--draws", type=int, default=500)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--threads", type=int, default=1)
    fit.add_argument("--output", default=None)
    fit.add_argument("--format", choices=["json"], default="json")

    sim = sub.add_parser("simulate", help="run a Monte Carlo study")
    sim.add_argument("--n-total", type=int, required=True)
    sim.add_argument("--p", type=int, default=6)
    sim.add_argument("--covariates-observed", type=int, default=1)
    sim.add_argument("--model", choices=["linear", "friedman"], default="linear")
    sim.add_argument("--beta-w", type=float, default=0.5)
    sim.add_argument("--beta0", type=float, default=-0.5)
    sim.add_argument("--noise-sd", type=float, default=0.05)
    sim.add_argument("--n-sim", type=int, default=1000)
    sim.add_argument("--alpha", type=float, default=0.05)
    sim.add_argument("--methods", default="bclr:lr:naive",
                     help="comma-separated descriptors, e.g. clr,bclr:lr:naive")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--test-method",
                     choices=["equal_tailed", "hpd_contiguous", "hpd_disjoint"],
                     default="equal_tailed")
    sim.add_argument("--tau2", type=float, default=DEFAULT_TAU2)
    sim.add_argument("--threads", type=int, default=1)
    sim.add_argument("--output", default=None)
    sim.add_argument("--format", choices=["csv", "json"], default="csv")
    return parser


def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fail(code: int, name: str, message: str, extra: dict | None = None) -> int:
    payload = {"error": name, "message": message}
    if extra:
        payload.update(extra)
    sys.stderr.write(json.dumps(payload) + "\n")
    return code


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "fit":
            if args.method != "bclr" and (
                args.prior != "naive" or args.premodel != "lr"
            ):
                sys.stderr.write(
                    "warning: --prior/--premodel are ignored for baseline methods\n"
                )
            req = FitRequest(
                input_path=args.input,
                method=args.method,
                premodel=args.premodel,
                prior=args.prior,
                tau2=args.tau2,
                test=args.test,
                theta0=args.theta0,
                alpha=args.alpha,
                chains=args.chains,
                warmup=args.warmup,
                draws=args.draws,
                seed=args.seed,
                n_threads=args.threads,
            )
            report = fit_command(req)
            _emit(json.dumps(report.to_dict(), indent=2) + "\n", args.output)
            return 0
        cfg = SimConfig(
            n_total=args.n_total,
            p=args.p,
            covariates_observed=args.covariates_observed,
            response_model=args.model,
            beta_w_true=args.beta_w,
            beta0=args.beta0,
            noise_sd=args.noise_sd,
            n_sim=args.n_sim,
            alpha=args.alpha,
            methods=tuple(m for m in args.methods.split(",") if m.strip()),
            master_seed=args.seed,
            test_method=args.test_method,
            tau2=args.tau2,
        )
        text = simulate_command(cfg, n_threads=args.threads, fmt=args.format)
        _emit(text, args.output)
        return 0
    except InsufficientConcordant as exc:
        return _fail(3, "InsufficientConcordant", f"{exc}; use --method clr")
    except NoDiscordantPairs as exc:
        return _fail(4, "NoDiscordantPairs", str(exc))
    except AllDivergent as exc:
        return _fail(5, "SamplerFailure", str(exc))
    except EmptyStudy as exc:
        return _fail(2, "MalformedInput", str(exc))
    except (MalformedInput, PairlogitError, ValueError) as exc:
        return _fail(2, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
