"""Simulation harness: design generation, response models, per-iteration
records, and study aggregation."""

import math

import numpy as np
import pytest

from pairlogit import (
    EmptyStudy,
    SimConfig,
    assign_treatment,
    gen_design_matrix,
    parse_method,
    response_probability,
    run_iteration,
    run_study,
)
from pairlogit.simulate import _response_probs


def _pair_corr(col):
    return float(np.corrcoef(col[0::2], col[1::2])[0, 1])


class TestDesignMatrix:
    def test_zero_noise_duplicates_unshuffled_columns(self):
        x = gen_design_matrix(50, 4, noise_sd=0.0, seed=1)
        np.testing.assert_array_equal(x[0::2, 1:], x[1::2, 1:])
        assert (np.abs(x) <= 1.0).all()

    def test_noise_range_bound(self):
        sd = 0.05
        x = gen_design_matrix(200, 6, noise_sd=sd, seed=2)
        assert (np.abs(x[:, 1:]) <= 1.0 + 5 * sd).all()
        # the original member of each pair is noise-free
        assert (np.abs(x[0::2, 1:]) <= 1.0).all()

    def test_shuffled_column_decorrelated_within_pairs(self):
        x = gen_design_matrix(500, 6, noise_sd=0.05, seed=3)
        assert -0.1 < _pair_corr(x[:, 0]) < 0.1
        assert _pair_corr(x[:, 1]) > 0.99

    def test_deterministic_in_seed(self):
        a = gen_design_matrix(30, 3, 0.05, seed=7)
        b = gen_design_matrix(30, 3, 0.05, seed=7)
        c = gen_design_matrix(30, 3, 0.05, seed=8)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_single_pair_ok(self):
        assert gen_design_matrix(1, 2, 0.05, seed=0).shape == (2, 2)
        with pytest.raises(ValueError):
            gen_design_matrix(0, 2, 0.05, seed=0)


class TestAssignTreatment:
    def test_one_treated_per_pair(self):
        w = assign_treatment(200, seed=4)
        assert w.shape == (400,)
        np.testing.assert_array_equal(w[0::2] + w[1::2], np.ones(200))

    def test_fair_coin(self):
        w = assign_treatment(100_000, seed=5)
        frac_first = float(w[0::2].mean())
        assert 0.49 <= frac_first <= 0.51

    def test_deterministic(self):
        np.testing.assert_array_equal(
            assign_treatment(50, seed=6), assign_treatment(50, seed=6)
        )


class TestResponseModels:
    def test_linear_at_origin(self):
        cfg = SimConfig(n_total=100, p=6)
        p0 = response_probability(np.zeros(6), 0, cfg)
        assert p0 == pytest.approx(0.377541, abs=1e-6)

    def test_friedman_at_origin(self):
        cfg = SimConfig(n_total=100, p=6, response_model="friedman")
        assert response_probability(np.zeros(6), 0, cfg) == pytest.approx(0.5)

    def test_friedman_plug_in(self):
        cfg = SimConfig(
            n_total=100, p=6, response_model="friedman", beta_w_true=0.5
        )
        x = np.array([1.0, 0.5, 1.0, 1.0, 1.0, 0.3])
        p1 = response_probability(x, 1, cfg)
        assert p1 == pytest.approx(0.989013, abs=1e-6)
        assert p1 == pytest.approx(1 / (1 + math.exp(-4.5)), abs=1e-12)

    def test_treatment_shifts_logit(self):
        cfg = SimConfig(n_total=100, p=3, beta_w_true=0.8)
        x = np.array([0.2, -0.1, 0.4])
        p0 = response_probability(x, 0, cfg)
        p1 = response_probability(x, 1, cfg)
        logit = lambda q: math.log(q / (1 - q))
        assert logit(p1) - logit(p0) == pytest.approx(0.8, abs=1e-12)

    def test_vectorized_matches_scalar(self):
        cfg = SimConfig(n_total=20, p=6, response_model="friedman")
        x = gen_design_matrix(10, 6, 0.05, seed=9)
        w = assign_treatment(10, seed=9).astype(np.float64)
        vec = _response_probs(x, w, cfg)
        scal = [response_probability(x[i], int(w[i]), cfg) for i in range(20)]
        np.testing.assert_allclose(vec, scal, atol=1e-14)


class TestParseMethod:
    def test_baselines(self):
        for name in ("clr", "lr", "gee"):
            spec = parse_method(name)
            assert spec.family == name and spec.premodel is None

    def test_bclr_defaults(self):
        spec = parse_method("bclr")
        assert (spec.family, spec.premodel, spec.prior) == ("bclr", "lr", "naive")

    def test_bclr_full(self):
        spec = parse_method("bclr:gee:hybrid")
        assert (spec.premodel, spec.prior) == ("gee", "hybrid")

    def test_normalization(self):
        assert parse_method("  CLR ").descriptor == "clr"

    @pytest.mark.parametrize(
        "bad", ["glmm", "bclr:ols:naive", "bclr:lr:cauchy", "bclr:lr:naive:x"]
    )
    def test_rejects_unknown(self, bad):
        with pytest.raises(ValueError):
            parse_method(bad)


class TestSimConfig:
    def test_friedman_needs_five_covariates(self):
        with pytest.raises(ValueError):
            SimConfig(n_total=100, p=4, response_model="friedman")

    def test_observed_cannot_exceed_latent(self):
        with pytest.raises(ValueError):
            SimConfig(n_total=100, p=3, covariates_observed=4)

    def test_odd_total_rejected(self):
        with pytest.raises(ValueError):
            SimConfig(n_total=101)

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError):
            SimConfig(n_total=100, methods=("bclr:lr:banana",))

    def test_default_slope_vector(self):
        cfg = SimConfig(n_total=100, p=4)
        np.testing.assert_array_equal(cfg.beta_true, np.full(4, 1.25))


class TestRunIteration:
    def test_deterministic(self):
        cfg = SimConfig(
            n_total=80, p=2, covariates_observed=1,
            methods=("bclr:lr:naive", "clr", "lr"), master_seed=11,
        )
        x = gen_design_matrix(cfg.n_pairs, cfg.p, cfg.noise_sd, seed=0)
        a = run_iteration(cfg, x, 3)
        b = run_iteration(cfg, x, 3)
        assert a == b
        c = run_iteration(cfg, x, 4)
        assert a != c

    def test_strong_effect_rejected(self):
        cfg = SimConfig(
            n_total=500, p=1, covariates_observed=1, beta_w_true=5.0,
            methods=("bclr:lr:naive",), master_seed=2,
        )
        x = gen_design_matrix(cfg.n_pairs, cfg.p, cfg.noise_sd, seed=0)
        hits = sum(
            run_iteration(cfg, x, i)["bclr:lr:naive"].reject for i in range(10)
        )
        assert hits >= 9

    def test_all_concordant_iteration_is_captured(self):
        # saturated intercept forces every response to 1, so no pair is
        # discordant and the conditional methods must fail gracefully
        cfg = SimConfig(
            n_total=40, p=1, covariates_observed=1, beta0=30.0,
            beta_true=np.zeros(1), beta_w_true=0.0,
            methods=("clr", "bclr:lr:naive"), master_seed=1,
        )
        x = gen_design_matrix(cfg.n_pairs, cfg.p, cfg.noise_sd, seed=0)
        out = run_iteration(cfg, x, 0)
        assert out["clr"].failed
        assert "NoDiscordantPairs" in out["clr"].error
        assert out["bclr:lr:naive"].failed


class TestRunStudy:
    def test_empty_study_raises(self):
        cfg = SimConfig(n_total=100, n_sim=0)
        with pytest.raises(EmptyStudy):
            run_study(cfg)

    def test_thread_count_invariant(self):
        cfg = SimConfig(
            n_total=60, p=2, covariates_observed=1, n_sim=12,
            methods=("bclr:lr:g", "clr", "gee"), master_seed=3,
        )
        a = run_study(cfg, n_threads=1)
        b = run_study(cfg, n_threads=4)
        for name in cfg.methods:
            ma, mb = a.methods[name], b.methods[name]
            assert ma == mb

    def test_metrics_accounting_with_failures(self):
        # tiny studies produce occasional all-concordant iterations
        cfg = SimConfig(
            n_total=8, p=1, covariates_observed=1, beta0=1.5,
            beta_true=np.zeros(1), beta_w_true=0.0, n_sim=60,
            methods=("clr",), master_seed=7,
        )
        res = run_study(cfg)
        m = res.methods["clr"]
        assert m.n_failed > 0
        n_ok = res.n_sim - m.n_failed
        assert m.reject_rate_inclusive == pytest.approx(
            m.power_or_size * n_ok / res.n_sim
        )
        assert 0.0 <= m.coverage <= 1.0
        assert np.isfinite(m.mse)

    def test_aggregates_are_consistent(self):
        cfg = SimConfig(
            n_total=120, p=1, covariates_observed=1, beta_w_true=0.5,
            n_sim=25, methods=("lr", "clr"), master_seed=5,
        )
        res = run_study(cfg)
        assert res.n_sim == 25
        for m in res.methods.values():
            assert 0.0 <= m.power_or_size <= 1.0
            assert 0.0 <= m.coverage <= 1.0
            assert m.mc_se > 0
            assert m.mse >= 0
