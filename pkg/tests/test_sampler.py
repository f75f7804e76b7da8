"""Sampler behavior: calibration on a known target, determinism, failure
modes, Gibbs self-consistency, and diagnostics."""

import numpy as np
import pytest

from pairlogit import (
    AllDivergent,
    DiscordantDiffs,
    PosteriorSamples,
    PriorKind,
    PriorSpec,
    SamplerConfig,
    build_prior_spec,
    diagnose,
    difference_discordant,
    partition_pairs,
    premodel_concordant,
    sample_posterior,
)
from pairlogit.sampler import sample_gaussian_target

from conftest import make_diffs, make_paired


def fitted_spec(kind="naive", seed=3, n_pairs=60, tau2=100.0):
    data = make_paired(n_pairs=n_pairs, seed=seed)
    part = partition_pairs(data)
    diffs = difference_discordant(data, part)
    pre = premodel_concordant(data, part, "lr")
    return diffs, build_prior_spec(kind, pre, diffs, tau2=tau2)


class TestGaussianCalibration:
    def test_moments_match_known_target(self):
        """The transition kernel against a fixed correlated Gaussian must
        recover its mean and covariance."""
        mean = np.array([1.0, -2.0, 0.5])
        cov = np.array(
            [[1.0, 0.6, 0.2], [0.6, 2.0, -0.3], [0.2, -0.3, 0.5]]
        )
        prec = np.linalg.inv(cov)
        cfg = SamplerConfig(chains=4, warmup=600, draws_per_chain=600, seed=42)
        draws, accept, div = sample_gaussian_target(mean, prec, cfg)
        assert div.sum() == 0
        assert accept.mean() > 0.6
        flat = draws.reshape(-1, 3)
        samples = PosteriorSamples(
            beta_w_draws=draws[:, :, 0],
            beta_draws=draws[:, :, 1:],
            g_draws=None,
            accept_rate=accept,
            divergence_count=div,
        )
        diag = diagnose(samples)
        assert diag.rhat.max() < 1.05
        for k in range(3):
            ess = max(diag.ess.min(), 50.0)
            mcse = np.sqrt(cov[k, k] / ess)
            assert abs(flat[:, k].mean() - mean[k]) < 5 * mcse
        est_cov = np.cov(flat.T)
        np.testing.assert_allclose(est_cov, cov, rtol=0.25, atol=0.08)

    def test_standard_normal_sd(self):
        draws, _, _ = sample_gaussian_target(
            np.zeros(1), np.eye(1),
            SamplerConfig(chains=2, warmup=400, draws_per_chain=1000, seed=7),
        )
        sd = draws.reshape(-1).std()
        assert 0.9 < sd < 1.1


class TestDeterminism:
    def test_same_seed_same_draws(self):
        diffs, spec = fitted_spec("g")
        cfg = SamplerConfig(chains=2, warmup=200, draws_per_chain=150, seed=9)
        a = sample_posterior(diffs, spec, cfg)
        b = sample_posterior(diffs, spec, cfg)
        np.testing.assert_array_equal(a.beta_w_draws, b.beta_w_draws)
        np.testing.assert_array_equal(a.g_draws, b.g_draws)

    def test_thread_count_invariant(self):
        diffs, spec = fitted_spec("hybrid")
        cfg = SamplerConfig(chains=4, warmup=200, draws_per_chain=100, seed=5)
        a = sample_posterior(diffs, spec, cfg, n_threads=1)
        b = sample_posterior(diffs, spec, cfg, n_threads=8)
        np.testing.assert_array_equal(a.beta_w_draws, b.beta_w_draws)
        np.testing.assert_array_equal(a.beta_draws, b.beta_draws)
        np.testing.assert_array_equal(a.g_draws, b.g_draws)

    def test_different_seeds_differ(self):
        diffs, spec = fitted_spec()
        a = sample_posterior(
            diffs, spec, SamplerConfig(chains=1, warmup=100, draws_per_chain=50, seed=1)
        )
        b = sample_posterior(
            diffs, spec, SamplerConfig(chains=1, warmup=100, draws_per_chain=50, seed=2)
        )
        assert not np.array_equal(a.beta_w_draws, b.beta_w_draws)


class TestPosteriorShapes:
    @pytest.mark.parametrize("kind", ["naive", "g", "pmp", "hybrid"])
    def test_shapes_and_health(self, kind):
        diffs, spec = fitted_spec(kind)
        cfg = SamplerConfig(chains=2, warmup=300, draws_per_chain=200, seed=13)
        s = sample_posterior(diffs, spec, cfg)
        assert s.beta_w_draws.shape == (2, 200)
        assert s.beta_draws.shape == (2, 200, 2)
        if PriorKind(kind).has_g:
            assert s.g_draws.shape == (2, 200)
            assert (s.g_draws > 0).all()
        else:
            assert s.g_draws is None
        # the g prior has a heavy tail; tolerate isolated divergences
        assert s.divergence_count.sum() <= 0.02 * s.beta_w_draws.size
        assert 0.5 < s.accept_rate.mean() <= 1.0
        assert np.isfinite(s.pooled_beta_w()).all()

    def test_prior_only_bypass(self):
        """Zero discordant pairs: the chains must sample the prior itself."""
        empty = DiscordantDiffs(
            delta_x=np.zeros((0, 1)), case_is_treated=np.zeros(0, dtype=int)
        )
        spec = PriorSpec(
            kind=PriorKind.NAIVE,
            b_c=np.array([0.7]),
            sigma_c=np.array([[0.25]]),
            n_discordant=0,
            tau2=4.0,
        )
        cfg = SamplerConfig(chains=4, warmup=500, draws_per_chain=500, seed=3)
        s = sample_posterior(empty, spec, cfg)
        bw = s.pooled_beta_w()
        beta = s.beta_draws.reshape(-1)
        assert abs(bw.mean()) < 0.25
        assert abs(bw.std() - 2.0) < 0.3
        assert abs(beta.mean() - 0.7) < 0.06
        assert abs(beta.std() - 0.5) < 0.08

    def test_gibbs_matches_conditional_mean(self):
        """mean(1/g) over draws must agree with the average conditional
        expectation computed from the beta draws."""
        diffs, spec = fitted_spec("g", n_pairs=80, seed=10)
        cfg = SamplerConfig(chains=4, warmup=400, draws_per_chain=500, seed=21)
        s = sample_posterior(diffs, spec, cfg)
        prec = spec.prec_c
        deltas = s.beta_draws.reshape(-1, spec.p) - spec.b_c
        q = np.einsum("ij,jk,ik->i", deltas, prec, deltas)
        cond_mean = (0.5 + 0.5 * spec.p) / (0.5 * (spec.n_discordant + q))
        direct = np.mean(1.0 / s.g_draws)
        assert abs(direct - cond_mean.mean()) / cond_mean.mean() < 0.05


class TestFailureModes:
    def test_pmp_degenerate_information_all_divergent(self):
        # constant difference column absorbs the treatment regressor: the
        # information factor is identically zero and no transition can move
        dx = np.full((10, 1), 2.0)
        z = np.array([1, 0] * 5)
        diffs = DiscordantDiffs(delta_x=dx, case_is_treated=z)
        spec = PriorSpec(
            kind=PriorKind.PMP,
            b_c=np.zeros(1),
            sigma_c=np.eye(1),
            n_discordant=10,
            diffs=diffs,
        )
        cfg = SamplerConfig(chains=1, warmup=50, draws_per_chain=50, seed=0)
        with pytest.raises(AllDivergent):
            sample_posterior(diffs, spec, cfg)

    def test_pmp_drift_restart_exhaustion(self):
        """Initialization far outside the drift guard must trigger the
        restart path and then fail once the budget is spent."""
        diffs, spec = fitted_spec("pmp", tau2=100.0)
        tripped = False
        for seed in range(30):
            cfg = SamplerConfig(
                chains=1, warmup=3, draws_per_chain=5, seed=seed, init_jitter=90.0
            )
            try:
                sample_posterior(diffs, spec, cfg)
            except AllDivergent as exc:
                if "drift" in str(exc):
                    tripped = True
                    break
        assert tripped

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SamplerConfig(chains=0)
        with pytest.raises(ValueError):
            SamplerConfig(target_accept=1.5)
        with pytest.raises(ValueError):
            SamplerConfig(draws_per_chain=0)


class TestDiagnostics:
    def test_rhat_near_one_for_iid(self):
        rng = np.random.default_rng(0)
        s = PosteriorSamples(
            beta_w_draws=rng.normal(0, 1, (4, 500)),
            beta_draws=rng.normal(0, 1, (4, 500, 1)),
            g_draws=None,
            accept_rate=np.ones(4),
            divergence_count=np.zeros(4, dtype=int),
        )
        d = diagnose(s)
        assert d.rhat.max() < 1.02
        total = 2000
        assert 0.5 * total < d.ess[0] <= 1.5 * total

    def test_rhat_detects_disjoint_chains(self):
        rng = np.random.default_rng(1)
        bw = np.vstack([rng.normal(0, 1, 400), rng.normal(4, 1, 400)])
        s = PosteriorSamples(
            beta_w_draws=bw,
            beta_draws=np.zeros((2, 400, 0)),
            g_draws=None,
            accept_rate=np.ones(2),
            divergence_count=np.zeros(2, dtype=int),
        )
        d = diagnose(s)
        assert d.rhat[0] > 1.5

    def test_constant_draws(self):
        s = PosteriorSamples(
            beta_w_draws=np.full((2, 100), 3.14),
            beta_draws=np.zeros((2, 100, 0)),
            g_draws=None,
            accept_rate=np.ones(2),
            divergence_count=np.zeros(2, dtype=int),
        )
        d = diagnose(s)
        assert d.rhat[0] == 1.0

    def test_autocorrelated_chain_has_reduced_ess(self):
        rng = np.random.default_rng(2)
        # AR(1) with phi = 0.9: true ESS factor (1-phi)/(1+phi) ~ 0.053
        n, phi = 2000, 0.9
        chains = np.empty((2, n))
        for c in range(2):
            x = np.empty(n)
            x[0] = rng.normal()
            for t in range(1, n):
                x[t] = phi * x[t - 1] + rng.normal() * np.sqrt(1 - phi**2)
            chains[c] = x
        s = PosteriorSamples(
            beta_w_draws=chains,
            beta_draws=np.zeros((2, n, 0)),
            g_draws=None,
            accept_rate=np.ones(2),
            divergence_count=np.zeros(2, dtype=int),
        )
        d = diagnose(s)
        factor = d.ess[0] / (2 * n)
        assert 0.02 < factor < 0.12

    def test_names_include_g(self):
        diffs, spec = fitted_spec("g")
        s = sample_posterior(
            diffs, spec, SamplerConfig(chains=2, warmup=150, draws_per_chain=100, seed=4)
        )
        d = diagnose(s)
        assert d.names == ["beta_w", "beta[0]", "beta[1]", "g"]
