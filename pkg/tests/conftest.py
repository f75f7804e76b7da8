"""Shared builders for synthetic paired data."""

import numpy as np
import pytest

from pairlogit import (
    DiscordantDiffs,
    PairedDataset,
    difference_discordant,
    partition_pairs,
)


def make_paired(
    n_pairs=60,
    p=2,
    beta_w=1.0,
    beta=None,
    beta0=-0.5,
    noise_sd=0.05,
    seed=0,
    shuffle_first=False,
):
    """Build a PairedDataset from the matched-duplicate design."""
    rng = np.random.default_rng(seed)
    base = rng.uniform(-1.0, 1.0, (n_pairs, p))
    x = np.empty((2 * n_pairs, p))
    x[0::2] = base
    x[1::2] = base + rng.normal(0.0, noise_sd, (n_pairs, p))
    if shuffle_first:
        x[:, 0] = x[rng.permutation(2 * n_pairs), 0]
    w = np.empty(2 * n_pairs, dtype=np.int8)
    coin = rng.integers(0, 2, n_pairs)
    w[0::2] = coin
    w[1::2] = 1 - coin
    if beta is None:
        beta = np.ones(p)
    eta = beta0 + x @ np.asarray(beta, dtype=float) + beta_w * w
    y = (rng.random(2 * n_pairs) < 1.0 / (1.0 + np.exp(-eta))).astype(np.int8)
    return PairedDataset(
        pair_id=np.repeat(np.arange(n_pairs), 2),
        treatment=w,
        response=y,
        covariates=x,
    )


def make_diffs(n=40, p=2, beta_w=0.8, beta=None, seed=0):
    """Discordant differences drawn directly from the conditional model."""
    rng = np.random.default_rng(seed)
    dx = rng.normal(0.0, 1.0, (n, p))
    if beta is None:
        beta = 0.5 * np.ones(p)
    eta = beta_w + dx @ np.asarray(beta, dtype=float)
    z = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(np.int8)
    return DiscordantDiffs(delta_x=dx, case_is_treated=z)


@pytest.fixture
def paired_dataset():
    return make_paired(seed=3)


@pytest.fixture
def paired_split(paired_dataset):
    part = partition_pairs(paired_dataset)
    diffs = difference_discordant(paired_dataset, part)
    return paired_dataset, part, diffs
