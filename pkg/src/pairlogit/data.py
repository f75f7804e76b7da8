"""Paired dataset container, pair classification, and discordant differencing.

A dataset holds 2n rows, two per pair id: one treated, one control. Pairs
whose members share a response are concordant and carry no information for
the conditional likelihood; discordant pairs are reduced to covariate
differences (treated minus control) plus an indicator for whether the
treated member is the case.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    MalformedInput,
    MalformedPairing,
    NoDiscordantPairs,
    OddRowCount,
)


@dataclass(frozen=True)
class PairedDataset:
    """Row-level matched data: 2n rows, one treated and one control per pair.

    covariates excludes the treatment indicator; it is carried separately.
    """

    pair_id: np.ndarray
    treatment: np.ndarray
    response: np.ndarray
    covariates: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pair_id", np.asarray(self.pair_id))
        object.__setattr__(
            self, "treatment", np.asarray(self.treatment, dtype=np.int8)
        )
        object.__setattr__(
            self, "response", np.asarray(self.response, dtype=np.int8)
        )
        cov = np.ascontiguousarray(np.asarray(self.covariates, dtype=np.float64))
        if cov.ndim != 2:
            raise MalformedInput("covariates must be a 2-d array")
        object.__setattr__(self, "covariates", cov)

    @property
    def n_rows(self) -> int:
        return self.pair_id.shape[0]

    @property
    def n_pairs(self) -> int:
        return self.n_rows // 2

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]

    def validate(self) -> None:
        """Check structural invariants; raises on the first violation."""
        n = self.n_rows
        if n % 2 != 0:
            raise OddRowCount(f"dataset has {n} rows, expected an even count")
        if self.treatment.shape[0] != n or self.response.shape[0] != n:
            raise MalformedInput("column lengths disagree with pair_id")
        if self.covariates.shape[0] != n:
            raise MalformedInput("covariate row count disagrees with pair_id")
        if not np.isfinite(self.covariates).all():
            bad = np.nonzero(~np.isfinite(self.covariates).all(axis=1))[0]
            raise MalformedInput(
                f"non-finite covariate values at rows {bad[:5].tolist()}"
            )
        for name, col in (("treatment", self.treatment), ("response", self.response)):
            vals = np.unique(col)
            if not np.isin(vals, (0, 1)).all():
                raise MalformedInput(f"{name} values outside {{0,1}}: {vals.tolist()}")
        uniq, inverse, counts = np.unique(
            self.pair_id, return_inverse=True, return_counts=True
        )
        if (counts != 2).any():
            offender = uniq[np.nonzero(counts != 2)[0][0]]
            raise MalformedPairing(
                f"pair id {offender!r} appears {counts[counts != 2][0]} times, expected 2"
            )
        treated_per_pair = np.bincount(inverse, weights=self.treatment)
        if (treated_per_pair != 1).any():
            offender = uniq[np.nonzero(treated_per_pair != 1)[0][0]]
            raise MalformedPairing(
                f"pair id {offender!r} does not have exactly one treated member"
            )


@dataclass(frozen=True)
class PairPartition:
    """Pair ids split by response agreement, in order of first appearance."""

    concordant: np.ndarray
    discordant: np.ndarray

    @property
    def n_concordant(self) -> int:
        return self.concordant.shape[0]

    @property
    def n_discordant(self) -> int:
        return self.discordant.shape[0]


@dataclass(frozen=True)
class DiscordantDiffs:
    """Differenced design for the conditional likelihood.

    delta_x[i] = covariates(treated) - covariates(control) for discordant
    pair i; case_is_treated[i] = 1 when the treated member is the case.
    """

    delta_x: np.ndarray
    case_is_treated: np.ndarray

    def __post_init__(self):
        dx = np.ascontiguousarray(np.asarray(self.delta_x, dtype=np.float64))
        z = np.asarray(self.case_is_treated, dtype=np.int8)
        if dx.ndim != 2:
            raise MalformedInput("delta_x must be a 2-d array")
        if z.shape[0] != dx.shape[0]:
            raise MalformedInput("case_is_treated length disagrees with delta_x")
        if z.size and not np.isin(np.unique(z), (0, 1)).all():
            raise MalformedInput("case_is_treated values outside {0,1}")
        object.__setattr__(self, "delta_x", dx)
        object.__setattr__(self, "case_is_treated", z)

    @property
    def n_pairs(self) -> int:
        return self.delta_x.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.delta_x.shape[1]


def _pair_layout(data: PairedDataset):
    """Unique pair ids with per-pair treated/control row indices, ordered by
    first appearance in the dataset."""
    uniq, inverse = np.unique(data.pair_id, return_inverse=True)
    k = uniq.shape[0]
    first_pos = np.full(k, data.n_rows, dtype=np.int64)
    np.minimum.at(first_pos, inverse, np.arange(data.n_rows))
    order = np.argsort(first_pos, kind="stable")
    rank = np.empty(k, dtype=np.int64)
    rank[order] = np.arange(k)

    treated_row = np.empty(k, dtype=np.int64)
    control_row = np.empty(k, dtype=np.int64)
    t_mask = data.treatment == 1
    treated_row[rank[inverse[t_mask]]] = np.nonzero(t_mask)[0]
    control_row[rank[inverse[~t_mask]]] = np.nonzero(~t_mask)[0]
    return uniq[order], treated_row, control_row


def partition_pairs(data: PairedDataset) -> PairPartition:
    """Split pairs into concordant and discordant sets by response agreement."""
    data.validate()
    ids, treated_row, control_row = _pair_layout(data)
    resp = data.response
    discordant_mask = resp[treated_row] != resp[control_row]
    return PairPartition(
        concordant=ids[~discordant_mask],
        discordant=ids[discordant_mask],
    )


def difference_discordant(
    data: PairedDataset, partition: PairPartition
) -> DiscordantDiffs:
    """Build the differenced design over the discordant pairs.

    Rows follow the pairs' order of first appearance in the dataset.
    """
    if partition.n_discordant == 0:
        raise NoDiscordantPairs("all pairs are concordant")
    ids, treated_row, control_row = _pair_layout(data)
    keep = np.isin(ids, partition.discordant)
    t_rows = treated_row[keep]
    c_rows = control_row[keep]
    delta_x = data.covariates[t_rows] - data.covariates[c_rows]
    case_is_treated = data.response[t_rows].astype(np.int8)
    return DiscordantDiffs(delta_x=delta_x, case_is_treated=case_is_treated)


def concordant_rows(data: PairedDataset, partition: PairPartition):
    """Row indices of concordant-pair members, grouped with each pair's two
    rows adjacent (dataset row order within the pair). Used by the pre-model,
    whose working-correlation structure needs clusters to be contiguous."""
    ids, treated_row, control_row = _pair_layout(data)
    keep = np.isin(ids, partition.concordant)
    t_rows = treated_row[keep]
    c_rows = control_row[keep]
    lo = np.minimum(t_rows, c_rows)
    hi = np.maximum(t_rows, c_rows)
    return np.stack([lo, hi], axis=1).reshape(-1)
