"""Exception types raised across the package.

Every error that callers are expected to catch derives from PairlogitError,
so `except PairlogitError` at an entry point is a complete net.
"""


class PairlogitError(Exception):
    """Base class for all package errors."""


class MalformedInput(PairlogitError):
    """Input rows violate the ingestion contract (bad values, missing fields)."""


class MalformedPairing(PairlogitError):
    """Pair structure is broken: a pair id without exactly one treated and one
    control row, or a pair id appearing a number of times other than two."""


class OddRowCount(PairlogitError):
    """Dataset has an odd number of rows, so it cannot be fully paired."""


class DimensionMismatch(PairlogitError):
    """Coefficient vector length does not match the covariate count."""


class NoDiscordantPairs(PairlogitError):
    """Every pair is concordant; the conditional likelihood is empty."""


class InsufficientConcordant(PairlogitError):
    """Too few concordant pairs to fit the pre-model."""


class SeparationDetected(PairlogitError):
    """Logistic fit diverged: some coefficient ran away, which indicates
    (quasi-)complete separation in the data."""


class RankDeficient(PairlogitError):
    """A required matrix is numerically singular even after diagonal jitter."""


class SingularSandwich(PairlogitError):
    """The sandwich covariance for the paired GEE could not be formed."""


class NonFiniteState(PairlogitError):
    """A parameter state contains NaN or infinity where finite values are required."""


class AllDivergent(PairlogitError):
    """A sampling chain lost more than half of its post-warmup transitions to
    divergences, or failed its drift restart; the posterior draws are unusable."""


class EmptyDraws(PairlogitError):
    """An interval or summary was requested from zero draws."""


class TooFewDraws(PairlogitError):
    """Not enough draws for a density-based interval to be meaningful."""


class EmptyStudy(PairlogitError):
    """A simulation study was configured with zero iterations."""
