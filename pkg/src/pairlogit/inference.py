"""Posterior interval construction and the interval-based test.

Three interval methods over a pooled draw vector: equal-tailed credible
regions from interpolated quantiles, the minimal-width contiguous window
holding ceil((1-alpha) m) sorted draws, and a density-based highest-density
region that may return disjoint pieces for multimodal posteriors. The test
rejects theta0 when no interval piece contains it.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDraws, NonFiniteState, TooFewDraws

KDE_GRID_SIZE = 512
KDE_MIN_DRAWS = 100
_SQRT_2PI = math.sqrt(2.0 * math.pi)


class IntervalMethod(enum.Enum):
    EQUAL_TAILED = "equal_tailed"
    HPD_CONTIGUOUS = "hpd_contiguous"
    HPD_DISJOINT = "hpd_disjoint"


@dataclass(frozen=True)
class IntervalSet:
    """Disjoint closed intervals in ascending order, with their level."""

    intervals: tuple
    alpha: float
    method: IntervalMethod

    def __post_init__(self):
        object.__setattr__(
            self,
            "intervals",
            tuple((float(lo), float(hi)) for lo, hi in self.intervals),
        )

    def contains(self, x: float) -> bool:
        return any(lo <= x <= hi for lo, hi in self.intervals)

    def total_width(self) -> float:
        return sum(hi - lo for lo, hi in self.intervals)


@dataclass(frozen=True)
class TestDecision:
    theta0: float
    reject: bool
    interval_set: IntervalSet
    point_estimate: float


def _checked(draws) -> np.ndarray:
    draws = np.asarray(draws, dtype=np.float64).ravel()
    if draws.size == 0:
        raise EmptyDraws("no draws supplied")
    if not np.isfinite(draws).all():
        raise NonFiniteState("draws contain non-finite values")
    return draws


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def point_estimate(draws) -> float:
    """Posterior mean of the pooled draws."""
    return float(_checked(draws).mean())


def equal_tailed_cr(draws, alpha: float = 0.05) -> IntervalSet:
    """Central interval from the alpha/2 and 1-alpha/2 interpolated quantiles."""
    draws = _checked(draws)
    _check_alpha(alpha)
    lo, hi = np.quantile(draws, [alpha / 2.0, 1.0 - alpha / 2.0])
    return IntervalSet(
        intervals=((lo, hi),), alpha=alpha, method=IntervalMethod.EQUAL_TAILED
    )


def hpd_contiguous(draws, alpha: float = 0.05) -> IntervalSet:
    """Narrowest window of ceil((1-alpha) m) consecutive sorted draws.

    Ties in width resolve to the leftmost window.
    """
    draws = _checked(draws)
    _check_alpha(alpha)
    m = draws.size
    srt = np.sort(draws)
    k = math.ceil((1.0 - alpha) * m)
    k = min(max(k, 1), m)
    if k == m:
        lo, hi = srt[0], srt[-1]
    else:
        widths = srt[k - 1 :] - srt[: m - k + 1]
        i = int(np.argmin(widths))
        lo, hi = srt[i], srt[i + k - 1]
    return IntervalSet(
        intervals=((lo, hi),), alpha=alpha, method=IntervalMethod.HPD_CONTIGUOUS
    )


def _silverman_bandwidth(draws: np.ndarray) -> float:
    m = draws.size
    sd = float(draws.std(ddof=1))
    q75, q25 = np.quantile(draws, [0.75, 0.25])
    iqr = float(q75 - q25)
    spread = sd if iqr <= 0.0 else min(sd, iqr / 1.34)
    return 0.9 * spread * m ** (-0.2)


def _kde_on_grid(draws: np.ndarray, grid: np.ndarray, h: float) -> np.ndarray:
    dens = np.empty(grid.size)
    inv = 1.0 / (h * draws.size * _SQRT_2PI)
    for j in range(grid.size):
        u = (grid[j] - draws) / h
        dens[j] = inv * float(np.exp(-0.5 * u * u).sum())
    return dens


def hpd_disjoint(draws, alpha: float = 0.05) -> IntervalSet:
    """Highest-density region from a Gaussian kernel density estimate.

    The density threshold is bisected so that at least ceil((1-alpha) m)
    draws sit at or above it, then the region is read off the density grid
    with linear interpolation at the crossings. Multimodal draws can yield
    several intervals.
    """
    draws = _checked(draws)
    _check_alpha(alpha)
    m = draws.size
    if m < KDE_MIN_DRAWS:
        raise TooFewDraws(
            f"{m} draws; density-based intervals need at least {KDE_MIN_DRAWS}"
        )
    if np.ptp(draws) == 0.0:
        c = float(draws[0])
        return IntervalSet(
            intervals=((c, c),), alpha=alpha, method=IntervalMethod.HPD_DISJOINT
        )
    h = _silverman_bandwidth(draws)
    if h <= 0.0:
        c = float(np.median(draws))
        return IntervalSet(
            intervals=((c, c),), alpha=alpha, method=IntervalMethod.HPD_DISJOINT
        )
    grid = np.linspace(draws.min() - 3.0 * h, draws.max() + 3.0 * h, KDE_GRID_SIZE)
    dens = _kde_on_grid(draws, grid, h)
    dens_at = np.interp(draws, grid, dens)

    k = min(max(math.ceil((1.0 - alpha) * m), 1), m)
    lo_t, hi_t = 0.0, float(dens_at.max())
    # keep the invariant count(lo_t) >= k while shrinking the bracket
    for _ in range(100):
        mid = 0.5 * (lo_t + hi_t)
        if int((dens_at >= mid).sum()) >= k:
            lo_t = mid
        else:
            hi_t = mid
    threshold = lo_t

    above = dens >= threshold
    pieces = []
    j = 0
    n = grid.size
    while j < n:
        if not above[j]:
            j += 1
            continue
        start = j
        while j + 1 < n and above[j + 1]:
            j += 1
        end = j
        if start == 0:
            left = grid[0]
        else:
            d0, d1 = dens[start - 1], dens[start]
            left = grid[start] if d1 == d0 else grid[start - 1] + (
                threshold - d0
            ) * (grid[start] - grid[start - 1]) / (d1 - d0)
        if end == n - 1:
            right = grid[n - 1]
        else:
            d0, d1 = dens[end], dens[end + 1]
            right = grid[end] if d0 == d1 else grid[end] + (d0 - threshold) * (
                grid[end + 1] - grid[end]
            ) / (d0 - d1)
        pieces.append((left, right))
        j += 1
    if not pieces:
        c = float(np.median(draws))
        pieces = [(c, c)]
    return IntervalSet(
        intervals=tuple(pieces), alpha=alpha, method=IntervalMethod.HPD_DISJOINT
    )


def decide(
    draws,
    theta0: float = 0.0,
    alpha: float = 0.05,
    method: IntervalMethod = IntervalMethod.EQUAL_TAILED,
) -> TestDecision:
    """Interval-based test: reject when theta0 falls outside every piece."""
    if isinstance(method, str):
        method = IntervalMethod(method.lower())
    if method is IntervalMethod.EQUAL_TAILED:
        iset = equal_tailed_cr(draws, alpha)
    elif method is IntervalMethod.HPD_CONTIGUOUS:
        iset = hpd_contiguous(draws, alpha)
    else:
        iset = hpd_disjoint(draws, alpha)
    return TestDecision(
        theta0=float(theta0),
        reject=not iset.contains(theta0),
        interval_set=iset,
        point_estimate=point_estimate(draws),
    )
