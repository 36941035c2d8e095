"""Volatile/Stable classification and volatility-based firm ranking.

Two rules are supported: a fixed threshold on a firm's own rolling
volatility, and a per-fold comparison against the cross-sectional median.
Boundary values (exactly at the threshold or the median) classify Stable
under both rules.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError
from .market_data import VolatilitySeries

__all__ = [
    "RegimeLabel",
    "PolicyKind",
    "RegimePolicy",
    "RegimeAssignment",
    "classify_threshold",
    "classify_median",
    "rank_by_volatility",
]

DEFAULT_THRESHOLD_WINDOW = 30
DEFAULT_MEDIAN_WINDOW = 21
DEFAULT_TAU = 0.025


class RegimeLabel(enum.Enum):
    VOLATILE = "Volatile"
    STABLE = "Stable"


class PolicyKind(enum.Enum):
    THRESHOLD = "threshold"
    CROSS_SECTIONAL_MEDIAN = "median"


@dataclass(frozen=True)
class RegimePolicy:
    """Which rule labels firms, and the volatility window feeding it.

    Threshold policies read 30-day volatility of simple returns against a
    fixed cutoff; median policies read 21-day volatility of log returns
    against the cross-section at each fold.
    """

    kind: PolicyKind
    vol_window: int
    tau: float | None = None

    def __post_init__(self) -> None:
        if self.vol_window < 2:
            raise EvaluationError(f"volatility window must be at least 2, got {self.vol_window}")
        if self.kind is PolicyKind.THRESHOLD:
            if self.tau is None or not self.tau > 0:
                raise EvaluationError(f"threshold policy needs tau > 0, got {self.tau}")

    @classmethod
    def threshold(cls, vol_window: int = DEFAULT_THRESHOLD_WINDOW, tau: float = DEFAULT_TAU):
        return cls(PolicyKind.THRESHOLD, vol_window, tau)

    @classmethod
    def median(cls, vol_window: int = DEFAULT_MEDIAN_WINDOW):
        return cls(PolicyKind.CROSS_SECTIONAL_MEDIAN, vol_window, None)


@dataclass(frozen=True)
class RegimeAssignment:
    """Per-fold labelling of the whole universe under one policy."""

    fold_id: int
    labels: dict[str, RegimeLabel]
    policy: RegimePolicy
    as_of_index: int


def classify_threshold(vol: VolatilitySeries, at: int, tau: float) -> RegimeLabel:
    """Volatile iff the volatility at return index ``at`` strictly exceeds ``tau``."""
    sigma = vol.at_return_index(at)
    return RegimeLabel.VOLATILE if sigma > tau else RegimeLabel.STABLE


def classify_median(vols: dict[str, float]) -> dict[str, RegimeLabel]:
    """Volatile iff a firm's volatility strictly exceeds the cross-sectional median.

    Ties at the median go to Stable; the result does not depend on the
    iteration order of the input mapping.
    """
    if len(vols) < 2:
        raise EvaluationError(f"median classification needs at least 2 firms, got {len(vols)}")
    med = float(np.median(list(vols.values())))
    return {
        ticker: RegimeLabel.VOLATILE if sigma > med else RegimeLabel.STABLE
        for ticker, sigma in vols.items()
    }


def rank_by_volatility(vols: dict[str, float], k: int) -> tuple[list[str], list[str]]:
    """The ``k`` most and ``k`` least volatile tickers by full-sample volatility.

    Returns ``(top_k, bottom_k)`` with top_k sorted by descending volatility
    and bottom_k ascending; volatility ties break by lexicographic ticker so
    the selection is deterministic.  Requires ``2k`` firms so the two lists
    are disjoint.
    """
    if k < 0:
        raise EvaluationError(f"k must be non-negative, got {k}")
    if 2 * k > len(vols):
        raise EvaluationError(f"k={k} too large for {len(vols)} firms (need 2k <= firms)")
    # membership comes from one global ordering so the lists stay disjoint
    # even when ties straddle the boundary
    ascending = sorted(vols, key=lambda t: (vols[t], t))
    bottom_k = ascending[:k]
    top_k = sorted(ascending[len(ascending) - k:], key=lambda t: (-vols[t], t))
    return top_k, bottom_k
