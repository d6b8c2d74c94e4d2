"""Confidence intervals on arm rewards and the gap quantities built from them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError
from .kernel_core import ArmState

__all__ = [
    "ConfidenceParams",
    "ConfidenceBundle",
    "GapDecision",
    "confidence_interval",
    "bounds_from_posterior",
    "gap_indices",
    "gap_from_bounds",
    "choose_wider",
    "hardness",
    "total_hardness",
]


@dataclass(frozen=True)
class ConfidenceParams:
    """``alpha`` is the combined exploration scale, ``lam`` the ridge regulariser."""

    alpha: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidArgumentError("alpha must be positive")
        if not self.lam > 0:
            raise InvalidArgumentError("lambda must be positive")

    @property
    def scale(self) -> float:
        """Half-width per unit of posterior standard deviation."""
        return self.alpha / math.sqrt(self.lam)


@dataclass(frozen=True)
class ConfidenceBundle:
    mean: float
    sigma: float
    width: float
    lower: float
    upper: float


@dataclass
class GapDecision:
    B: np.ndarray
    J: int
    j: int
    widths: np.ndarray
    chosen: int | None = None


def bounds_from_posterior(mean, var, params: ConfidenceParams):
    """Vectorised ``(sigma, width, lower, upper)`` from posterior mean/variance."""
    sigma = np.sqrt(var)
    half = params.scale * sigma
    lower, upper = mean - half, mean + half
    # width taken as the difference so that upper - lower == width holds bit-for-bit
    return sigma, upper - lower, lower, upper


def confidence_interval(state: ArmState, x, params: ConfidenceParams) -> ConfidenceBundle:
    if state.lam != params.lam:
        raise InvalidArgumentError(
            f"confidence lambda {params.lam} differs from regression lambda {state.lam}"
        )
    mean, var = state.posterior(x)
    sigma, width, lower, upper = bounds_from_posterior(mean, var, params)
    return ConfidenceBundle(mean, float(sigma), float(width), float(lower), float(upper))


def gap_from_bounds(upper: np.ndarray, lower: np.ndarray, widths: np.ndarray) -> GapDecision:
    """``B``, ``J`` and ``j`` from per-arm bounds; ties go to the lowest index.

    ``max_{i != a} U_i`` is read off the two largest uppers, so this is O(A).
    """
    upper = np.asarray(upper, dtype=float)
    lower = np.asarray(lower, dtype=float)
    A = upper.size
    if A < 2:
        raise InvalidArgumentError("need at least two arms")
    top = int(np.argmax(upper))
    rest = upper.copy()
    rest[top] = -np.inf
    second = rest.max()
    best_other = np.full(A, upper[top])
    best_other[top] = second
    B = best_other - lower
    J = int(np.argmin(B))
    masked = upper.copy()
    masked[J] = -np.inf
    j = int(np.argmax(masked))
    return GapDecision(B=B, J=J, j=j, widths=np.asarray(widths, dtype=float))


def gap_indices(bundles: Sequence[ConfidenceBundle]) -> GapDecision:
    if len(bundles) < 2:
        raise InvalidArgumentError("need at least two arms")
    upper = np.array([b.upper for b in bundles])
    lower = np.array([b.lower for b in bundles])
    widths = np.array([b.width for b in bundles])
    return gap_from_bounds(upper, lower, widths)


def choose_wider(decision: GapDecision) -> int:
    """Pick whichever of ``J``/``j`` has the wider interval, lower index on ties."""
    J, j = decision.J, decision.j
    wJ, wj = decision.widths[J], decision.widths[j]
    if wJ > wj:
        chosen = J
    elif wj > wJ:
        chosen = j
    else:
        chosen = min(J, j)
    decision.chosen = chosen
    return chosen


def hardness(delta_gap: float, epsilon: float) -> float:
    if not epsilon > 0:
        raise InvalidArgumentError("epsilon must be positive")
    if delta_gap < 0:
        raise InvalidArgumentError("gap must be non-negative")
    return max(0.5 * (delta_gap + epsilon), epsilon)


def total_hardness(delta_gaps, epsilon: float) -> float:
    """Sum over arms of ``hardness(gap, eps) ** -2``."""
    return float(sum(hardness(float(d), epsilon) ** -2 for d in delta_gaps))
