"""Model Absolute Density Distance and behavior indicators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .density import DensityVector

DEFAULT_GAP_THRESHOLD = 0.05
DEFAULT_PEAK_THRESHOLD = 0.25


class Behavior(str, Enum):
    UNEQUAL_TREATMENT = "UnequalTreatment"
    STEREOTYPICAL_JUDGEMENT = "StereotypicalJudgement"


@dataclass(frozen=True)
class MaddResult:
    value: float
    per_bin_abs_diff: np.ndarray
    mean_g0: float
    mean_g1: float
    peak_g0: float
    peak_g1: float

    @property
    def mean_gap(self) -> float:
        return self.mean_g1 - self.mean_g0

    def to_dict(self) -> dict:
        return {
            "value": float(self.value),
            "per_bin_abs_diff": [float(v) for v in self.per_bin_abs_diff],
            "mean_g0": float(self.mean_g0),
            "mean_g1": float(self.mean_g1),
            "mean_gap": float(self.mean_gap),
            "peak_g0": float(self.peak_g0),
            "peak_g1": float(self.peak_g1),
        }


def madd(d0: DensityVector, d1: DensityVector) -> MaddResult:
    """Sum over the probability grid of ``|d0_k - d1_k|``.

    Means and peaks are read off the (unsmoothed) density vectors. The sum
    is exactly rounded and capped at 2, the bound for two distributions,
    which float noise in the inputs could otherwise exceed by an ulp.
    """
    if d0.step != d1.step:
        raise ValueError(f"density vectors use different steps: e={d0.step.e} vs e={d1.step.e}")
    diff = np.abs(d0.d - d1.d)
    grid = d0.step.grid()
    return MaddResult(
        value=min(math.fsum(diff), 2.0),
        per_bin_abs_diff=diff,
        mean_g0=float(grid @ d0.d),
        mean_g1=float(grid @ d1.d),
        peak_g0=float(d0.d.max()),
        peak_g1=float(d1.d.max()),
    )


@dataclass(frozen=True)
class BehaviorFlags:
    flags: frozenset
    favored_group: int | None

    def to_dict(self) -> dict:
        return {"flags": sorted(f.value for f in self.flags), "favored_group": self.favored_group}


def classify_behavior(
    r: MaddResult,
    gap_threshold: float = DEFAULT_GAP_THRESHOLD,
    peak_threshold: float = DEFAULT_PEAK_THRESHOLD,
) -> BehaviorFlags:
    """Quantified reading of the two discriminatory behaviors.

    Unequal treatment is flagged when the group means differ by at least
    ``gap_threshold``; stereotypical judgement when either group puts at least
    ``peak_threshold`` of its mass on a single probability value. The favored
    group is the one with the higher mean (None when the means are equal).
    These thresholds are heuristics; the raw indicators stay in ``r``.
    """
    if gap_threshold < 0 or peak_threshold < 0:
        raise ValueError("thresholds must be non-negative")
    flags = set()
    gap = r.mean_gap
    if gap != 0.0 and abs(gap) >= gap_threshold:
        flags.add(Behavior.UNEQUAL_TREATMENT)
    if max(r.peak_g0, r.peak_g1) >= peak_threshold and r.value > 0.0:
        flags.add(Behavior.STEREOTYPICAL_JUDGEMENT)
    favored = None if gap == 0.0 else (1 if gap > 0 else 0)
    return BehaviorFlags(frozenset(flags), favored)
