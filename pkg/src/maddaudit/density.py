"""Discretization of predicted probabilities into per-group density vectors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np


class StepError(ValueError):
    """Raised for a probability step whose inverse is not an integer."""


class EmptyGroupError(ValueError):
    """Raised when a group has no samples to audit."""


@dataclass(frozen=True)
class ProbabilityStep:
    """Sampling step ``e`` of the probability grid ``{0, e, 2e, ..., 1}``.

    Only steps with an integer inverse are accepted, so the grid has exactly
    ``m = 1/e + 1`` points.
    """

    e: float
    n_intervals: int = field(init=False, repr=False)

    def __post_init__(self):
        e = float(self.e)
        if not np.isfinite(e) or not 0.0 < e <= 1.0:
            raise StepError(f"step e={self.e!r} must lie in (0, 1]")
        n = int(round(1.0 / e))
        if abs(n * e - 1.0) > 1e-9:
            raise StepError(
                f"step e={self.e!r} does not divide 1: the grid size m = 1/e + 1 "
                f"must be an integer (try 0.5, 0.1, 0.05, 0.01, ...)"
            )
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "n_intervals", n)

    @property
    def m(self) -> int:
        return self.n_intervals + 1

    def grid(self) -> np.ndarray:
        """Grid values ``k*e`` computed from integer indices."""
        return np.arange(self.m) / self.n_intervals


def _as_step(step) -> ProbabilityStep:
    return step if isinstance(step, ProbabilityStep) else ProbabilityStep(step)


def bin_index(p, step) -> np.ndarray:
    """Integer grid index of the nearest grid point, ties rounded half-up.

    Distances are measured from the exact binary value of each float, as
    Python's ``round`` does: the double nearest 0.235 lies just below the
    midpoint and goes to 0.23 at e = 0.01.
    """
    step = _as_step(step)
    p = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(p)) or np.any((p < 0.0) | (p > 1.0)):
        raise ValueError("probabilities must lie in [0, 1]")
    n = step.n_intervals
    x = p * n
    k = np.floor(x + 0.5).astype(np.int64)
    # p * n is rounded, so settle values close to a midpoint in exact arithmetic
    near = np.abs(x - np.floor(x) - 0.5) < 1e-9
    if np.any(near):
        k = np.array(k, copy=True)
        flat_k, flat_p = k.reshape(-1), p.reshape(-1)
        for i in np.flatnonzero(near.reshape(-1)):
            flat_k[i] = math.floor(Fraction(float(flat_p[i])) * n + Fraction(1, 2))
    return k


def round_prob(p, step):
    """Round ``p`` to the nearest multiple of the step (half-up at midpoints).

    >>> round_prob(0.09, 0.01), round_prob(0.09, 0.1)
    (0.09, 0.1)
    """
    step = _as_step(step)
    k = bin_index(p, step)
    out = k / step.n_intervals
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class DensityVector:
    step: ProbabilityStep
    d: np.ndarray
    n_samples: int

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if d.shape != (self.step.m,):
            raise ValueError(f"density vector must have length m={self.step.m}, got {d.shape}")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    @property
    def counts(self) -> np.ndarray:
        return np.rint(self.d * self.n_samples).astype(np.int64)

    def samples(self) -> np.ndarray:
        """The rounded probabilities this vector counts, in ascending order."""
        return np.repeat(self.step.grid(), self.counts)

    def to_dict(self) -> dict:
        return {"e": self.step.e, "n_samples": int(self.n_samples), "d": [float(v) for v in self.d]}

    @classmethod
    def from_dict(cls, data: dict) -> "DensityVector":
        return cls(ProbabilityStep(data["e"]), np.asarray(data["d"], dtype=float), int(data["n_samples"]))


def density_vector(probs: Iterable[float], step) -> DensityVector:
    """Relative frequency of each rounded probability on the grid."""
    step = _as_step(step)
    probs = np.asarray(list(probs) if not isinstance(probs, np.ndarray) else probs, dtype=float)
    if probs.size == 0:
        raise EmptyGroupError("cannot build a density vector from zero samples")
    counts = np.bincount(bin_index(probs.ravel(), step), minlength=step.m)
    return DensityVector(step, counts / probs.size, int(probs.size))


def split_by_group(records: Sequence) -> tuple[list[float], list[float]]:
    """Partition ``p_hat`` values of prediction records by their group.

    Order within each group follows the input order.
    """
    if len(records) == 0:
        raise ValueError("no prediction records to split")
    groups: tuple[list[float], list[float]] = ([], [])
    for r in records:
        g = int(r.group)
        if g not in (0, 1):
            raise ValueError(f"group must be 0 or 1, got {r.group!r}")
        groups[g].append(float(r.p_hat))
    for g, vals in enumerate(groups):
        if not vals:
            raise EmptyGroupError(f"group {g} has no samples; the audit is degenerate")
    return groups
