"""Gaussian KDE of per-group predictions and the fair-zone / MADD-zone areas."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_GRID_SIZE = 512
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def standard_grid(grid_size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    return np.linspace(0.0, 1.0, grid_size)


@dataclass(frozen=True)
class KdeCurve:
    grid: np.ndarray
    f: np.ndarray
    bandwidth: float
    n_samples: int

    def integral(self) -> float:
        return float(np.trapezoid(self.f, self.grid))

    def to_dict(self) -> dict:
        out = {"bandwidth": float(self.bandwidth), "n_samples": int(self.n_samples),
               "f": [float(v) for v in self.f]}
        if not np.array_equal(self.grid, standard_grid(len(self.grid))):
            out["grid"] = [float(v) for v in self.grid]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "KdeCurve":
        f = np.asarray(data["f"], dtype=float)
        grid = np.asarray(data["grid"], dtype=float) if "grid" in data else standard_grid(len(f))
        return cls(grid, f, float(data["bandwidth"]), int(data["n_samples"]))


@dataclass(frozen=True)
class ZoneAreas:
    fair_zone: float
    madd_zone: float

    def to_dict(self) -> dict:
        return {"fair_zone": self.fair_zone, "madd_zone": self.madd_zone}


def scott_bandwidth(samples, fallback: float = 0.005) -> float:
    """Scott's rule in one dimension: ``n**(-1/5) * std(samples, ddof=1)``.

    Falls back to ``fallback`` (half the probability step by convention) when
    the spread is zero or fewer than two samples are given.
    """
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    # compare values, not the std: identical floats can give a std of ~1e-17
    if n < 2 or x.min() == x.max():
        log.warning("degenerate sample (n=%d, zero spread); using fallback bandwidth %g", n, fallback)
        return float(fallback)
    return float(n ** (-0.2) * np.std(x, ddof=1))


def kde(samples, bandwidth: float, grid_size: int = DEFAULT_GRID_SIZE) -> KdeCurve:
    """Gaussian kernel density estimate on ``grid_size`` points over [0, 1].

    No boundary correction: kernel mass falling outside [0, 1] is lost.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("cannot estimate a density from zero samples")
    grid = standard_grid(grid_size)
    # Samples are usually rounded to a coarse grid; evaluate each distinct value once.
    values, counts = np.unique(x, return_counts=True)
    z = (grid[:, None] - values[None, :]) / bandwidth
    f = (np.exp(-0.5 * z * z) @ counts) * (_INV_SQRT_2PI / (x.size * bandwidth))
    return KdeCurve(grid, f, float(bandwidth), int(x.size))


def zone_areas(c0: KdeCurve, c1: KdeCurve) -> ZoneAreas:
    if c0.grid.shape != c1.grid.shape or not np.array_equal(c0.grid, c1.grid):
        raise ValueError("KDE curves are evaluated on different grids")
    fair = np.trapezoid(np.minimum(c0.f, c1.f), c0.grid)
    red = np.trapezoid(np.abs(c0.f - c1.f), c0.grid)
    return ZoneAreas(float(fair), float(red))
