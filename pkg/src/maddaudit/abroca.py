"""Per-group ROC curves and the absolute area between them (ABROCA)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray

    def __post_init__(self):
        fpr = np.asarray(self.fpr, dtype=float)
        tpr = np.asarray(self.tpr, dtype=float)
        if fpr.shape != tpr.shape or fpr.ndim != 1 or fpr.size < 2:
            raise ValueError("ROC curve needs matching 1-d fpr/tpr arrays with at least two points")
        if (fpr[0], tpr[0]) != (0.0, 0.0) or (fpr[-1], tpr[-1]) != (1.0, 1.0):
            raise ValueError("ROC curve must start at (0, 0) and end at (1, 1)")
        if np.any(np.diff(fpr) < 0) or np.any(np.diff(tpr) < 0):
            raise ValueError("ROC coordinates must be nondecreasing")
        object.__setattr__(self, "fpr", fpr)
        object.__setattr__(self, "tpr", tpr)

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

    def auc(self) -> float:
        return float(np.trapezoid(self.tpr, self.fpr))

    def to_dict(self) -> dict:
        return {"fpr": self.fpr.tolist(), "tpr": self.tpr.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "RocCurve":
        return cls(np.asarray(data["fpr"]), np.asarray(data["tpr"]))


@dataclass(frozen=True)
class AbrocaResult:
    value: float
    auc_g0: float
    auc_g1: float

    def to_dict(self) -> dict:
        return {"value": self.value, "auc_g0": self.auc_g0, "auc_g1": self.auc_g1}


def roc_curve(scores, labels) -> RocCurve:
    """ROC points for thresholds swept from +inf down over the distinct scores.

    Tied scores enter together as one step; collinear points are kept, only
    exact duplicates are dropped.
    """
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = int((labels == 0).sum())
    if n_pos + n_neg != labels.size:
        raise ValueError("labels must be 0 or 1")
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC curve is undefined when labels contain a single class")

    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    p = pos[order]
    tp = np.cumsum(p)
    fp = np.cumsum(~p)
    # last index of each tie group
    ends = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    fpr = np.r_[0.0, fp[ends] / n_neg]
    tpr = np.r_[0.0, tp[ends] / n_pos]
    keep = np.r_[True, (np.diff(fpr) != 0) | (np.diff(tpr) != 0)]
    return RocCurve(fpr[keep], tpr[keep])


def _collapse(c: RocCurve):
    """Unique fpr values with the lowest and highest tpr reached at each."""
    u, first = np.unique(c.fpr, return_index=True)
    last = np.r_[first[1:] - 1, c.fpr.size - 1]
    return u, c.tpr[first], c.tpr[last]


def interpolate(c: RocCurve, x) -> np.ndarray:
    """TPR at ``x``; at a vertical segment the upper TPR is returned."""
    return _eval(c, x, side="right")


def _eval(c: RocCurve, x: np.ndarray, side: str) -> np.ndarray:
    """Piecewise-linear TPR with one-sided limits at vertical jumps.

    ``side='right'`` gives the limit from the right (upper TPR at a jump),
    ``side='left'`` the limit from the left (lower TPR at a jump).
    """
    u, lo, hi = _collapse(c)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    j = np.clip(np.searchsorted(u, x, side="right") - 1, 0, u.size - 2)
    x0, x1 = u[j], u[j + 1]
    out = hi[j] + (x - x0) / (x1 - x0) * (lo[j + 1] - hi[j])
    # breakpoints take the one-sided value exactly
    k = np.minimum(np.searchsorted(u, x), u.size - 1)
    return np.where(u[k] == x, hi[k] if side == "right" else lo[k], out)


def _abs_linear_integral(a: np.ndarray, b: np.ndarray, width: np.ndarray) -> np.ndarray:
    """Exact integral of ``|g|`` for ``g`` linear from ``a`` to ``b`` over ``width``."""
    same = (a * b) >= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        crossing = (a * a + b * b) / (2.0 * np.abs(a - b))
    return width * np.where(same, 0.5 * (np.abs(a) + np.abs(b)), crossing)


def abroca(c0: RocCurve, c1: RocCurve) -> AbrocaResult:
    """Integral over fpr in [0, 1] of ``|tpr0(fpr) - tpr1(fpr)|``.

    Both curves are evaluated on the merged set of their fpr breakpoints and
    integrated exactly between breakpoints (the difference is linear there;
    sign changes inside an interval are handled). Vertical segments have zero
    width, so they only matter through the one-sided limits at their ends.
    """
    x = np.union1d(c0.fpr, c1.fpr)
    left, right = x[:-1], x[1:]
    d_start = _eval(c0, left, "right") - _eval(c1, left, "right")
    d_end = _eval(c0, right, "left") - _eval(c1, right, "left")
    value = float(np.sum(_abs_linear_integral(d_start, d_end, right - left)))
    return AbrocaResult(value, c0.auc(), c1.auc())
