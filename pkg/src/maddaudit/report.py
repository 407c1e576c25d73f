"""Fairness matrices (models x sensitive features), summaries and rendering."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping, Sequence

import numpy as np

METRICS = ("MADD", "ABROCA")


def format2(x: float) -> str:
    """Two decimals, rounding half-up on the shortest repr (1.015 -> '1.02')."""
    return str(Decimal(repr(float(x))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class FairnessMatrix:
    metric: str
    course_id: str
    rows: tuple[str, ...]
    cols: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        v = np.array(self.values, dtype=float)
        if v.shape != (len(self.rows), len(self.cols)) or v.size == 0:
            raise ValueError(f"values have shape {v.shape}, expected {(len(self.rows), len(self.cols))}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "cols", tuple(self.cols))

    # lower is fairer for both metrics; np.argmin resolves ties to the first index
    @property
    def best_per_col(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.argmin(self.values, axis=0))

    @property
    def best_per_row(self) -> tuple[int, ...]:
        return tuple(int(j) for j in np.argmin(self.values, axis=1))

    @property
    def row_averages(self) -> np.ndarray:
        return self.values.mean(axis=1)

    @property
    def col_averages(self) -> np.ndarray:
        return self.values.mean(axis=0)

    def cell(self, row: str, col: str) -> float:
        return float(self.values[self.rows.index(row), self.cols.index(col)])

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "course_id": self.course_id,
            "rows": list(self.rows),
            "cols": list(self.cols),
            "values": self.values.tolist(),
            "row_averages": self.row_averages.tolist(),
            "col_averages": self.col_averages.tolist(),
            "best_per_col": list(self.best_per_col),
            "best_per_row": list(self.best_per_row),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FairnessMatrix":
        return cls(data["metric"], data["course_id"], tuple(data["rows"]), tuple(data["cols"]),
                   np.asarray(data["values"], dtype=float))


def build_matrix(results: Mapping[tuple[str, str], float], metric: str, course: str,
                 rows: Sequence[str] | None = None, cols: Sequence[str] | None = None) -> FairnessMatrix:
    """Arrange ``{(model, feature): value}`` into a matrix.

    Row/column order follows ``rows``/``cols`` when given, else first
    appearance in ``results``.
    """
    rows = list(rows) if rows is not None else list(dict.fromkeys(m for m, _ in results))
    cols = list(cols) if cols is not None else list(dict.fromkeys(f for _, f in results))
    if not rows or not cols:
        raise ValueError("a fairness matrix needs at least one model and one sensitive feature")
    missing = [(r, c) for r in rows for c in cols if (r, c) not in results]
    if missing:
        raise ValueError(f"missing cells: {missing}")
    values = np.array([[results[(r, c)] for c in cols] for r in rows], dtype=float)
    return FairnessMatrix(metric, course, tuple(rows), tuple(cols), values)


@dataclass
class AuditSummary:
    course_id: str
    fairest_model: dict[str, str]
    least_fair_model: dict[str, str]
    most_sensitive_feature: dict[str, str]
    model_averages: dict[str, dict[str, float]]
    feature_averages: dict[str, dict[str, float]]
    behaviors: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "course_id": self.course_id,
            "fairest_model": self.fairest_model,
            "least_fair_model": self.least_fair_model,
            "most_sensitive_feature": self.most_sensitive_feature,
            "model_averages": self.model_averages,
            "feature_averages": self.feature_averages,
            "behaviors": self.behaviors,
        }


def summarize(madd_matrix: FairnessMatrix, abroca_matrix: FairnessMatrix | None = None,
              behavior_flags: Mapping[tuple[str, str], object] | None = None) -> AuditSummary:
    """Row-wise and column-wise reading of the matrices, one verdict per metric.

    ``behavior_flags`` maps (model, feature) to a BehaviorFlags (or its dict).
    """
    matrices = [madd_matrix] + ([abroca_matrix] if abroca_matrix is not None else [])
    for m in matrices[1:]:
        if (m.course_id, m.rows, m.cols) != (madd_matrix.course_id, madd_matrix.rows, madd_matrix.cols):
            raise ValueError("matrices describe different courses, models or features")
    fairest, least, sensitive, model_avg, feat_avg = {}, {}, {}, {}, {}
    for m in matrices:
        ra, ca = m.row_averages, m.col_averages
        fairest[m.metric] = m.rows[int(np.argmin(ra))]
        least[m.metric] = m.rows[int(np.argmax(ra))]
        sensitive[m.metric] = m.cols[int(np.argmax(ca))]
        model_avg[m.metric] = {r: float(v) for r, v in zip(m.rows, ra)}
        feat_avg[m.metric] = {c: float(v) for c, v in zip(m.cols, ca)}
    behaviors = {}
    for (model, feature), flags in (behavior_flags or {}).items():
        behaviors.setdefault(model, {})[feature] = flags.to_dict() if hasattr(flags, "to_dict") else dict(flags)
    return AuditSummary(madd_matrix.course_id, fairest, least, sensitive, model_avg, feat_avg, behaviors)


def _markdown_matrix(m: FairnessMatrix) -> str:
    bc, br = m.best_per_col, m.best_per_row
    lines = [
        f"### {m.metric} results for course {m.course_id}",
        "",
        "| Model | " + " | ".join(m.cols) + " | Average |",
        "|---|" + "---|" * len(m.cols) + "---|",
    ]
    for i, r in enumerate(m.rows):
        cells = []
        for j in range(len(m.cols)):
            s = format2(m.values[i, j])
            if br[i] == j:
                s += "\\*"
            if bc[j] == i:
                s = f"**{s}**"
            cells.append(s)
        lines.append(f"| {r} | " + " | ".join(cells) + f" | {format2(m.row_averages[i])} |")
    lines.append("| Average | " + " | ".join(format2(v) for v in m.col_averages) + " | |")
    lines.append("")
    lines.append("Bold: fairest model per feature (column). \\*: fairest feature per model (row).")
    return "\n".join(lines) + "\n"


def _markdown_summary(s: AuditSummary) -> str:
    lines = [f"### Summary for course {s.course_id}", ""]
    for metric in s.fairest_model:
        lines.append(
            f"- {metric}: fairest model **{s.fairest_model[metric]}** "
            f"(avg {format2(s.model_averages[metric][s.fairest_model[metric]])}), "
            f"least fair {s.least_fair_model[metric]} "
            f"(avg {format2(s.model_averages[metric][s.least_fair_model[metric]])}); "
            f"most sensitive feature **{s.most_sensitive_feature[metric]}** "
            f"(avg {format2(s.feature_averages[metric][s.most_sensitive_feature[metric]])})"
        )
    if s.behaviors:
        lines += ["", "| Model | Feature | Behaviors | Favored group |", "|---|---|---|---|"]
        for model, per in s.behaviors.items():
            for feature, b in per.items():
                flags = ", ".join(b.get("flags", [])) or "none"
                fav = b.get("favored_group")
                lines.append(f"| {model} | {feature} | {flags} | {'-' if fav is None else fav} |")
    return "\n".join(lines) + "\n"


def render(obj, format: str = "markdown") -> str:
    """Render a FairnessMatrix or AuditSummary as Markdown or JSON."""
    if format == "json":
        return json.dumps(obj.to_dict(), indent=2, sort_keys=True) + "\n"
    if format != "markdown":
        raise ValueError(f"unknown format {format!r}")
    if isinstance(obj, FairnessMatrix):
        return _markdown_matrix(obj)
    if isinstance(obj, AuditSummary):
        return _markdown_summary(obj)
    raise TypeError(f"cannot render {type(obj).__name__}")
