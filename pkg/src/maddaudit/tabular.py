"""Loading and preprocessing of tabular student data.

Two sources are supported: the OULAD directory layout (``studentInfo.csv``
joined with the click counts aggregated from ``studentVle.csv``) and a
single generic CSV with declared target and sensitive columns.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

log = logging.getLogger(__name__)


class DataError(ValueError):
    """Bad or missing input data."""


class SplitError(DataError):
    pass


STUDENT_INFO = "studentInfo.csv"
STUDENT_VLE = "studentVle.csv"
STUDENT_REGISTRATION = "studentRegistration.csv"

FINAL_RESULTS = ("Pass", "Fail", "Distinction", "Withdrawn")
AGE_ORDER = ("0-35", "35-55", "55<=")
EDUCATION_ORDER = (
    "No Formal quals",
    "Lower Than A Level",
    "A Level or Equivalent",
    "HE Qualification",
    "Post Graduate Qualification",
)
MISSING_TOKENS = {"", "?", "nan", "NaN", "NA", "N/A"}

SENSITIVE_FEATURES = ("gender", "poverty", "disability")
FEATURES = (
    "gender",
    "age",
    "disability",
    "highest_education",
    "poverty",
    "num_of_prev_attempts",
    "studied_credits",
    "sum_click",
)
NUMERICAL = ("num_of_prev_attempts", "studied_credits", "sum_click")
ORDINAL = ("age", "highest_education")


# -- data types ---------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    """Preprocessed data of one course: features in [0, 1], binary target.

    ``sensitive_names`` are columns of ``X`` holding 0/1 group membership.
    """

    course_id: str
    feature_names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    sensitive_names: tuple[str, ...]
    student_ids: tuple[str, ...]
    stats: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=int)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise DataError(f"X has shape {X.shape} but {len(self.feature_names)} feature names")
        if y.shape != (X.shape[0],) or len(self.student_ids) != X.shape[0]:
            raise DataError("X, y and student_ids disagree on the number of rows")
        if not set(self.sensitive_names) <= set(self.feature_names):
            raise DataError("sensitive features must be among the feature names")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "sensitive_names", tuple(self.sensitive_names))
        object.__setattr__(self, "student_ids", tuple(self.student_ids))

    def __len__(self) -> int:
        return self.X.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.X[:, self.feature_names.index(name)]
        except ValueError:
            raise KeyError(f"no feature named {name!r}") from None

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=int)
        return replace(
            self,
            X=self.X[rows],
            y=self.y[rows],
            student_ids=tuple(self.student_ids[i] for i in rows),
        )

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.X, columns=list(self.feature_names))
        df.insert(0, "student_id", list(self.student_ids))
        df["target"] = self.y
        return df

    def write(self, directory: Path, stem: str | None = None) -> tuple[Path, Path]:
        """Write ``<stem>.csv`` and the ``<stem>.stats.json`` sidecar."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        stem = stem or self.course_id
        csv_path = directory / f"{stem}.csv"
        json_path = directory / f"{stem}.stats.json"
        self.to_frame().to_csv(csv_path, index=False, float_format="%.17g", lineterminator="\n")
        sidecar = {
            "course_id": self.course_id,
            "feature_names": list(self.feature_names),
            "sensitive_names": list(self.sensitive_names),
            **self.stats,
        }
        json_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
        return csv_path, json_path

    @classmethod
    def read(cls, csv_path: Path) -> "Dataset":
        csv_path = Path(csv_path)
        sidecar = json.loads(csv_path.with_suffix(".stats.json").read_text())
        df = pd.read_csv(csv_path, dtype={"student_id": str}, float_precision="round_trip")
        names = sidecar["feature_names"]
        stats = {k: v for k, v in sidecar.items() if k not in ("course_id", "feature_names", "sensitive_names")}
        return cls(sidecar["course_id"], tuple(names), df[names].to_numpy(float), df["target"].to_numpy(int),
                   tuple(sidecar["sensitive_names"]), tuple(df["student_id"]), stats)


@dataclass(frozen=True)
class SplitPair:
    train: Dataset
    test: Dataset
    ratio: float
    seed: int


@dataclass
class MiScores:
    """MI values in nats keyed by (course, sensitive feature, other feature)."""

    values: dict[tuple[str, str, str], float] = field(default_factory=dict)

    def update(self, other: "MiScores") -> None:
        self.values.update(other.values)

    def courses(self) -> list[str]:
        return sorted({c for c, _, _ in self.values})

    def sensitive(self) -> list[str]:
        seen: list[str] = []
        for _, s, _ in self.values:
            if s not in seen:
                seen.append(s)
        return seen

    def average(self, course: str, sensitive: str) -> float:
        vals = [v for (c, s, _), v in self.values.items() if c == course and s == sensitive]
        return float(np.mean(vals)) if vals else 0.0

    def to_dict(self) -> dict:
        out: dict = {}
        for (c, s, f), v in sorted(self.values.items()):
            out.setdefault(c, {}).setdefault(s, {})[f] = v
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "MiScores":
        return cls({(c, s, f): float(v) for c, d in data.items() for s, e in d.items() for f, v in e.items()})


# -- OULAD loading --------------------------------------------------------------


def _require(directory: Path, name: str) -> Path:
    path = directory / name
    if not path.is_file():
        raise DataError(f"missing OULAD file: {path}")
    return path


def _read_student_info(path: Path) -> pd.DataFrame:
    required = ("code_module", "code_presentation", "id_student", "gender", "highest_education",
                "imd_band", "age_band", "num_of_prev_attempts", "studied_credits", "disability",
                "final_result")
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path.name}: empty file") from None
        missing = [c for c in required if c not in header]
        if missing:
            raise DataError(f"{path.name}: missing columns {missing}")
        pos = {c: header.index(c) for c in required}
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path.name}, line {line}: expected {len(header)} fields, got {len(row)}")
            rec = {c: row[i].strip() for c, i in pos.items()}
            if not rec["code_module"] or not rec["id_student"]:
                raise DataError(f"{path.name}, line {line}: missing course or student id")
            if rec["final_result"] not in FINAL_RESULTS:
                raise DataError(f"{path.name}, line {line}: unknown final_result {rec['final_result']!r}")
            for c in ("num_of_prev_attempts", "studied_credits"):
                try:
                    rec[c] = float(rec[c])
                except ValueError:
                    raise DataError(f"{path.name}, line {line}: {c} is not a number: {rec[c]!r}") from None
            rows.append(rec)
    return pd.DataFrame(rows, columns=list(required))


def _read_vle_clicks(path: Path) -> pd.DataFrame:
    keys = ["code_module", "code_presentation", "id_student"]
    cols = keys + ["sum_click"]
    try:
        vle = pd.read_csv(path, usecols=cols, dtype={"code_module": str, "code_presentation": str,
                                                      "id_student": str, "sum_click": "int64"})
    except pd.errors.EmptyDataError:
        vle = pd.DataFrame({c: pd.Series(dtype=str) for c in keys} | {"sum_click": pd.Series(dtype="int64")})
    except pd.errors.ParserError as exc:
        raise DataError(f"{path.name}: {exc}") from None
    except ValueError as exc:
        if "Usecols" in str(exc) or "columns" in str(exc):
            raise DataError(f"{path.name}: {exc}") from None
        # locate the first unparsable click count
        raw = pd.read_csv(path, usecols=cols, dtype=str, keep_default_na=False)
        bad = pd.to_numeric(raw["sum_click"], errors="coerce").isna()
        line = int(np.argmax(bad.to_numpy())) + 2
        raise DataError(f"{path.name}, line {line}: sum_click is not an integer: "
                        f"{raw['sum_click'].iloc[line - 2]!r}") from None
    agg = vle.groupby(keys, sort=False)["sum_click"].agg(["sum", "size"]).reset_index()
    return agg.rename(columns={"sum": "sum_click", "size": "n_vle_records"})


def load_oulad(directory) -> pd.DataFrame:
    """One row per (student, course presentation) with the raw features.

    ``sum_click`` totals the student's clicks over all VLE interactions in
    that presentation (0 when there are none); ``n_vle_records`` counts the
    interactions. Missing deprivation bands are kept as empty strings.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"data directory not found: {directory}")
    info_path, vle_path = _require(directory, STUDENT_INFO), _require(directory, STUDENT_VLE)
    info = _read_student_info(info_path)
    clicks = _read_vle_clicks(vle_path)
    keys = ["code_module", "code_presentation", "id_student"]
    raw = info.merge(clicks, on=keys, how="left", validate="one_to_one")
    raw["sum_click"] = raw["sum_click"].fillna(0).astype("int64")
    raw["n_vle_records"] = raw["n_vle_records"].fillna(0).astype("int64")
    raw.loc[raw["imd_band"].isin(MISSING_TOKENS), "imd_band"] = ""
    return raw.rename(columns={"code_module": "course_id", "code_presentation": "presentation",
                               "id_student": "student_id"})


# -- preprocessing --------------------------------------------------------------


def imd_lower_bound(band: str) -> int:
    """Lower percentage of an IMD band such as '20-30%' or '10-20'."""
    head = band.strip().rstrip("%").split("-")[0]
    try:
        return int(head)
    except ValueError:
        raise DataError(f"unrecognized deprivation band {band!r}") from None


def binarize_poverty(bands: Iterable[str], boundary_band_group: int = 0) -> np.ndarray:
    """0 for bands below 50%, 1 for bands above.

    The 40-50% band touches the threshold; ``boundary_band_group`` decides
    which side it falls on.
    """
    out = []
    for b in bands:
        lo = imd_lower_bound(b)
        if lo + 10 <= 40:
            out.append(0)
        elif lo == 40:
            out.append(boundary_band_group)
        else:
            out.append(1)
    return np.asarray(out, dtype=int)


def _rank(values: pd.Series, order: Sequence[str], name: str) -> np.ndarray:
    lookup = {v: i for i, v in enumerate(order)}
    unknown = sorted(set(values) - set(lookup))
    if unknown:
        raise DataError(f"unknown {name} values: {unknown}")
    return values.map(lookup).to_numpy(float)


def minmax(values: np.ndarray, lo: float | None = None, hi: float | None = None,
           name: str = "feature") -> np.ndarray:
    """Scale to [0, 1]; a constant column becomes all zeros with a warning."""
    values = np.asarray(values, dtype=float)
    lo = float(values.min()) if lo is None else lo
    hi = float(values.max()) if hi is None else hi
    if hi == lo:
        log.warning("feature %s is constant (%g); normalized to zeros", name, lo)
        return np.zeros_like(values)
    return np.clip((values - lo) / (hi - lo), 0.0, 1.0)


def filter_rows(raw: pd.DataFrame, require_vle: bool = True) -> tuple[pd.DataFrame, dict]:
    """Drop withdrawn students, missing deprivation bands and (optionally)
    students without any VLE interaction. Returns the kept rows and counts."""
    drops = {}
    keep = raw["final_result"] != "Withdrawn"
    drops["withdrawn"] = int((~keep).sum())
    missing_pov = keep & (raw["imd_band"].isin(MISSING_TOKENS) | raw["imd_band"].isna())
    drops["missing_poverty"] = int(missing_pov.sum())
    keep &= ~missing_pov
    if require_vle and "n_vle_records" in raw:
        no_vle = keep & (raw["n_vle_records"] == 0)
        drops["no_vle_interaction"] = int(no_vle.sum())
        keep &= ~no_vle
    other = keep & raw[["gender", "age_band", "disability", "highest_education",
                        "num_of_prev_attempts", "studied_credits"]].isna().any(axis=1)
    if other.any():
        log.warning("dropping %d rows with other missing values", int(other.sum()))
    drops["other_missing"] = int(other.sum())
    keep &= ~other
    return raw[keep], drops


def preprocess(raw: pd.DataFrame, course_id: str | None, *, poverty_boundary_group: int = 0,
               require_vle: bool = True, normalize: bool = True) -> Dataset:
    """Filter, encode and min-max normalize one course (None pools all courses).

    Pass and Distinction map to 1, Fail to 0. Ordinal bands become integer
    ranks; gender (M=1), disability (Y=1) and poverty are binary and left
    unscaled. With ``normalize=False`` the encoded but unscaled values are
    returned, for callers that fit the scaling on a training split.
    """
    if course_id is not None:
        if course_id not in set(raw["course_id"]):
            raise DataError(f"course {course_id!r} not found; available: {sorted(set(raw['course_id']))}")
        raw = raw[raw["course_id"] == course_id]
    n_in = len(raw)
    rows, drops = filter_rows(raw, require_vle=require_vle)
    if rows.empty:
        raise DataError(f"no rows left for course {course_id!r} after filtering")

    gender = rows["gender"].map({"M": 1, "F": 0})
    disability = rows["disability"].map({"Y": 1, "N": 0})
    if gender.isna().any() or disability.isna().any():
        raise DataError("gender must be M/F and disability Y/N")
    cols = {
        "gender": gender.to_numpy(float),
        "age": _rank(rows["age_band"], AGE_ORDER, "age_band"),
        "disability": disability.to_numpy(float),
        "highest_education": _rank(rows["highest_education"], EDUCATION_ORDER, "highest_education"),
        "poverty": binarize_poverty(rows["imd_band"], poverty_boundary_group).astype(float),
        "num_of_prev_attempts": rows["num_of_prev_attempts"].to_numpy(float),
        "studied_credits": rows["studied_credits"].to_numpy(float),
        "sum_click": rows["sum_click"].to_numpy(float),
    }
    scaling = {}
    if normalize:
        for name in ORDINAL + NUMERICAL:
            v = cols[name]
            scaling[name] = {"min": float(v.min()), "max": float(v.max())}
            cols[name] = minmax(v, name=name)
    y = rows["final_result"].isin(("Pass", "Distinction")).to_numpy(int)
    ids = (rows["course_id"] + "/" + rows["presentation"] + "/" + rows["student_id"]).tolist()
    stats = {
        "rows_in": n_in,
        "rows_out": len(rows),
        "dropped": drops,
        "normalization": scaling,
        "ordinal_maps": {
            "age": {v: i for i, v in enumerate(AGE_ORDER)},
            "highest_education": {v: i for i, v in enumerate(EDUCATION_ORDER)},
            "poverty": {"below_50": 0, "40-50%": poverty_boundary_group, "above_50": 1},
        },
    }
    X = np.column_stack([cols[f] for f in FEATURES])
    return Dataset(course_id or "ALL", FEATURES, X, y, SENSITIVE_FEATURES, tuple(ids), stats)


def load_generic_csv(path, target_col: str, sensitive_cols: Sequence[str],
                     course_id: str | None = None, normalize: bool = True) -> Dataset:
    """A single CSV: numeric feature columns, 0/1 target and 0/1 sensitive columns.

    An ``id``/``student_id`` column, if present, supplies row identifiers.
    Rows with missing values are dropped with a warning.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"CSV file not found: {path}")
    try:
        df = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataError(f"{path.name}: {exc}") from None
    id_col = next((c for c in ("student_id", "id") if c in df.columns), None)
    needed = [target_col, *sensitive_cols]
    absent = [c for c in needed if c not in df.columns]
    if absent:
        raise DataError(f"{path.name}: missing columns {absent}")
    n_in = len(df)
    na = df.isna().any(axis=1)
    if na.any():
        log.warning("dropping %d rows with missing values from %s", int(na.sum()), path.name)
        df = df[~na]
    features = [c for c in df.columns if c not in (target_col, id_col)]
    non_numeric = [c for c in features if not pd.api.types.is_numeric_dtype(df[c])]
    if non_numeric:
        raise DataError(f"{path.name}: non-numeric feature columns {non_numeric}")
    for c in [target_col, *sensitive_cols]:
        bad = ~df[c].isin((0, 1))
        if bad.any():
            raise DataError(f"{path.name}: column {c!r} must be 0/1 (line {int(np.argmax(bad.to_numpy())) + 2})")
    cols, scaling = {}, {}
    for c in features:
        v = df[c].to_numpy(float)
        if normalize and c not in sensitive_cols:
            scaling[c] = {"min": float(v.min()), "max": float(v.max())}
            v = minmax(v, name=c)
        cols[c] = v
    ids = df[id_col].astype(str).tolist() if id_col else [str(i) for i in df.index]
    if len(set(ids)) != len(ids):
        raise DataError(f"{path.name}: duplicate row identifiers")
    stats = {"rows_in": n_in, "rows_out": len(df), "dropped": {"missing": int(na.sum())},
             "normalization": scaling, "ordinal_maps": {}}
    X = np.column_stack([cols[c] for c in features]) if features else np.empty((len(df), 0))
    return Dataset(course_id or path.stem, tuple(features), X, df[target_col].to_numpy(int),
                   tuple(sensitive_cols), tuple(ids), stats)


def normalize_split(split: SplitPair, columns: Sequence[str]) -> SplitPair:
    """Min-max scale ``columns`` with statistics from the training rows only.

    Test values outside the training range are clipped to [0, 1].
    """
    train_X, test_X = split.train.X.copy(), split.test.X.copy()
    scaling = {}
    for name in columns:
        j = split.train.feature_names.index(name)
        lo, hi = float(train_X[:, j].min()), float(train_X[:, j].max())
        scaling[name] = {"min": lo, "max": hi}
        train_X[:, j] = minmax(train_X[:, j], lo, hi, name)
        test_X[:, j] = minmax(test_X[:, j], lo, hi, name)
    stats = {**split.train.stats, "normalization": scaling}
    return replace(split, train=replace(split.train, X=train_X, stats=stats),
                   test=replace(split.test, X=test_X, stats=stats))


# -- split ----------------------------------------------------------------------


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_split(d: Dataset, ratio: float = 0.7, seed: int = 42) -> SplitPair:
    """Train/test partition preserving the class proportions.

    ``ratio`` is the training fraction. The test size is round(n*(1-ratio))
    (half-up), shared between the classes by largest remainder so that each
    class's test share is as close as possible to its overall share.
    """
    if not 0.0 < ratio < 1.0:
        raise SplitError(f"split ratio must lie in (0, 1), got {ratio}")
    n = len(d)
    classes = (0, 1)
    members = [np.nonzero(d.y == c)[0] for c in classes]
    for c, idx in zip(classes, members):
        if idx.size < 2:
            raise SplitError(f"class {c} has {idx.size} member(s); at least 2 are needed to split")
    n_test = min(max(_round_half_up(n * (1.0 - ratio)), 2), n - 2)
    quotas = [n_test * idx.size / n for idx in members]
    alloc = [math.floor(q) for q in quotas]
    by_remainder = sorted(classes, key=lambda c: (-(quotas[c] - alloc[c]), c))
    for c in by_remainder[: n_test - sum(alloc)]:
        alloc[c] += 1
    # every class keeps at least one row on each side; move any excess to the other class
    sizes = [idx.size for idx in members]
    alloc = [min(max(a, 1), s - 1) for a, s in zip(alloc, sizes)]
    for c in by_remainder * 2:
        diff = n_test - sum(alloc)
        if diff > 0:
            alloc[c] += min(diff, sizes[c] - 1 - alloc[c])
        elif diff < 0:
            alloc[c] -= min(-diff, alloc[c] - 1)

    rng = np.random.default_rng(seed)
    test_rows, train_rows = [], []
    for a, idx in zip(alloc, members):
        perm = rng.permutation(idx)
        test_rows.append(perm[:a])
        train_rows.append(perm[a:])
    test_idx = np.sort(np.concatenate(test_rows))
    train_idx = np.sort(np.concatenate(train_rows))
    return SplitPair(d.subset(train_idx), d.subset(test_idx), float(ratio), int(seed))


# -- bias diagnostics -------------------------------------------------------------


def group_proportions(d: Dataset, sensitive_name: str) -> tuple[Fraction, Fraction]:
    """Exact shares of group 0 and group 1."""
    col = d.column(sensitive_name)
    if not np.all((col == 0) | (col == 1)):
        raise DataError(f"sensitive column {sensitive_name!r} is not binary")
    n = col.size
    if n == 0:
        raise DataError("empty dataset")
    n1 = int(col.sum())
    return Fraction(n - n1, n), Fraction(n1, n)


def discretize(values, q: int = 10) -> np.ndarray:
    """Integer codes: values with at most ``q`` distinct levels are kept as
    they are, others are cut into ``q`` quantile bins."""
    v = np.asarray(values, dtype=float)
    levels, codes = np.unique(v, return_inverse=True)
    if levels.size <= q:
        return codes
    edges = np.unique(np.quantile(v, np.linspace(0.0, 1.0, q + 1))[1:-1])
    return np.searchsorted(edges, v, side="right")


def discrete_mi(a, b) -> float:
    """Plug-in mutual information (nats) of two integer-coded variables."""
    a = np.asarray(a)
    b = np.asarray(b)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    joint = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(joint, (ai, bi), 1.0)
    joint /= a.size
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / (pa @ pb)[nz])))
    return max(mi, 0.0)


def mutual_information(d: Dataset, sensitive_name: str, q: int = 10) -> MiScores:
    """MI between a binary sensitive column and every other feature."""
    s = d.column(sensitive_name)
    if not np.all((s == 0) | (s == 1)):
        raise DataError(f"sensitive column {sensitive_name!r} is not binary")
    others = [f for f in d.feature_names if f != sensitive_name]
    if s.size == 0 or s.min() == s.max():
        log.warning("sensitive feature %s has a single group in %s; MI set to 0", sensitive_name, d.course_id)
        return MiScores({(d.course_id, sensitive_name, f): 0.0 for f in others})
    s_codes = s.astype(int)
    return MiScores({
        (d.course_id, sensitive_name, f): discrete_mi(s_codes, discretize(d.column(f), q)) for f in others
    })
