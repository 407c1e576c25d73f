"""End-to-end audit: data -> models -> per-group metrics -> bundle, plots, reports."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import viz
from .abroca import AbrocaResult, RocCurve, abroca, roc_curve
from .config import AuditConfig
from .density import DensityVector, ProbabilityStep, density_vector, split_by_group
from .madd import BehaviorFlags, classify_behavior, madd
from .models import DEFAULT_HYPERPARAMS, ModelKind, make_records, train
from .report import METRICS, AuditSummary, FairnessMatrix, build_matrix, render, summarize
from .smoothing import KdeCurve, kde, scott_bandwidth, zone_areas
from .tabular import (
    STUDENT_INFO,
    STUDENT_VLE,
    DataError,
    Dataset,
    MiScores,
    group_proportions,
    load_generic_csv,
    load_oulad,
    mutual_information,
    normalize_split,
    preprocess,
    stratified_split,
)

log = logging.getLogger(__name__)

BUNDLE_NAME = "bundle.json"


def sha256_file(path: Path, chunk: int = 1 << 20) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        while block := fh.read(chunk):
            h.update(block)
    return h.hexdigest()


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


@dataclass
class Source:
    datasets: dict[str, Dataset]
    input_hashes: dict[str, str]
    kind: str
    raw_rows: int = 0
    extra: dict = field(default_factory=dict)


def load_source(cfg: AuditConfig, normalize: bool | None = None) -> Source:
    """Datasets per course from an OULAD directory, a directory of ingested
    datasets, or a single generic CSV."""
    if normalize is None:
        normalize = cfg.normalization == "course"
    if cfg.csv:
        path = Path(cfg.csv)
        ds = load_generic_csv(path, cfg.target_col, cfg.sensitive,
                              course_id=cfg.courses[0] if cfg.courses else None, normalize=normalize)
        return Source({ds.course_id: ds}, {path.name: sha256_file(path)}, "csv", len(ds))
    directory = Path(cfg.data_dir)
    if not directory.is_dir():
        raise DataError(f"data directory not found: {directory}")
    if (directory / STUDENT_INFO).exists():
        raw = load_oulad(directory)
        courses = cfg.courses or sorted(set(raw["course_id"]))
        datasets = {c: preprocess(raw, c, poverty_boundary_group=cfg.poverty_boundary_group,
                                  require_vle=cfg.require_vle, normalize=normalize) for c in courses}
        hashes = {n: sha256_file(directory / n) for n in (STUDENT_INFO, STUDENT_VLE)}
        return Source(datasets, hashes, "oulad", len(raw))
    sidecars = sorted(directory.glob("*.stats.json"))
    if not sidecars:
        raise DataError(f"{directory} holds neither OULAD files nor ingested datasets")
    datasets = {}
    hashes = {}
    for sc in sidecars:
        csv_path = sc.with_name(sc.name[: -len(".stats.json")] + ".csv")
        ds = Dataset.read(csv_path)
        if cfg.courses and ds.course_id not in cfg.courses:
            continue
        datasets[ds.course_id] = ds
        hashes[csv_path.name] = sha256_file(csv_path)
    missing = [c for c in cfg.courses if c not in datasets]
    if missing:
        raise DataError(f"courses not found among ingested datasets: {missing}")
    return Source(datasets, hashes, "ingested", sum(len(d) for d in datasets.values()))


def _check_sensitive(ds: Dataset, cfg: AuditConfig) -> None:
    absent = [s for s in cfg.sensitive if s not in ds.sensitive_names]
    if absent:
        raise DataError(f"course {ds.course_id}: sensitive features {absent} not available "
                        f"(have {list(ds.sensitive_names)})")


# -- ingest / mi -----------------------------------------------------------------


def run_ingest(cfg: AuditConfig) -> dict:
    src = load_source(cfg, normalize=True)
    out = Path(cfg.out)
    data_dir = out / "data"
    courses = {}
    for cid, ds in src.datasets.items():
        ds.write(data_dir)
        props = {}
        for s in ds.sensitive_names:
            p0, p1 = group_proportions(ds, s)
            props[s] = [float(p0), float(p1)]
        courses[cid] = {"rows": len(ds), "dropped": ds.stats.get("dropped", {}), "group_proportions": props,
                        "pass_rate": float(ds.y.mean())}
    report = {
        "source": src.kind,
        "input_hashes": src.input_hashes,
        "rows_loaded": src.raw_rows,
        "total_rows": sum(len(d) for d in src.datasets.values()),
        "courses": courses,
    }
    (out / "ingestion_report.json").write_text(dump_json(report))
    return report


def run_mi(cfg: AuditConfig) -> MiScores:
    src = load_source(cfg, normalize=True)
    scores = MiScores()
    for ds in src.datasets.values():
        _check_sensitive(ds, cfg)
        for s in cfg.sensitive:
            scores.update(mutual_information(ds, s, q=cfg.mi_bins))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    averages = {c: {s: scores.average(c, s) for s in cfg.sensitive} for c in scores.courses()}
    (out / "mi.json").write_text(dump_json({"unit": "nats", "bins": cfg.mi_bins, "scores": scores.to_dict(),
                                            "averages": averages, "input_hashes": src.input_hashes}))
    spec = viz.PlotSpec(viz.PlotKind.MI_BARS, title="Mutual information with sensitive features",
                        x_label="course", y_label="MI (nats)", display_step=cfg.display_step)
    (out / "mi.svg").write_text(viz.plot_mi_bars(scores, spec))
    return scores


# -- audit -------------------------------------------------------------------------


@dataclass
class CellResult:
    """Everything computed for one (model, sensitive feature) pair."""

    d0: DensityVector
    d1: DensityVector
    madd: object
    behavior: BehaviorFlags
    madd_alt: float
    kde0: KdeCurve
    kde1: KdeCurve
    zones: object
    roc0: RocCurve
    roc1: RocCurve
    abroca: AbrocaResult
    n_groups: tuple[int, int]

    def to_dict(self, cfg: AuditConfig) -> dict:
        return {
            "density": {"g0": self.d0.to_dict(), "g1": self.d1.to_dict()},
            "madd": self.madd.to_dict(),
            "madd_e_sensitivity": {"e": cfg.e_sensitivity, "value": self.madd_alt,
                                   "abs_change": abs(self.madd_alt - self.madd.value)},
            "behavior": self.behavior.to_dict(),
            "kde": {"g0": {"bandwidth": self.kde0.bandwidth, "n_samples": self.kde0.n_samples},
                    "g1": {"bandwidth": self.kde1.bandwidth, "n_samples": self.kde1.n_samples},
                    "grid_size": int(self.kde0.grid.size)},
            "zones": self.zones.to_dict(),
            "roc": {"g0": self.roc0.to_dict(), "g1": self.roc1.to_dict()},
            "abroca": self.abroca.to_dict(),
            "group_sizes": list(self.n_groups),
        }


def group_kde(dv: DensityVector, grid_size: int) -> KdeCurve:
    """KDE over the rounded probabilities a density vector counts."""
    samples = dv.samples()
    h = scott_bandwidth(samples, fallback=dv.step.e / 2)
    return kde(samples, h, grid_size)


def audit_cell(p_hat, groups, y_true, cfg: AuditConfig, label: str = "") -> CellResult:
    records = make_records(p_hat, groups, y_true, cfg.threshold)
    probs0, probs1 = split_by_group(records)
    step = ProbabilityStep(cfg.e)
    d0, d1 = density_vector(probs0, step), density_vector(probs1, step)
    r = madd(d0, d1)
    alt = madd(density_vector(probs0, cfg.e_sensitivity), density_vector(probs1, cfg.e_sensitivity)).value
    k0, k1 = group_kde(d0, cfg.kde_grid), group_kde(d1, cfg.kde_grid)
    g = np.asarray(groups)
    y = np.asarray(y_true)
    p = np.asarray(p_hat, dtype=float)
    try:
        roc0 = roc_curve(p[g == 0], y[g == 0])
        roc1 = roc_curve(p[g == 1], y[g == 1])
    except ValueError as exc:
        raise DataError(f"{label}: {exc}") from None
    return CellResult(d0, d1, r, classify_behavior(r, cfg.gap_threshold, cfg.peak_threshold), alt,
                      k0, k1, zone_areas(k0, k1), roc0, roc1, abroca(roc0, roc1),
                      (len(probs0), len(probs1)))


@dataclass
class CourseAudit:
    course_id: str
    n_train: int
    n_test: int
    accuracies: dict[str, float]
    models: dict
    cells: dict[tuple[str, str], CellResult]
    matrices: dict[str, FairnessMatrix]
    summary: AuditSummary
    proportions: dict[str, list[float]]


def audit_course(ds: Dataset, cfg: AuditConfig) -> CourseAudit:
    _check_sensitive(ds, cfg)
    split = stratified_split(ds, cfg.split, cfg.seed)
    if cfg.normalization == "train":
        cols = [c for c in ds.feature_names if c not in ds.sensitive_names]
        split = normalize_split(split, cols)
    test = split.test
    accuracies, models, cells = {}, {}, {}
    for kind in cfg.models:
        model = train(kind, split.train.X, split.train.y, cfg.hyperparams.get(kind), cfg.seed,
                      split.train.feature_names)
        p = model.predict_proba(test.X)
        accuracies[kind] = float(np.mean((p >= cfg.threshold).astype(int) == test.y))
        models[kind] = model
        for s in cfg.sensitive:
            cells[(kind, s)] = audit_cell(p, test.column(s).astype(int), test.y, cfg,
                                          f"{ds.course_id}/{kind}/{s}")
    matrices = {
        "MADD": build_matrix({k: c.madd.value for k, c in cells.items()}, "MADD", ds.course_id,
                             cfg.models, cfg.sensitive),
        "ABROCA": build_matrix({k: c.abroca.value for k, c in cells.items()}, "ABROCA", ds.course_id,
                               cfg.models, cfg.sensitive),
    }
    summary = summarize(matrices["MADD"], matrices["ABROCA"], {k: c.behavior for k, c in cells.items()})
    props = {s: [float(v) for v in group_proportions(test, s)] for s in cfg.sensitive}
    return CourseAudit(ds.course_id, len(split.train), len(test), accuracies, models, cells, matrices,
                       summary, props)


def bundle_dict(audits: list[CourseAudit], cfg: AuditConfig, input_hashes: dict) -> dict:
    config = cfg.to_dict()
    config.pop("out")
    # echo the effective hyperparameters, defaults included
    config["hyperparams"] = {k: {**DEFAULT_HYPERPARAMS[ModelKind(k)], **cfg.hyperparams.get(k, {})}
                             for k in cfg.models}
    courses = {}
    for a in audits:
        courses[a.course_id] = {
            "n_train": a.n_train,
            "n_test": a.n_test,
            "test_group_proportions": a.proportions,
            "accuracy": a.accuracies,
            "cells": {m: {s: a.cells[(m, s)].to_dict(cfg) for s in cfg.sensitive} for m in cfg.models},
            "matrices": {k: v.to_dict() for k, v in a.matrices.items()},
            "summary": a.summary.to_dict(),
        }
    return {"format": "maddaudit-bundle/1", "config": config, "m": cfg.m, "input_hashes": input_hashes,
            "courses": courses}


def course_report(course: dict, course_id: str, cfg: dict) -> str:
    """Markdown report of one course; ordering follows the config, not the JSON key order."""
    models, features = cfg["models"], cfg["sensitive"]
    mm = FairnessMatrix.from_dict(course["matrices"]["MADD"])
    am = FairnessMatrix.from_dict(course["matrices"]["ABROCA"])
    s = course["summary"]
    metrics = [m for m in METRICS if m in s["fairest_model"]]

    def by_metric(d):
        return {m: d[m] for m in metrics}

    behaviors = {m: {f: s["behaviors"][m][f] for f in features if f in s["behaviors"].get(m, {})}
                 for m in models if m in s["behaviors"]}
    summary = AuditSummary(s["course_id"], by_metric(s["fairest_model"]), by_metric(s["least_fair_model"]),
                           by_metric(s["most_sensitive_feature"]), by_metric(s["model_averages"]),
                           by_metric(s["feature_averages"]), behaviors)
    acc = " | ".join(f"{k} {course['accuracy'][k]:.3f}" for k in models)
    head = [
        f"# Fairness audit: course {course_id}",
        "",
        f"Train/test rows: {course['n_train']}/{course['n_test']}; e = {cfg['e']} (m = {round(1 / cfg['e']) + 1}); "
        f"t = {cfg['threshold']}; seed = {cfg['seed']}.",
        "",
        f"Test accuracy: {acc}",
        "",
    ]
    return "\n".join(head) + "\n".join([render(mm), render(am), render(summary)])


def render_plots(bundle: dict, out: Path) -> list[Path]:
    """Write every per-cell SVG described by a bundle; returns the paths."""
    cfg = bundle["config"]
    written = []
    for cid, course in bundle["courses"].items():
        cdir = out / cid
        cdir.mkdir(parents=True, exist_ok=True)
        for model, per in course["cells"].items():
            for feature, cell in per.items():
                d0 = DensityVector.from_dict(cell["density"]["g0"])
                d1 = DensityVector.from_dict(cell["density"]["g1"])
                grid = cell["kde"]["grid_size"]
                k0 = kde(d0.samples(), cell["kde"]["g0"]["bandwidth"], grid)
                k1 = kde(d1.samples(), cell["kde"]["g1"]["bandwidth"], grid)
                names = (f"{feature}=0", f"{feature}=1")
                title = f"{cid} {model} {feature}"
                figs = {
                    viz.PlotKind.DENSITY_COMPARISON: viz.plot_density_comparison(
                        d0, d1, k0, k1, (cell["madd"]["mean_g0"], cell["madd"]["mean_g1"]),
                        viz.PlotSpec(viz.PlotKind.DENSITY_COMPARISON, title=title, group_names=names,
                                     display_step=cfg["display_step"])),
                    viz.PlotKind.MADD_ZONES: viz.plot_madd_zones(
                        k0, k1, viz.PlotSpec(viz.PlotKind.MADD_ZONES, title=title, group_names=names,
                                             display_step=cfg["display_step"])),
                    viz.PlotKind.ABROCA_SLICE: viz.plot_abroca_slice(
                        RocCurve.from_dict(cell["roc"]["g0"]), RocCurve.from_dict(cell["roc"]["g1"]),
                        viz.PlotSpec(viz.PlotKind.ABROCA_SLICE, title=title, group_names=names,
                                     x_label="false positive rate", y_label="true positive rate",
                                     display_step=cfg["display_step"])),
                }
                for kind, svg in figs.items():
                    path = cdir / viz.plot_filename(cid, model, feature, kind)
                    path.write_text(svg)
                    written.append(path)
    return written


def write_reports(bundle: dict, out: Path) -> list[Path]:
    paths = []
    for cid, course in bundle["courses"].items():
        cdir = out / cid
        cdir.mkdir(parents=True, exist_ok=True)
        path = cdir / "report.md"
        path.write_text(course_report(course, cid, bundle["config"]))
        paths.append(path)
    return paths


def run_audit(cfg: AuditConfig) -> dict:
    """Compute everything in memory first, then write; a failure leaves no partial output."""
    src = load_source(cfg, normalize=cfg.normalization == "course")
    audits = [audit_course(ds, cfg) for ds in src.datasets.values()]
    bundle = bundle_dict(audits, cfg, src.input_hashes)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / BUNDLE_NAME).write_text(dump_json(bundle))
    for a in audits:
        mdir = out / a.course_id / "models"
        mdir.mkdir(parents=True, exist_ok=True)
        for kind, model in a.models.items():
            (mdir / f"{kind}.json").write_text(dump_json(model.to_dict()))
    render_plots(bundle, out)
    write_reports(bundle, out)
    return bundle


def load_bundle(path: Path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / BUNDLE_NAME
    if not path.is_file():
        raise DataError(f"audit bundle not found: {path}")
    return json.loads(path.read_text())
