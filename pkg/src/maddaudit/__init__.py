"""Fairness audit of binary classifiers between two groups.

The core metric is the Model Absolute Density Distance (MADD): the L1
distance between the two groups' distributions of predicted probabilities,
discretized on a grid of step ``e``. ABROCA, the absolute area between the
groups' ROC curves, is provided for comparison.
"""

from .abroca import AbrocaResult, RocCurve, abroca, roc_curve
from .density import DensityVector, ProbabilityStep, density_vector, round_prob, split_by_group
from .madd import Behavior, BehaviorFlags, MaddResult, classify_behavior, madd
from .models import ModelKind, PredictionRecord, TrainedModel, accuracy, predict_proba, train
from .report import AuditSummary, FairnessMatrix, build_matrix, render, summarize
from .smoothing import KdeCurve, ZoneAreas, kde, scott_bandwidth, zone_areas

__version__ = "0.1.0"

__all__ = [
    "AbrocaResult", "RocCurve", "abroca", "roc_curve",
    "DensityVector", "ProbabilityStep", "density_vector", "round_prob", "split_by_group",
    "Behavior", "BehaviorFlags", "MaddResult", "classify_behavior", "madd",
    "ModelKind", "PredictionRecord", "TrainedModel", "accuracy", "predict_proba", "train",
    "AuditSummary", "FairnessMatrix", "build_matrix", "render", "summarize",
    "KdeCurve", "ZoneAreas", "kde", "scott_bandwidth", "zone_areas",
]
