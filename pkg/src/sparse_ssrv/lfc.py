"""Compositional log-fold changes and the rank-1 scale update."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConditionLabels, ValidationError
from .measurement import CompositionDraw


@dataclass(frozen=True, eq=False)
class GroupMeans:
    mean_log_case: np.ndarray
    mean_log_control: np.ndarray

    @property
    def difference(self) -> np.ndarray:
        return self.mean_log_case - self.mean_log_control


def group_means(log_values: np.ndarray, labels: ConditionLabels) -> GroupMeans:
    x = labels.assignment
    if log_values.shape[1] != x.size:
        raise ValidationError("labels are not aligned with composition columns")
    case, ctrl = x == 1, x == 0
    if not case.any() or not ctrl.any():
        raise ValidationError("empty group")
    return GroupMeans(log_values[:, case].mean(axis=1),
                      log_values[:, ctrl].mean(axis=1))


def comp_lfc(comp: CompositionDraw, labels: ConditionLabels) -> np.ndarray:
    """Case-minus-control difference of mean log proportions, per feature."""
    return group_means(comp.log_proportions, labels).difference


def binary_contrast(labels: ConditionLabels) -> np.ndarray:
    """Sample weights that turn the linear summary into the two-group LFC."""
    x = labels.assignment
    return np.where(x == 1, 1.0 / labels.n_case, -1.0 / labels.n_control)


def linear_functional_lfc(comp: CompositionDraw, weights: np.ndarray) -> np.ndarray:
    """Apply an arbitrary linear summary over samples to the log proportions.

    Any such summary splits into a compositional part plus a constant shift,
    so the same scale machinery applies when ``weights`` encodes, e.g., a
    regression contrast. Only :func:`binary_contrast` weights are exercised
    by the pipelines here.
    """
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (comp.log_proportions.shape[1],):
        raise ValidationError("weights must have one entry per sample")
    return comp.log_proportions @ weights


def rank1_update(comp_lfc: np.ndarray, scale_shift: float) -> np.ndarray:
    return np.asarray(comp_lfc, dtype=float) + float(scale_shift)


@dataclass(frozen=True, eq=False)
class LfcDraw:
    comp_lfc: np.ndarray
    scale_shift: float

    @property
    def total_lfc(self) -> np.ndarray:
        return rank1_update(self.comp_lfc, self.scale_shift)
