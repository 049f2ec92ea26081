"""Domain types, input validation and the seeded random-stream contract."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np


class ValidationError(ValueError):
    """Raised when inputs violate a type invariant or precondition."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _check_unique(ids: Sequence[str], what: str) -> None:
    seen = set()
    for i in ids:
        if i in seen:
            raise ValidationError(f"duplicate {what} id: {i!r}")
        seen.add(i)


@dataclass(frozen=True, eq=False)
class CountTable:
    """D x N table of read counts, features as rows and samples as columns."""

    feature_ids: tuple
    sample_ids: tuple
    counts: np.ndarray
    depths: np.ndarray = field(init=False)

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2:
            raise ValidationError("counts must be a 2-d matrix")
        if counts.dtype.kind == "f":
            if not np.all(np.isfinite(counts)):
                raise ValidationError("counts contain non-finite values")
            if np.any(counts != np.round(counts)):
                raise ValidationError("non-integer count")
        elif counts.dtype.kind not in "iu":
            raise ValidationError("counts must be numeric")
        if np.any(counts < 0):
            raise ValidationError("negative count")
        counts = counts.astype(np.int64, copy=True)
        D, N = counts.shape
        fids = tuple(str(f) for f in self.feature_ids)
        sids = tuple(str(s) for s in self.sample_ids)
        if len(fids) != D or len(sids) != N:
            raise ValidationError(
                f"dimension mismatch: counts are {D}x{N} but got "
                f"{len(fids)} feature ids and {len(sids)} sample ids"
            )
        if D < 2 or N < 2:
            raise ValidationError("need at least 2 features and 2 samples")
        _check_unique(fids, "feature")
        _check_unique(sids, "sample")
        depths = counts.sum(axis=0)
        if np.any(depths <= 0):
            bad = [sids[i] for i in np.flatnonzero(depths <= 0)]
            raise ValidationError(f"samples with zero total reads: {bad}")
        object.__setattr__(self, "feature_ids", fids)
        object.__setattr__(self, "sample_ids", sids)
        object.__setattr__(self, "counts", _readonly(counts))
        object.__setattr__(self, "depths", _readonly(depths))

    @property
    def shape(self):
        return self.counts.shape

    def subset_features(self, index) -> "CountTable":
        index = np.asarray(index, dtype=int)
        return CountTable(
            [self.feature_ids[i] for i in index], self.sample_ids, self.counts[index]
        )

    def __eq__(self, other):
        if not isinstance(other, CountTable):
            return NotImplemented
        return (
            self.feature_ids == other.feature_ids
            and self.sample_ids == other.sample_ids
            and np.array_equal(self.counts, other.counts)
        )


@dataclass(frozen=True, eq=False)
class ConditionLabels:
    """Binary condition indicator per sample (1 = case, 0 = control)."""

    assignment: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.assignment)
        if x.ndim != 1:
            raise ValidationError("condition labels must be a vector")
        if not np.all(np.isin(x, (0, 1))):
            raise ValidationError("condition labels must be 0 or 1")
        x = x.astype(np.int8, copy=True)
        if x.sum() == 0 or x.sum() == x.size:
            raise ValidationError("single condition: both groups must be represented")
        object.__setattr__(self, "assignment", _readonly(x))

    @property
    def n_control(self) -> int:
        return int((self.assignment == 0).sum())

    @property
    def n_case(self) -> int:
        return int((self.assignment == 1).sum())

    @property
    def case_index(self) -> np.ndarray:
        return np.flatnonzero(self.assignment == 1)

    @property
    def control_index(self) -> np.ndarray:
        return np.flatnonzero(self.assignment == 0)

    def swapped(self) -> "ConditionLabels":
        return ConditionLabels(1 - self.assignment)

    def __len__(self):
        return self.assignment.size


@dataclass(frozen=True)
class AnalysisConfig:
    """Tunable settings for one analysis.

    ``tail_method`` selects how per-feature posterior tail probabilities are
    computed: ``"normal"`` uses a Gaussian approximation to the draws and
    ``"empirical"`` counts signs with add-one smoothing.
    """

    alpha_prior: float = 0.5
    num_draws: int = 128
    seed: int = 0
    target_fdr: float = 0.05
    mode_search_interval: Optional[tuple] = None
    kde_grid_size: int = 512
    filter_min_mean_count: float = 0.0
    filter_min_prevalence: float = 0.0
    tail_method: str = "normal"

    def __post_init__(self):
        for name in ("alpha_prior", "target_fdr", "filter_min_mean_count",
                     "filter_min_prevalence"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValidationError(f"{name} must be a finite number")
        if self.alpha_prior <= 0:
            raise ValidationError("alpha_prior must be positive")
        if int(self.num_draws) != self.num_draws or self.num_draws < 2:
            raise ValidationError("num_draws must be an integer >= 2")
        if not 0 < self.target_fdr < 1:
            raise ValidationError("target_fdr must lie in (0, 1)")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if self.kde_grid_size < 16:
            raise ValidationError("kde_grid_size must be >= 16")
        if self.filter_min_mean_count < 0:
            raise ValidationError("filter_min_mean_count must be non-negative")
        if not 0 <= self.filter_min_prevalence <= 1:
            raise ValidationError("filter_min_prevalence must lie in [0, 1]")
        if self.tail_method not in ("normal", "empirical"):
            raise ValidationError("tail_method must be 'normal' or 'empirical'")
        if self.mode_search_interval is not None:
            lo, hi = (float(v) for v in self.mode_search_interval)
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
                raise ValidationError("mode_search_interval needs finite t_l < t_u")
            object.__setattr__(self, "mode_search_interval", (lo, hi))

    def with_(self, **changes) -> "AnalysisConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        if d["mode_search_interval"] is not None:
            d["mode_search_interval"] = list(d["mode_search_interval"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisConfig":
        d = dict(d)
        if d.get("mode_search_interval") is not None:
            d["mode_search_interval"] = tuple(d["mode_search_interval"])
        return cls(**d)


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream addressed by ``(seed, stream_id)``.

    Child streams extend the key path, so any task can derive its own
    generator without touching a shared one. The same key path always
    produces the same draws, independent of scheduling.
    """

    seed: int
    stream_id: int
    path: tuple = ()

    def child(self, key: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, self.path + (int(key),))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=int(self.seed), spawn_key=(int(self.stream_id),) + self.path
        )
        return np.random.Generator(np.random.PCG64(ss))


def substream(seed: int, stream_id: int) -> RngStream:
    return RngStream(int(seed), int(stream_id))


@dataclass(frozen=True)
class AnalysisContext:
    """Validated inputs restricted to the retained features."""

    table: CountTable
    labels: ConditionLabels
    config: AnalysisConfig
    retained: np.ndarray
    original_table: CountTable
    warnings: tuple = ()


def feature_filter_mask(table: CountTable, min_mean_count: float,
                        min_prevalence: float) -> np.ndarray:
    counts = table.counts
    keep = np.ones(counts.shape[0], dtype=bool)
    if min_mean_count > 0:
        keep &= counts.mean(axis=1) >= min_mean_count
    if min_prevalence > 0:
        keep &= (counts > 0).mean(axis=1) >= min_prevalence
    return keep


def validate_inputs(table: CountTable, labels: ConditionLabels,
                    config: AnalysisConfig) -> AnalysisContext:
    """Check that the table, labels and config agree, then apply feature filters.

    Features with mean count below ``config.filter_min_mean_count`` or a
    fraction of non-zero samples below ``config.filter_min_prevalence`` are
    dropped. Raises :class:`ValidationError` if nothing usable remains.
    """
    if len(labels) != table.shape[1]:
        raise ValidationError(
            f"dimension mismatch: {table.shape[1]} samples but {len(labels)} labels"
        )
    keep = feature_filter_mask(table, config.filter_min_mean_count,
                               config.filter_min_prevalence)
    retained = np.flatnonzero(keep)
    if retained.size == 0:
        raise ValidationError("empty table after filtering")
    if retained.size < 2:
        raise ValidationError("fewer than 2 features remain after filtering")
    warnings = []
    if retained.size == table.shape[0]:
        filtered = table
    else:
        try:
            filtered = table.subset_features(retained)
        except ValidationError as e:
            raise ValidationError(f"filtering left an unusable table: {e}") from None
        warnings.append(f"filtered out {table.shape[0] - retained.size} features")
    if labels.n_case == 1 or labels.n_control == 1:
        warnings.append("a condition group has a single sample; "
                        "within-group bootstrap is degenerate")
    return AnalysisContext(filtered, labels, config, _readonly(retained), table,
                           tuple(warnings))
