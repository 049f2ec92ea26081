"""Mode-estimating scale models for the scalar scale shift.

Both models centre the shift on the negated Parzen mode of the compositional
LFCs. The Laplace model adds Gaussian noise whose variance comes from the
curvature of the log density at the mode; the bootstrap model resamples
samples (within condition) and then features before re-estimating the mode.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .core import AnalysisConfig, ConditionLabels, CountTable, RngStream
from .kde import kde_density, log_density_curvature, make_spec, parzen_mode, scan_grid
from .lfc import comp_lfc
from .measurement import CompositionDraw, DirichletPosterior, sample_composition
from .parallel import parallel_map

log = logging.getLogger(__name__)

LAPLACE = "laplace"
BOOTSTRAP = "bootstrap"


@dataclass(frozen=True, eq=False)
class ScaleModelFit:
    kind: str
    shift_draws: np.ndarray
    mode_point_estimates: np.ndarray
    variance: float = field(init=False)
    # compositional LFC draws the shifts are meant to be added to
    comp_lfc_draws: Optional[np.ndarray] = None
    curvature_variances: Optional[np.ndarray] = None
    warnings: tuple = ()

    def __post_init__(self):
        shifts = np.asarray(self.shift_draws, dtype=float)
        if not np.all(np.isfinite(shifts)):
            raise ValueError("non-finite scale shift draws")
        object.__setattr__(self, "shift_draws", shifts)
        object.__setattr__(self, "variance", float(np.var(shifts, ddof=1)))

    def assemble(self, comp_lfc_draws: Optional[np.ndarray] = None) -> np.ndarray:
        """Rank-1 update of every draw: ``theta[s] = comp_lfc[s] + shift[s]``."""
        base = self.comp_lfc_draws if comp_lfc_draws is None else comp_lfc_draws
        return np.asarray(base) + self.shift_draws[:, None]


def laplace_variance(values, spec, mode: Optional[float] = None) -> float:
    """Negative inverse curvature of the log KDE at its mode.

    Falls back to a widening finite-difference stencil when the analytic
    curvature is not negative, and to ``h**2`` as a last resort.
    """
    m = parzen_mode(values, spec) if mode is None else mode
    c = log_density_curvature(values, spec.bandwidth, m)
    if np.isfinite(c) and c < 0:
        return -1.0 / c
    _, step, _ = scan_grid(spec)
    delta = max(step, spec.bandwidth / 3.0)
    for _ in range(8):
        p = kde_density(values, spec, np.array([m - delta, m, m + delta]))
        if np.all(p > 0):
            lp = np.log(p)
            c = (lp[0] - 2.0 * lp[1] + lp[2]) / (delta * delta)
            if c < 0:
                return -1.0 / c
        delta *= 2.0
    return spec.bandwidth ** 2


def laplace_draw(theta_par: np.ndarray, rng: RngStream, grid_size: int = 512,
                 interval=None):
    """One Laplace-model realization: ``(mode, tau2, shift)``."""
    spec = make_spec(theta_par, grid_size, interval)
    m = parzen_mode(theta_par, spec)
    tau2 = laplace_variance(theta_par, spec, m)
    eps = rng.generator().normal(0.0, np.sqrt(tau2))
    return m, tau2, -m + eps


def _resample_within_groups(labels: ConditionLabels, gen: np.random.Generator):
    x = labels.assignment
    idx = np.empty(x.size, dtype=np.int64)
    for g in (0, 1):
        members = np.flatnonzero(x == g)
        idx[members] = gen.choice(members, size=members.size, replace=True)
    return idx


def bootstrap_draw(comp: CompositionDraw, labels: ConditionLabels, rng: RngStream,
                   grid_size: int = 512, interval=None, resample_samples: bool = True,
                   resample_features: bool = True):
    """One bootstrap realization: ``(resampled comp LFC, mode, shift)``.

    Samples are resampled with replacement inside each condition so neither
    group can empty out; the D entries of the recomputed LFC vector are then
    resampled before the mode is taken.
    """
    gen = rng.generator()
    if resample_samples:
        idx = _resample_within_groups(labels, gen)
        theta_par = comp_lfc(comp.with_columns(idx), ConditionLabels(labels.assignment[idx]))
    else:
        theta_par = comp_lfc(comp, labels)
    if resample_features:
        boot = theta_par[gen.integers(0, theta_par.size, size=theta_par.size)]
    else:
        boot = theta_par
    m = parzen_mode(boot, make_spec(boot, grid_size, interval))
    return theta_par, m, -m


def _degenerate_warning(comp_lfc_draws: np.ndarray) -> tuple:
    if np.ptp(comp_lfc_draws) == 0:
        log.warning("compositional LFCs are identical across features and draws")
        return ("degenerate compositional LFCs: scale variance is ~0",)
    return ()


def laplace_scale_fit(comp_lfc_draws: np.ndarray, rng: RngStream, grid_size: int = 512,
                      interval=None, workers: Optional[int] = 1) -> ScaleModelFit:
    """Laplace scale model over S draws of the compositional LFC vector.

    Draw ``s`` takes its noise from ``rng.child(s)``.
    """
    draws = np.asarray(comp_lfc_draws, dtype=float)
    if draws.ndim != 2 or draws.shape[0] < 2:
        raise ValueError("need an S x D matrix with S >= 2")
    out = parallel_map(
        lambda s: laplace_draw(draws[s], rng.child(s), grid_size, interval),
        range(draws.shape[0]), workers)
    modes, tau2, shifts = (np.array(v) for v in zip(*out))
    return ScaleModelFit(LAPLACE, shifts, modes, comp_lfc_draws=draws,
                         curvature_variances=tau2, warnings=_degenerate_warning(draws))


CompositionSource = Union[Sequence[CompositionDraw], Callable[[int], CompositionDraw]]


def bootstrap_scale_fit(table: CountTable, labels: ConditionLabels, post: DirichletPosterior,
                        config: AnalysisConfig, rng: RngStream,
                        compositions: Optional[CompositionSource] = None,
                        resample_samples: bool = True, resample_features: bool = True,
                        workers: Optional[int] = 1) -> ScaleModelFit:
    """Two-stage bootstrap scale model.

    For draw ``s`` the composition comes from ``compositions[s]`` (or a
    callable) when given, otherwise it is sampled from ``post`` with
    ``rng.child(s).child(0)``. Resampling uses ``rng.child(s).child(1)``.
    """
    S = config.num_draws

    def composition(s):
        if compositions is None:
            return sample_composition(post, rng.child(s).child(0))
        if callable(compositions):
            return compositions(s)
        return compositions[s]

    def one(s):
        return bootstrap_draw(composition(s), labels, rng.child(s).child(1),
                              config.kde_grid_size, config.mode_search_interval,
                              resample_samples, resample_features)

    out = parallel_map(one, range(S), workers)
    thetas, modes, shifts = zip(*out)
    thetas = np.vstack(thetas)
    warnings = _degenerate_warning(thetas)
    if resample_samples and min(labels.n_case, labels.n_control) == 1:
        warnings += ("single-sample group: within-group bootstrap returns that sample",)
    return ScaleModelFit(BOOTSTRAP, np.array(shifts), np.array(modes),
                         comp_lfc_draws=thetas, warnings=warnings)


def select_scale_model(laplace: ScaleModelFit, bootstrap: ScaleModelFit) -> ScaleModelFit:
    """Keep the fit with the larger shift variance; near-ties go to the bootstrap."""
    if laplace.variance > bootstrap.variance + 1e-12:
        return laplace
    return bootstrap
