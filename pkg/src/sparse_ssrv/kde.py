"""Gaussian kernel density estimation and Parzen mode search."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ValidationError

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
# Kernel contributions beyond this many bandwidths are below 1e-14 relative.
_KERNEL_CUTOFF = 8.0
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_MAX_SCAN_POINTS = 200_000


@dataclass(frozen=True)
class KdeSpec:
    bandwidth: float
    eval_interval: tuple
    grid_size: int = 512

    def __post_init__(self):
        lo, hi = self.eval_interval
        if not self.bandwidth > 0:
            raise ValidationError("bandwidth must be positive")
        if not lo < hi:
            raise ValidationError("eval_interval needs t_l < t_u")
        if self.grid_size < 16:
            raise ValidationError("grid_size must be >= 16")


def default_bandwidth(values) -> float:
    """Silverman's rule of thumb, ``0.9 * min(sd, IQR / 1.34) * D**(-1/5)``.

    When the spread is zero the robust scale falls back to the sd, and when
    both vanish a tiny bandwidth proportional to the location is returned so
    point masses still have a well defined mode.
    """
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise ValidationError("need at least 2 values for a bandwidth")
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    iqr = float(q75 - q25)
    loc = max(1.0, abs(float(np.mean(x))))
    # spreads at rounding level count as zero
    eps = 1e-9 * loc
    spread = min(sd, iqr / 1.34) if iqr / 1.34 > eps else sd
    if spread <= eps:
        return 1e-6 * loc
    return 0.9 * spread * x.size ** (-0.2)


def default_interval(values, bandwidth: float) -> tuple:
    x = np.asarray(values, dtype=float)
    return (float(x.min()) - 3.0 * bandwidth, float(x.max()) + 3.0 * bandwidth)


def make_spec(values, grid_size: int = 512, interval=None) -> KdeSpec:
    h = default_bandwidth(values)
    if interval is None:
        interval = default_interval(values, h)
    return KdeSpec(h, tuple(interval), grid_size)


def kde_density(values, spec: KdeSpec, t):
    """Evaluate ``(1/(D h)) sum_d phi((t - x_d)/h)`` at scalar or array ``t``."""
    x = np.asarray(values, dtype=float)
    t_arr = np.asarray(t, dtype=float)
    u = (t_arr.reshape(-1, 1) - x.reshape(1, -1)) / spec.bandwidth
    dens = np.exp(-0.5 * u * u).sum(axis=1) * (_INV_SQRT_2PI / (x.size * spec.bandwidth))
    return float(dens[0]) if t_arr.ndim == 0 else dens.reshape(t_arr.shape)


def kde_derivatives(values, bandwidth: float, t: float):
    """Density and its first two derivatives at ``t``."""
    x = np.asarray(values, dtype=float)
    h = bandwidth
    u = (t - x) / h
    phi = np.exp(-0.5 * u * u) * _INV_SQRT_2PI
    scale = 1.0 / (x.size * h)
    p0 = scale * phi.sum()
    p1 = -scale / h * (u * phi).sum()
    p2 = scale / (h * h) * ((u * u - 1.0) * phi).sum()
    return p0, p1, p2


def log_density_curvature(values, bandwidth: float, t: float) -> float:
    """Second derivative of ``log p_D`` at ``t``, computed analytically.

    Uses the shifted kernel form so that points far from ``t`` cannot
    underflow the whole sum to zero.
    """
    x = np.asarray(values, dtype=float)
    u = (t - x) / bandwidth
    e = -0.5 * u * u
    w = np.exp(e - e.max())
    s0 = w.sum()
    m1 = (u * w).sum() / s0
    m2 = (u * u * w).sum() / s0
    # p'/p = -m1/h ; p''/p = (m2 - 1)/h^2
    return ((m2 - 1.0) - m1 * m1) / (bandwidth * bandwidth)


def density_on_grid(values, bandwidth: float, grid_start: float, step: float,
                    n: int) -> np.ndarray:
    """KDE on an equispaced grid, scattering each point only to nearby nodes."""
    x = np.asarray(values, dtype=float)
    h = bandwidth
    half = int(min(n, math.ceil(_KERNEL_CUTOFF * h / step) + 1))
    offsets = np.arange(-half, half + 1)
    centre = np.rint((x - grid_start) / step).astype(np.int64)
    idx = centre[:, None] + offsets[None, :]
    valid = (idx >= 0) & (idx < n)
    u = (grid_start + idx * step - x[:, None]) / h
    w = np.exp(-0.5 * u * u)
    dens = np.bincount(idx[valid], weights=w[valid], minlength=n)
    return dens * (_INV_SQRT_2PI / (x.size * h))


def scan_grid(spec: KdeSpec):
    """Grid used by the mode scan: at least ``grid_size`` nodes, spacing <= h/3."""
    lo, hi = spec.eval_interval
    n = max(spec.grid_size, int(math.ceil(3.0 * (hi - lo) / spec.bandwidth)) + 1)
    n = min(n, _MAX_SCAN_POINTS)
    step = (hi - lo) / (n - 1)
    return lo, step, n


def golden_section_max(f, a: float, b: float, tol: float):
    """Maximize a unimodal ``f`` on ``[a, b]``; returns ``(t, f(t))``."""
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    # the cap stops the loop once [a, b] is down to a few ulps
    for _ in range(200):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    best = [(fc, c), (fd, d), (f(a), a), (f(b), b)]
    fbest, tbest = max(best, key=lambda p: p[0])
    return tbest, fbest


def parzen_mode(values, spec: KdeSpec) -> float:
    """Location of the global maximum of the KDE on ``spec.eval_interval``.

    A dense grid scan picks candidate peaks, each candidate is refined by
    golden-section search in its bracketing grid cells, and the highest
    refined peak wins. Ties within 1e-12 (relative) go to the candidate with
    the smallest absolute value.
    """
    x = np.asarray(values, dtype=float)
    lo, hi = spec.eval_interval
    start, step, n = scan_grid(spec)
    dens = density_on_grid(x, spec.bandwidth, start, step, n)

    padded = np.concatenate(([-np.inf], dens, [-np.inf]))
    is_peak = (padded[1:-1] >= padded[:-2]) & (padded[1:-1] >= padded[2:])
    peaks = np.flatnonzero(is_peak)
    top = dens.max()
    peaks = peaks[dens[peaks] >= 0.95 * top]
    if peaks.size > 16:
        peaks = peaks[np.argsort(-dens[peaks], kind="stable")[:16]]

    h = spec.bandwidth
    tol = 1e-8 * (hi - lo)

    def f(t):
        u = (t - x) / h
        return float(np.exp(-0.5 * u * u).sum())

    refined = []
    for i in peaks:
        a = max(lo, start + (i - 1) * step)
        b = min(hi, start + (i + 1) * step)
        refined.append(golden_section_max(f, a, b, tol))
    fmax = max(v for _, v in refined)
    ties = [t for t, v in refined if v >= fmax * (1.0 - 1e-12)]
    return min(ties, key=abs)

