"""Diagnostics for discrete probability measures: energies, Frostman and box
exponents, Fourier transforms and their ball / sphere / weighted averages."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist, squareform

from .geometry import PointCloud, grid_count
from .rng import mc_mean

INNER_CUTOFF = 0.01


class MeasureError(ValueError):
    pass


@dataclass(frozen=True)
class DiscreteMeasure:
    cloud: PointCloud
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.cloud),):
            raise MeasureError("one weight per point required")
        if np.any(w <= 0):
            raise MeasureError("weights must be strictly positive")
        if abs(w.sum() - 1) > 1e-12:
            raise MeasureError(f"weights sum to {w.sum()!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, cloud) -> DiscreteMeasure:
        if not isinstance(cloud, PointCloud):
            cloud = PointCloud.from_list(cloud) if not isinstance(cloud, np.ndarray) else PointCloud(cloud)
        n = len(cloud)
        return cls(cloud, np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, p) -> DiscreteMeasure:
        return cls(PointCloud(np.atleast_2d(np.asarray(p, dtype=float))), np.ones(1))

    @property
    def points(self) -> np.ndarray:
        return self.cloud.points

    @property
    def dim(self) -> int:
        return self.cloud.dim

    def __len__(self) -> int:
        return len(self.cloud)


@dataclass(frozen=True)
class ScaleSeries:
    """(scale, value[, stderr]) samples at strictly decreasing scales."""

    scales: np.ndarray
    values: np.ndarray
    stderr: np.ndarray | None = None

    def __post_init__(self):
        s = np.asarray(self.scales, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if s.shape != v.shape or s.ndim != 1:
            raise MeasureError("scales and values must be aligned 1-d arrays")
        if np.any(s <= 0) or np.any(np.diff(s) >= 0):
            raise MeasureError("scales must be positive and strictly decreasing")
        if np.any(v < 0):
            raise MeasureError("values must be nonnegative")
        object.__setattr__(self, "scales", s)
        object.__setattr__(self, "values", v)
        if self.stderr is not None:
            object.__setattr__(self, "stderr", np.asarray(self.stderr, dtype=float))

    def to_csv(self, path: str | Path) -> None:
        err = self.stderr if self.stderr is not None else np.zeros_like(self.values)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scale", "value", "stderr"])
            for row in zip(self.scales, self.values, err):
                w.writerow([f"{x:.17g}" for x in row])

    @classmethod
    def from_csv(cls, path: str | Path) -> ScaleSeries:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(np.array([float(r["scale"]) for r in rows]), np.array([float(r["value"]) for r in rows]),
                   np.array([float(r["stderr"]) for r in rows]))


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


# --------------------------------------------------------------------------
# energies and ball masses

def energy_integral(m: DiscreteMeasure, t: float) -> float:
    """Off-diagonal t-energy  sum_{i != j} w_i w_j |x_i - x_j|^-t."""
    if t <= 0:
        raise MeasureError("t must be positive")
    if len(m) < 2:
        return 0.0
    dist = pdist(m.points)
    if np.any(dist == 0):
        k = int(np.flatnonzero(dist == 0)[0])
        iu, ju = np.triu_indices(len(m), 1)
        raise MeasureError(f"duplicate points at indices {iu[k]} and {ju[k]}")
    w = m.weights
    ww = squareform(dist ** -t, checks=False)
    return float(w @ ww @ w)


def ball_masses(m: DiscreteMeasure, r: float) -> np.ndarray:
    """m(closed B_r(x_i)) for every support point x_i."""
    tree = cKDTree(m.points)
    w = m.weights
    if np.all(w == w[0]):
        return tree.query_ball_point(m.points, r, return_length=True) * w[0]
    return np.array([w[idx].sum() for idx in tree.query_ball_point(m.points, r)])


def frostman_exponent(m: DiscreteMeasure, radii: Sequence[float]) -> float:
    """min over support points x and probe radii r of log m(B_r(x)) / log r."""
    radii = list(radii)
    if not radii:
        raise MeasureError("empty radius list")
    if any(not 0 < r < 1 for r in radii):
        raise MeasureError("radii must lie in (0, 1)")
    best = math.inf
    for r in radii:
        masses = np.minimum(ball_masses(m, r), 1.0)
        best = min(best, float(np.min(np.log(masses) / math.log(r))))
    return best + 0.0


def box_dimension(series: ScaleSeries) -> float:
    """Slope of log N against log(1/scale)."""
    if len(series.scales) < 2:
        raise MeasureError("need at least two scales")
    if np.any(series.values < 1):
        raise MeasureError("box counts must be >= 1")
    return loglog_slope(1 / series.scales, series.values) + 0.0


def box_count_series(cloud: PointCloud, scales: Sequence[float]) -> ScaleSeries:
    scales = sorted(scales, reverse=True)
    return ScaleSeries(np.array(scales), np.array([grid_count(cloud, s).occupied for s in scales], dtype=float))


# --------------------------------------------------------------------------
# Fourier side

def fourier_amplitude(m: DiscreteMeasure, omega) -> complex | np.ndarray:
    """sum_j w_j exp(-2 pi i <omega, x_j>); accepts one frequency or an (S, d) array."""
    om = np.asarray(omega, dtype=float)
    single = om.ndim == 1
    om = np.atleast_2d(om)
    if om.shape[1] != m.dim:
        raise MeasureError("frequency dimension mismatch")
    phase = -2 * np.pi * (om @ m.points.T)
    val = np.cos(phase) @ m.weights + 1j * (np.sin(phase) @ m.weights)
    return complex(val[0]) if single else val


def power(m: DiscreteMeasure, omega: np.ndarray, chunk: int = 1 << 22) -> np.ndarray:
    """|m^(omega)|^2 for rows of omega, chunked to bound memory."""
    out = np.empty(len(omega))
    step = max(1, chunk // max(len(m), 1))
    for a in range(0, len(omega), step):
        phase = -2 * np.pi * (omega[a:a + step] @ m.points.T)
        re = np.cos(phase) @ m.weights
        im = np.sin(phase) @ m.weights
        out[a:a + step] = re * re + im * im
    return out


def unit_sphere(rng: np.random.Generator, d: int, size: int) -> np.ndarray:
    if d == 1:
        return np.where(rng.random((size, 1)) < 0.5, -1.0, 1.0)
    v = rng.standard_normal((size, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def ball_volume(d: int, r: float) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * r**d


def sphere_area(d: int) -> float:
    """Surface measure of S^{d-1} (2 for d = 1)."""
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float

    def __iter__(self):
        return iter((self.value, self.stderr))


def ball_average(m: DiscreteMeasure, R: float, samples: int = 100_000, seed: int = 0, threads: int = 1) -> Estimate:
    """Monte Carlo integral of |m^|^2 over the ball B_R(0)."""
    if R <= 0 or samples < 1:
        raise MeasureError("need R > 0 and samples >= 1")
    d = m.dim
    vol = ball_volume(d, R)

    def draw(rng, n):
        rad = R * rng.random(n) ** (1 / d)
        return power(m, unit_sphere(rng, d, n) * rad[:, None])

    mean, se = mc_mean(draw, samples, seed, f"ball_average/{R!r}", threads)
    return Estimate(vol * mean, vol * se)


def weighted_ball_average(m: DiscreteMeasure, R: float, t: float, samples: int = 100_000, seed: int = 0,
                          inner: float = INNER_CUTOFF, threads: int = 1) -> Estimate:
    """Integral of |m^(w)|^2 |w|^-t over the annulus inner <= |w| <= R.

    Radii are drawn with density proportional to r^(d-1-t), so the weight is
    absorbed exactly and only |m^|^2 is averaged.
    """
    d = m.dim
    if not 0 <= t < d:
        raise MeasureError(f"weight exponent t must lie in [0, {d})")
    if not 0 < inner < R:
        raise MeasureError("need 0 < inner cutoff < R")
    p = d - t
    total = sphere_area(d) * (R**p - inner**p) / p

    def draw(rng, n):
        u = rng.random(n)
        rad = (inner**p + u * (R**p - inner**p)) ** (1 / p)
        return power(m, unit_sphere(rng, d, n) * rad[:, None])

    mean, se = mc_mean(draw, samples, seed, f"weighted_ball_average/{R!r}/{t!r}", threads)
    return Estimate(total * mean, total * se)


def spherical_average(m: DiscreteMeasure, R: float, samples: int = 100_000, seed: int = 0, threads: int = 1) -> Estimate:
    """Mean of |m^(R sigma)|^2 over uniform sigma on the unit sphere."""
    if R < 0:
        raise MeasureError("R must be nonnegative")
    if R == 0 or len(m) == 1:
        return Estimate(1.0, 0.0)
    d = m.dim

    def draw(rng, n):
        return power(m, R * unit_sphere(rng, d, n))

    mean, se = mc_mean(draw, samples, seed, f"spherical_average/{R!r}", threads)
    return Estimate(min(max(mean, 0.0), 1.0), se)


def l2_dimension(m: DiscreteMeasure, R_scales: Sequence[float], samples: int = 50_000, seed: int = 0,
                 threads: int = 1) -> float:
    """d minus the fitted growth exponent of the ball average A(m, R)."""
    if len(R_scales) < 3:
        raise MeasureError("need at least three scales")
    vals = [ball_average(m, R, samples, seed, threads).value for R in R_scales]
    return m.dim - loglog_slope(R_scales, vals)


def l2_dimension_weighted(m: DiscreteMeasure, R_scales: Sequence[float], t: float, weight_exponent: float | None = None,
                          samples: int = 50_000, seed: int = 0, inner: float = INNER_CUTOFF, threads: int = 1) -> float:
    """d - t minus the growth exponent of A(m, R, |.|^-w); w defaults to t.

    ``weight_exponent`` is separate from ``t`` so the literal |.|^-1 weight can be
    reproduced as well as the |.|^-t one.
    """
    if len(R_scales) < 3:
        raise MeasureError("need at least three scales")
    w = t if weight_exponent is None else weight_exponent
    vals = [weighted_ball_average(m, R, w, samples, seed, inner, threads).value for R in R_scales]
    return m.dim - t - loglog_slope(R_scales, vals)
