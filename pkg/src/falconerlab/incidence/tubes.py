"""Tube families, grid rasterization, richness profiles and intersection sums."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ResourceCapError
from ..geometry import Tube
from ..measures import loglog_slope

GRID_CAP = 2**25  # dense int32 counts: 128 MB
SPARSE_CAP = 2**31
BATCH_BUDGET = 1 << 21  # candidate cells per rasterization batch

# transversal intersection of two rho-tubes at angle D with meeting axes:
# strips (2 rho)^2 / sin D in the plane, the Steinmetz solid 16/3 rho^3 / sin D in space
TRANSVERSAL = {2: 4.0, 3: 16.0 / 3.0}


class IncidenceError(ValueError):
    pass


class GridCapError(IncidenceError, ResourceCapError):
    pass


@dataclass(frozen=True)
class TubeFamily:
    """Segments anchor +- length/2 * direction sharing one radius."""

    anchors: np.ndarray
    directions: np.ndarray
    lengths: np.ndarray
    radius: float
    dir_separation: float | None = None

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.anchors, dtype=float))
        u = np.atleast_2d(np.asarray(self.directions, dtype=float))
        if a.shape != u.shape or a.shape[1] not in (2, 3):
            raise IncidenceError("anchors and directions must be aligned (L, 2|3) arrays")
        norms = np.linalg.norm(u, axis=1)
        if np.any(norms == 0):
            raise IncidenceError("zero direction")
        u = u / norms[:, None]
        lengths = np.broadcast_to(np.asarray(self.lengths, dtype=float), (len(a),)).copy()
        if np.any(lengths <= 0) or self.radius <= 0:
            raise IncidenceError("lengths and radius must be positive")
        object.__setattr__(self, "anchors", a)
        object.__setattr__(self, "directions", u)
        object.__setattr__(self, "lengths", lengths)

    @property
    def dim(self) -> int:
        return self.anchors.shape[1]

    def __len__(self) -> int:
        return len(self.anchors)

    @property
    def tubes(self) -> list[Tube]:
        return [Tube(a, u, l, self.radius) for a, u, l in zip(self.anchors, self.directions, self.lengths)]

    @classmethod
    def from_tubes(cls, tubes: Sequence[Tube], dir_separation=None) -> TubeFamily:
        radii = {t.radius for t in tubes}
        if len(radii) != 1:
            raise IncidenceError("a family shares one radius")
        return cls(np.array([t.anchor for t in tubes]), np.array([t.direction for t in tubes]),
                   np.array([t.length for t in tubes]), radii.pop(), dir_separation)

    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        h = 0.5 * self.lengths[:, None] * self.directions
        return self.anchors - h, self.anchors + h

    def subset(self, idx) -> TubeFamily:
        return TubeFamily(self.anchors[idx], self.directions[idx], self.lengths[idx], self.radius, self.dir_separation)

    def tube_measure(self, radius: float | None = None) -> np.ndarray:
        """Lebesgue measure of each closed tube (segment neighbourhood, caps included)."""
        r = self.radius if radius is None else radius
        if self.dim == 2:
            return 2 * r * self.lengths + math.pi * r * r
        return math.pi * r * r * self.lengths + 4 / 3 * math.pi * r**3


# --------------------------------------------------------------------------
# rasterization

def _segment_dist2(pts: np.ndarray, p0: np.ndarray, u: np.ndarray, length: np.ndarray) -> np.ndarray:
    """Squared distance from pts (..., d) to segments p0 + t u, t in [0, length]; broadcasting."""
    v = pts - p0
    t = np.clip(np.sum(v * u, axis=-1), 0.0, length)
    w = v - t[..., None] * u
    return np.sum(w * w, axis=-1)


@dataclass
class Grid:
    cell: float
    lo: np.ndarray  # inclusive lower cell index per axis
    shape: np.ndarray

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def flat(self, idx: np.ndarray) -> np.ndarray:
        rel = idx - self.lo
        out = rel[..., 0].astype(np.int64)
        for ax in range(1, len(self.shape)):
            out = out * int(self.shape[ax]) + rel[..., ax]
        return out

    def centers(self, flat: np.ndarray) -> np.ndarray:
        idx = np.stack(np.unravel_index(flat, tuple(int(s) for s in self.shape)), axis=-1) + self.lo
        return (idx + 0.5) * self.cell


def family_grid(fam: TubeFamily, cell: float, reach: float) -> Grid:
    p0, p1 = fam.endpoints()
    lo = np.floor((np.minimum(p0, p1).min(axis=0) - reach) / cell).astype(np.int64)
    hi = np.floor((np.maximum(p0, p1).max(axis=0) + reach) / cell).astype(np.int64)
    return Grid(cell, lo, hi - lo + 1)


def _batch_cells(p0, u, length, reach, cell, axis, grid: Grid) -> np.ndarray:
    """Flat grid indices of cells whose centre lies within ``reach`` of each segment (one batch).

    Walks slabs of cells along the dominant ``axis``; in each slab only a box of
    width ~ 2 reach (1 + |u_b / u_a|) across each other axis is examined.
    """
    d = p0.shape[1]
    others = [b for b in range(d) if b != axis]
    ua = u[:, axis]
    a0 = np.minimum(p0[:, axis], p0[:, axis] + length * ua)
    a1 = np.maximum(p0[:, axis], p0[:, axis] + length * ua)
    k0 = np.floor((a0 - reach) / cell).astype(np.int64)
    k1 = np.floor((a1 + reach) / cell).astype(np.int64)
    nsl = int((k1 - k0).max()) + 1
    slab = k0[:, None] + np.arange(nsl)[None, :]  # (B, S)
    slab_ok = slab <= k1[:, None]
    ya = (slab + 0.5) * cell
    # parameter range on the segment that can reach this slab
    ta = (ya[:, :, None] + np.array([-reach, reach]) - p0[:, axis, None, None]) / ua[:, None, None]
    ta = np.clip(np.sort(ta, axis=-1), 0.0, length[:, None, None])  # (B, S, 2)
    starts, widths = [], []
    for b in others:
        ends = p0[:, b, None, None] + ta * u[:, b, None, None]
        lo = np.floor((ends.min(axis=-1) - reach) / cell).astype(np.int64)
        hi = np.floor((ends.max(axis=-1) + reach) / cell).astype(np.int64)
        starts.append(lo)
        widths.append(int((hi - lo).max()) + 1)
    offs = np.stack(np.meshgrid(*[np.arange(w) for w in widths], indexing="ij"), -1).reshape(-1, d - 1)
    B = len(p0)
    idx = np.empty((B, nsl, len(offs), d), dtype=np.int64)
    idx[..., axis] = slab[:, :, None]
    for j, b in enumerate(others):
        idx[..., b] = starts[j][:, :, None] + offs[None, None, :, j]
    centers = (idx + 0.5) * cell
    dist2 = _segment_dist2(centers, p0[:, None, None, :], u[:, None, None, :], length[:, None, None])
    mask = (dist2 <= reach * reach) & slab_ok[:, :, None]
    mask &= np.all((idx >= grid.lo) & (idx < grid.lo + grid.shape), axis=-1)
    return grid.flat(idx[mask])


def _batches(fam: TubeFamily, cell: float, reach: float):
    """Group tubes by dominant axis and slab count so padded batches stay tight."""
    u = fam.directions
    axis = np.argmax(np.abs(u), axis=1)
    p0, _ = fam.endpoints()
    nsl = np.ceil((fam.lengths * np.abs(u[np.arange(len(u)), axis]) + 2 * reach) / cell) + 1
    # per-slab box: ~ (2 reach (1 + max |u_b/u_a|) / cell + 2)^(d-1) cells
    width = 2 * reach * 2 / cell + 3
    per_tube = nsl * width ** (fam.dim - 1)
    out = []
    for ax in range(fam.dim):
        sel = np.flatnonzero(axis == ax)
        sel = sel[np.argsort(nsl[sel], kind="stable")]
        i = 0
        while i < len(sel):
            size = max(1, int(BATCH_BUDGET // max(per_tube[sel[i]], 1)))
            out.append((ax, sel[i:i + size]))
            i += size
    return out


def rasterize(fam: TubeFamily, cell: float, reach: float, threads: int = 1) -> tuple[Grid, np.ndarray, np.ndarray]:
    """Cell counts: for each cell, how many tubes have the cell centre within ``reach`` of their axis segment.

    Returns (grid, flat indices of hit cells, counts) with indices sorted.
    """
    if cell <= 0:
        raise IncidenceError("cell size must be positive")
    grid = family_grid(fam, cell, reach)
    if grid.size > SPARSE_CAP:
        raise GridCapError(f"grid of {grid.size} cells exceeds the cap; use a larger cell size")
    p0, _ = fam.endpoints()
    jobs = _batches(fam, cell, reach)

    def run(job):
        ax, sel = job
        return _batch_cells(p0[sel], fam.directions[sel], fam.lengths[sel], reach, cell, ax, grid)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = pool.map(run, jobs)
            return (grid, *_merge(parts, grid))
    return (grid, *_merge(map(run, jobs), grid))


def _merge(parts, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    # integer addition commutes, so the result does not depend on batch order
    if grid.size <= GRID_CAP:
        counts = np.zeros(grid.size, dtype=np.int32)
        for flat in parts:
            if len(flat):
                counts += np.bincount(flat, minlength=grid.size).astype(np.int32)
        hit = np.flatnonzero(counts)
        return hit, counts[hit].astype(np.int64)
    keys, vals = [], []
    for flat in parts:
        if len(flat):
            k, c = np.unique(flat, return_counts=True)
            keys.append(k)
            vals.append(c)
    if not keys:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    k = np.concatenate(keys)
    v = np.concatenate(vals)
    uk, inv = np.unique(k, return_inverse=True)
    return uk, np.bincount(inv, weights=v).astype(np.int64)


def membership_reach(fam: TubeFamily, cell: float, radius: float | None = None, conservative: bool = False) -> float:
    r = fam.radius if radius is None else radius
    return r + (0.5 * math.sqrt(fam.dim) * cell if conservative else 0.0)


# --------------------------------------------------------------------------
# richness

@dataclass(frozen=True)
class RichnessProfile:
    cell: float
    radius: float
    L: int
    dim: int
    r: np.ndarray
    measure: np.ndarray
    histogram: np.ndarray = field(repr=False)  # histogram[k] = number of cells met by exactly k tubes

    def measure_at(self, r: int) -> float:
        if r < 1:
            raise IncidenceError("r must be >= 1")
        return float(self.histogram[r:].sum()) * self.cell**self.dim


def dyadic(limit: int) -> list[int]:
    out, r = [], 1
    while r <= limit:
        out.append(r)
        r *= 2
    return out


def rich_profile(fam: TubeFamily, cell: float | None = None, r_list: Sequence[int] | None = None,
                 conservative: bool = False, threads: int = 1) -> RichnessProfile:
    """lambda(P_r) = (#cells met by >= r tubes) * cell^d over dyadic r.

    Cell membership tests the cell centre against the tube radius; with
    ``conservative`` the radius grows by half a cell diagonal so no rich cell
    is missed.
    """
    cell = fam.radius / 2 if cell is None else cell
    reach = membership_reach(fam, cell, conservative=conservative)
    _, _, counts = rasterize(fam, cell, reach, threads)
    hist = np.bincount(counts, minlength=len(fam) + 2).astype(np.int64)
    hist[0] = 0
    rs = np.array(dyadic(2 * len(fam)) if r_list is None else list(r_list), dtype=np.int64)
    tail = np.cumsum(hist[::-1])[::-1]
    meas = np.array([tail[r] if r < len(tail) else 0 for r in rs], dtype=float) * cell**fam.dim
    return RichnessProfile(cell, fam.radius, len(fam), fam.dim, rs, meas, hist)


def union_volume(fam: TubeFamily, cell: float | None = None, inflate: float = 3.0, threads: int = 1) -> float:
    """(#cells whose centre lies in some inflate*radius tube) * cell^d.

    The default cell is half the inflated radius.
    """
    cell = inflate * fam.radius / 2 if cell is None else cell
    _, hit, _ = rasterize(fam, cell, inflate * fam.radius, threads)
    return len(hit) * cell**fam.dim


def bush_radius_check(fam: TubeFamily, cell: float, r, threads: int = 1):
    """Largest |x| over centres of cells met by >= r tubes (0 if none).

    Membership is conservative (radius grown by half a cell diagonal) so no
    rich cell is missed. ``r`` may be a list; then one value per entry.
    """
    grid, hit, counts = rasterize(fam, cell, membership_reach(fam, cell, conservative=True), threads)
    norms = np.linalg.norm(grid.centers(hit), axis=1)
    out = [float(norms[counts >= k].max()) if np.any(counts >= k) else 0.0 for k in np.atleast_1d(r)]
    return out if np.ndim(r) else out[0]


def bush_radius_bound(r: int, cell: float, dim: int = 3) -> float:
    return 10 / math.sqrt(r) + math.sqrt(dim) * cell


def fit_richness_exponent(profile: RichnessProfile, r_min: float = 4, r_max: float | None = None) -> float:
    """Slope of log lambda(P_r) against log r over nonzero entries with r in [r_min, r_max] (default L/4)."""
    r_max = profile.L / 4 if r_max is None else r_max
    sel = (profile.r >= r_min) & (profile.r <= r_max) & (profile.measure > 0)
    if sel.sum() < 3:
        raise IncidenceError(f"only {int(sel.sum())} nonzero profile entries in [{r_min}, {r_max}]")
    return loglog_slope(profile.r[sel], profile.measure[sel])


def average_profiles(profiles: Sequence[RichnessProfile]) -> RichnessProfile:
    p0 = profiles[0]
    if any(not np.array_equal(p.r, p0.r) for p in profiles):
        raise IncidenceError("profiles must share their r grid")
    n = max(len(p.histogram) for p in profiles)
    hist = sum(np.pad(p.histogram, (0, n - len(p.histogram))) for p in profiles)
    return RichnessProfile(p0.cell, p0.radius, p0.L, p0.dim, p0.r, np.mean([p.measure for p in profiles], axis=0),
                           hist / len(profiles))


# --------------------------------------------------------------------------
# bounds

def bound_value(name: str, delta: float, L: int, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    formulas = {
        "weak": lambda: delta**2 * L**1.5 / r**2,
        "guess": lambda: delta**3 * (L**1.5 / r**2 + L / r),
        "szt": lambda: delta**3 * L**2 / r**3,
        "cordoba": lambda: delta * L * math.log(L) / r**2,
        "weak_planar": lambda: delta**3 * L**2 / r**2,
        "bush": lambda: delta**3 * L**1.5 / r**1.5,
        "bush_planar": lambda: delta * L / r**2,
    }
    if name not in formulas:
        raise IncidenceError(f"unknown bound {name!r}; choose from {sorted(formulas)}")
    return formulas[name]()


BOUND_DIMS = {"weak": 3, "guess": 3, "szt": 3, "cordoba": 2, "weak_planar": 3, "bush": 3, "bush_planar": 2}


def verify_bound(profile: RichnessProfile, bound: str, delta: float | None = None) -> tuple[float, np.ndarray]:
    """Empirical constants lambda(P_r) / bound(r); returns (max ratio, per-r ratios)."""
    if BOUND_DIMS.get(bound) not in (None, profile.dim):
        raise IncidenceError(f"bound {bound!r} is stated in dimension {BOUND_DIMS[bound]}, profile has {profile.dim}")
    delta = profile.radius if delta is None else delta
    ratios = profile.measure / bound_value(bound, delta, profile.L, profile.r)
    return float(ratios.max()), ratios


# --------------------------------------------------------------------------
# pairwise intersections

def segment_distance(p1, d1, p2, d2) -> np.ndarray:
    """Distance between segments p1 + s d1 and p2 + t d2 (s, t in [0, 1]); broadcasting."""
    r = p1 - p2
    a = np.sum(d1 * d1, -1)
    e = np.sum(d2 * d2, -1)
    f = np.sum(d2 * r, -1)
    c = np.sum(d1 * r, -1)
    b = np.sum(d1 * d2, -1)
    denom = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 1e-14 * a * e, np.clip((b * f - c * e) / denom, 0, 1), 0.0)
        t = (b * s + f) / e
        s = np.where(t < 0, np.clip(-c / a, 0, 1), np.where(t > 1, np.clip((b - c) / a, 0, 1), s))
    t = np.clip(t, 0, 1)
    w = p1 + s[..., None] * d1 - p2 - t[..., None] * d2
    return np.sqrt(np.sum(w * w, -1))


def _sin_angle(u1, u2) -> np.ndarray:
    if u1.shape[-1] == 2:
        return np.abs(u1[..., 0] * u2[..., 1] - u1[..., 1] * u2[..., 0])
    return np.linalg.norm(np.cross(u1, u2), axis=-1)


def pair_intersection_bounds(fam: TubeFamily, i: np.ndarray, j: np.ndarray, inflate: float = 3.0) -> np.ndarray:
    """Analytic measure of (inflated tube i) & (inflated tube j) for index arrays i, j.

    Zero when the segments are farther apart than two radii; otherwise the
    transversal formula capped at the smaller tube measure.
    """
    rho = inflate * fam.radius
    p0, p1 = fam.endpoints()
    dist = segment_distance(p0[i], p1[i] - p0[i], p0[j], p1[j] - p0[j])
    sin = _sin_angle(fam.directions[i], fam.directions[j])
    cap = np.minimum(fam.tube_measure(rho)[i], fam.tube_measure(rho)[j])
    with np.errstate(divide="ignore"):
        trans = np.where(sin > 0, TRANSVERSAL[fam.dim] * rho**fam.dim / sin, np.inf)
    return np.where(dist <= 2 * rho, np.minimum(trans, cap), 0.0)


def pairwise_intersection_sum(fam: TubeFamily, inflate: float = 3.0, chunk: int = 1 << 20) -> float:
    """sum over i < j of the analytic measure of the inflated tubes' intersection."""
    L = len(fam)
    total = 0.0
    rows = max(1, chunk // max(L, 1))
    for a in range(0, L, rows):
        i = np.repeat(np.arange(a, min(a + rows, L)), L)
        j = np.tile(np.arange(L), min(a + rows, L) - a)
        keep = j > i
        total += float(pair_intersection_bounds(fam, i[keep], j[keep], inflate).sum())
    return total


def intersection_measure_grid(fam: TubeFamily, i: int, j: int, cell: float, inflate: float = 3.0) -> float:
    """Grid estimate of the measure of the intersection of two inflated tubes (cell-centre test)."""
    pair = fam.subset([i, j])
    _, _, counts = rasterize(pair, cell, inflate * fam.radius)
    return float((counts >= 2).sum()) * cell**fam.dim


def intersecting_direction_gaps(fam: TubeFamily, chunk: int = 1 << 20) -> np.ndarray:
    """Angles between line directions (in [0, pi/2]) for every pair of intersecting tubes."""
    L = len(fam)
    p0, p1 = fam.endpoints()
    out = []
    rows = max(1, chunk // max(L, 1))
    for a in range(0, L, rows):
        i = np.repeat(np.arange(a, min(a + rows, L)), L)
        j = np.tile(np.arange(L), min(a + rows, L) - a)
        keep = j > i
        i, j = i[keep], j[keep]
        hit = segment_distance(p0[i], p1[i] - p0[i], p0[j], p1[j] - p0[j]) <= 2 * fam.radius
        cos = np.abs(np.sum(fam.directions[i[hit]] * fam.directions[j[hit]], -1))
        out.append(np.arccos(np.clip(cos, 0, 1)))
    return np.concatenate(out) if out else np.zeros(0)


def cell_pair_mass(profile: RichnessProfile) -> float:
    """sum_{k >= 2} k (k - 1) #_k cell^d, the ordered-pair count of tube coincidences per cell."""
    k = np.arange(len(profile.histogram))
    return float(np.sum(k * (k - 1) * profile.histogram)) * profile.cell**profile.dim
