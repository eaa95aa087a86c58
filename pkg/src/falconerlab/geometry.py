"""Point clouds, IFS generators, delta-nets, grid counters and rigid motions."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ResourceCapError

ORTHO_TOL = 1e-12
ORTHO_REPAIR_TOL = 1e-8
IFS_CAP = 2**24
# grid indices are floor(x/cell + SNAP): a point that sits on a cell boundary
# up to rounding noise lands in the upper cell, as it would in exact arithmetic
SNAP = 1e-9


class GeometryError(ValueError):
    pass


class GeometryCapError(GeometryError, ResourceCapError):
    pass


def _as_points(points, d: int | None = None) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1) if d == 1 else arr.reshape(1, -1)
    if arr.ndim != 2:
        raise GeometryError(f"expected an (N, d) array, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    separation: float | None = None

    def __post_init__(self):
        pts = _as_points(self.points)
        if pts.shape[1] not in (1, 2, 3):
            raise GeometryError(f"dimension must be 1, 2 or 3, got {pts.shape[1]}")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    @classmethod
    def from_list(cls, pts: Iterable[Sequence[float]] | Iterable[float], separation=None):
        arr = np.asarray(list(pts), dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        return cls(arr, separation)

    def min_separation(self) -> float:
        """Exhaustive minimum pairwise distance (inf for fewer than two points)."""
        if len(self) < 2:
            return math.inf
        from scipy.spatial import cKDTree

        dist, _ = cKDTree(self.points).query(self.points, k=2)
        return float(dist[:, 1].min())


def write_cloud_csv(cloud: PointCloud, path: str | Path) -> None:
    header = ["x", "y", "z"][: cloud.dim]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in cloud.points:
            w.writerow([f"{v:.17g}" for v in row])


def read_cloud_csv(path: str | Path) -> PointCloud:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] not in (["x"], ["x", "y"], ["x", "y", "z"]):
        raise GeometryError(f"{path}: header must be x[,y[,z]]")
    data = [[float(v) for v in r] for r in rows[1:] if r]
    return PointCloud(np.asarray(data, dtype=float).reshape(-1, len(rows[0])))


# --------------------------------------------------------------------------
# rigid motions

def _check_orthogonal(a: np.ndarray) -> np.ndarray:
    d = a.shape[0]
    err = np.abs(a.T @ a - np.eye(d)).max()
    if err <= ORTHO_TOL:
        return a
    if err <= ORTHO_REPAIR_TOL:
        u, _, vt = np.linalg.svd(a)
        return u @ vt
    raise GeometryError(f"linear part is not orthogonal (|A^T A - I| = {err:.2e})")


@dataclass(frozen=True)
class RigidMotion:
    """x -> linear @ x + translation, with an orthogonal linear part."""

    linear: np.ndarray
    translation: np.ndarray = field(default=None)

    def __post_init__(self):
        a = np.array(self.linear, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GeometryError("linear part must be square")
        a = _check_orthogonal(a)
        t = np.zeros(a.shape[0]) if self.translation is None else np.array(self.translation, dtype=float)
        if t.shape != (a.shape[0],):
            raise GeometryError("translation has the wrong dimension")
        a.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "linear", a)
        object.__setattr__(self, "translation", t)

    @property
    def dim(self) -> int:
        return self.linear.shape[0]

    @property
    def reflection(self) -> bool:
        return bool(np.linalg.det(self.linear) < 0)

    @property
    def angle(self) -> float:
        """Rotation angle in [0, 2pi) for planar motions (angle of the first column)."""
        if self.dim != 2:
            raise GeometryError("angle is defined for planar motions only")
        th = math.atan2(self.linear[1, 0], self.linear[0, 0])
        return th % (2 * math.pi)

    @property
    def is_linear(self) -> bool:
        return not np.any(self.translation)

    def __call__(self, p) -> np.ndarray:
        return apply_motion(self, p)

    def compose(self, other: RigidMotion) -> RigidMotion:
        """self o other."""
        if other.dim != self.dim:
            raise GeometryError("dimension mismatch")
        return RigidMotion(self.linear @ other.linear, self.linear @ other.translation + self.translation)

    __matmul__ = compose

    def inverse(self) -> RigidMotion:
        at = self.linear.T
        return RigidMotion(at, -at @ self.translation)

    @classmethod
    def identity(cls, d: int = 2) -> RigidMotion:
        return cls(np.eye(d))

    @classmethod
    def rotation(cls, theta: float, center=None) -> RigidMotion:
        """Planar rotation by ``theta`` about ``center`` (default the origin)."""
        a = rotation_matrix(theta)
        if center is None:
            return cls(a)
        c = np.asarray(center, dtype=float)
        return cls(a, c - a @ c)

    @classmethod
    def translation_by(cls, t) -> RigidMotion:
        t = np.asarray(t, dtype=float)
        return cls(np.eye(t.size), t)


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def apply_motion(g: RigidMotion, p) -> np.ndarray:
    """Apply ``g`` to one point (shape (d,)) or to rows of an (N, d) array."""
    arr = np.asarray(p, dtype=float)
    if arr.shape[-1] != g.dim:
        raise GeometryError(f"point dimension {arr.shape[-1]} does not match motion dimension {g.dim}")
    return arr @ g.linear.T + g.translation


def haar_orthogonal(rng: np.random.Generator, d: int, size: int, reflections: bool = True) -> np.ndarray:
    """``size`` Haar-distributed elements of O(d) (or SO(d)), shape (size, d, d).

    d = 2: uniform angle; d = 3: uniform unit quaternion. A fair coin applies
    diag(1, -1) in the plane and -I in space.
    """
    if d == 2:
        th = rng.uniform(0.0, 2 * math.pi, size)
        c, s = np.cos(th), np.sin(th)
        mats = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
        if reflections:
            flip = rng.random(size) < 0.5
            mats[flip, :, 1] *= -1
        return mats
    if d == 3:
        q = rng.standard_normal((size, 4))
        q /= np.linalg.norm(q, axis=1, keepdims=True)
        w, x, y, z = q.T
        mats = np.empty((size, 3, 3))
        mats[:, 0, 0] = 1 - 2 * (y * y + z * z)
        mats[:, 0, 1] = 2 * (x * y - z * w)
        mats[:, 0, 2] = 2 * (x * z + y * w)
        mats[:, 1, 0] = 2 * (x * y + z * w)
        mats[:, 1, 1] = 1 - 2 * (x * x + z * z)
        mats[:, 1, 2] = 2 * (y * z - x * w)
        mats[:, 2, 0] = 2 * (x * z - y * w)
        mats[:, 2, 1] = 2 * (y * z + x * w)
        mats[:, 2, 2] = 1 - 2 * (x * x + y * y)
        if reflections:
            flip = rng.random(size) < 0.5
            mats[flip] *= -1
        return mats
    raise GeometryError("Haar sampling is implemented for d in {2, 3}")


# --------------------------------------------------------------------------
# iterated function systems

@dataclass(frozen=True)
class IfsMap:
    ratio: float
    linear: np.ndarray
    translation: np.ndarray

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return self.ratio * pts @ self.linear.T + self.translation


@dataclass(frozen=True)
class IfsSystem:
    maps: tuple[IfsMap, ...]

    def __post_init__(self):
        if not self.maps:
            raise GeometryError("an IFS needs at least one map")
        dims = set()
        for m in self.maps:
            if not 0 < m.ratio < 1:
                raise GeometryError(f"contraction ratio {m.ratio} not in (0, 1)")
            _check_orthogonal(np.asarray(m.linear, dtype=float))
            dims.add(np.asarray(m.translation).size)
        if len(dims) != 1:
            raise GeometryError("all maps must share one dimension")

    @property
    def dim(self) -> int:
        return int(np.asarray(self.maps[0].translation).size)

    @classmethod
    def similarities(cls, ratio: float, translations: Sequence[Sequence[float]]) -> IfsSystem:
        """Homotheties x -> ratio * x + t, one per translation."""
        ts = [np.atleast_1d(np.asarray(t, dtype=float)) for t in translations]
        eye = np.eye(ts[0].size)
        return cls(tuple(IfsMap(ratio, eye, t) for t in ts))


def middle_third_cantor() -> IfsSystem:
    return IfsSystem.similarities(1 / 3, [[0.0], [2 / 3]])


def four_corner_cantor() -> IfsSystem:
    return IfsSystem.similarities(1 / 4, [[0, 0], [0.75, 0], [0, 0.75], [0.75, 0.75]])


def generate_ifs_cloud(ifs: IfsSystem, depth: int, cap: int = IFS_CAP) -> PointCloud:
    """Images of the origin under every length-``depth`` word, in lexicographic word order."""
    if depth < 0:
        raise GeometryError("depth must be nonnegative")
    if len(ifs.maps) ** depth > cap:
        raise GeometryCapError(f"{len(ifs.maps)}**{depth} points exceed the cap {cap}")
    pts = np.zeros((1, ifs.dim))
    for _ in range(depth):
        pts = np.concatenate([m(pts) for m in ifs.maps])
    return PointCloud(pts)


# --------------------------------------------------------------------------
# delta-nets and grids

def delta_net(cloud: PointCloud, delta: float) -> PointCloud:
    """Greedy delta-separated subset: keep a point iff it is >= delta from all kept points."""
    if delta < 0:
        raise GeometryError("delta must be nonnegative")
    pts = cloud.points
    if delta == 0:
        return PointCloud(pts, separation=0.0)
    d = cloud.dim
    cells = np.floor(pts / delta).astype(np.int64)
    offsets = list(product((-1, 0, 1), repeat=d))
    buckets: dict[tuple, list[int]] = {}
    kept = []
    for i in range(len(pts)):
        c = tuple(cells[i])
        p = pts[i]
        ok = True
        for off in offsets:
            for j in buckets.get(tuple(a + b for a, b in zip(c, off)), ()):
                if np.sum((pts[j] - p) ** 2) < delta * delta:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            kept.append(i)
            buckets.setdefault(c, []).append(i)
    return PointCloud(pts[kept], separation=float(delta))


def cell_indices(points: np.ndarray, cell: float) -> np.ndarray:
    return np.floor(points / cell + SNAP).astype(np.int64)


@dataclass(frozen=True)
class GridCounter:
    """Occupancy counts over half-open cells [k*cell, (k+1)*cell)^d."""

    cell: float
    cells: np.ndarray  # (K, d) int64, sorted lexicographically
    counts: np.ndarray  # (K,) int64
    lo: np.ndarray | None = None  # inclusive cell-index bounds, or None for unbounded
    hi: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.cells.shape[1]

    @property
    def occupied(self) -> int:
        return self.cells.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def count(self, index: Sequence[int]) -> int:
        lookup = self.__dict__.get("_lookup")
        if lookup is None:
            lookup = {tuple(c): int(n) for c, n in zip(self.cells.tolist(), self.counts)}
            object.__setattr__(self, "_lookup", lookup)
        return lookup.get(tuple(int(i) for i in index), 0)


def grid_count(points, cell: float, bounds: tuple[Sequence[float], Sequence[float]] | None = None) -> GridCounter:
    """Count points per half-open ``cell``-box; ``bounds`` = (low corner, high corner) clips cells."""
    if cell <= 0:
        raise GeometryError("cell size must be positive")
    pts = points.points if isinstance(points, PointCloud) else _as_points(points)
    if not np.all(np.isfinite(pts)):
        raise GeometryError("non-finite coordinates")
    idx = cell_indices(pts, cell)
    lo = hi = None
    if bounds is not None:
        lo = cell_indices(np.asarray(bounds[0], dtype=float)[None], cell)[0]
        hi = cell_indices(np.asarray(bounds[1], dtype=float)[None], cell)[0]
        inside = np.all((idx >= lo) & (idx <= hi), axis=1)
        idx = idx[inside]
    if len(idx) == 0:
        return GridCounter(cell, np.zeros((0, pts.shape[1]), np.int64), np.zeros(0, np.int64), lo, hi)
    cells, counts = np.unique(idx, axis=0, return_counts=True)
    return GridCounter(cell, cells, counts.astype(np.int64), lo, hi)


@dataclass(frozen=True)
class Tube:
    """Closed ``radius``-neighbourhood of the segment anchor +- (length/2) * direction."""

    anchor: np.ndarray
    direction: np.ndarray
    length: float
    radius: float

    def __post_init__(self):
        a = np.asarray(self.anchor, dtype=float)
        u = np.asarray(self.direction, dtype=float)
        if a.shape != u.shape or a.size not in (2, 3):
            raise GeometryError("anchor and direction must be 2- or 3-vectors")
        n = np.linalg.norm(u)
        if abs(n - 1) > 1e-12:
            if n == 0:
                raise GeometryError("zero direction")
            u = u / n
        if self.length <= 0 or self.radius <= 0:
            raise GeometryError("length and radius must be positive")
        object.__setattr__(self, "anchor", a)
        object.__setattr__(self, "direction", u)

    @property
    def dim(self) -> int:
        return self.anchor.size

    @property
    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        h = 0.5 * self.length * self.direction
        return self.anchor - h, self.anchor + h
