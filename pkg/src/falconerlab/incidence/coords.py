"""Orientation-preserving planar motions as points of R^3.

A rotation by theta about x0 is sent to (x0, cot(theta/2)). The motions
carrying a point x3 to x1 then form a straight line in these coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geometry import PointCloud, RigidMotion, rotation_matrix
from .tubes import IncidenceError, TubeFamily

Z_CLIP = 1 / math.tan(0.05)  # rotation angle >= 0.1
BOX_RADIUS = 3.0


@dataclass(frozen=True)
class MotionCoords:
    x0: np.ndarray
    z: float
    valid: bool = True

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float).reshape(2))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.x0[0], self.x0[1], self.z])


def _perp(v: np.ndarray) -> np.ndarray:
    """Counter-clockwise quarter turn (u, v) -> (-v, u)."""
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def motion_to_coords(g: RigidMotion) -> MotionCoords:
    if g.dim != 2:
        raise IncidenceError("coordinates are defined for planar motions")
    if g.reflection:
        raise IncidenceError("motion has a reflection part; only rotations have a fixed-point chart")
    theta = math.atan2(g.linear[1, 0], g.linear[0, 0]) % (2 * math.pi)
    if theta == 0.0 or np.allclose(g.linear, np.eye(2), atol=1e-15):
        # pure translations sit at z = infinity
        return MotionCoords(np.zeros(2), math.inf, False)
    x0 = np.linalg.solve(g.linear - np.eye(2), -g.translation)
    return MotionCoords(x0, math.cos(theta / 2) / math.sin(theta / 2))


def coords_to_motion(c: MotionCoords) -> RigidMotion:
    if not c.valid or not math.isfinite(c.z):
        raise IncidenceError("invalid coordinates (pure translation)")
    return RigidMotion.rotation(2 * math.atan2(1.0, c.z), c.x0)


def coords_to_motions(xyz: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized inverse chart: (N, 3) coordinates -> (N, 2, 2) rotations and (N, 2) translations."""
    xyz = np.atleast_2d(xyz)
    theta = 2 * np.arctan2(1.0, xyz[:, 2])
    c, s = np.cos(theta), np.sin(theta)
    S = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
    x0 = xyz[:, :2]
    return S, x0 - np.einsum("nij,nj->ni", S, x0)


@dataclass(frozen=True)
class PairLine:
    """anchor + z * direction; direction has third component 1 unless degenerate."""

    anchor: np.ndarray
    direction: np.ndarray
    degenerate: bool = False

    def point(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return self.anchor + z[..., None] * self.direction

    def motion(self, z: float) -> RigidMotion:
        p = self.point(z)
        return coords_to_motion(MotionCoords(p[:2], float(p[2])))


def pair_line(x1, x3) -> PairLine:
    """Coordinates of all rotations g with g(x3) = x1.

    Fixed points lie on the bisector, x0 = mid + t n with n the unit normal,
    and cot(theta/2) = 2t/|x1 - x3|; hence x0 = mid + z (x1 - x3)^perp / 2.
    """
    x1, x3 = np.asarray(x1, dtype=float), np.asarray(x3, dtype=float)
    if np.array_equal(x1, x3):
        return PairLine(np.array([x1[0], x1[1], 0.0]), np.array([0.0, 0.0, 1.0]), True)
    mid = (x1 + x3) / 2
    return PairLine(np.array([mid[0], mid[1], 0.0]), np.append(_perp(x1 - x3) / 2, 1.0))


def build_pair_tubes(F1: PointCloud, F2: PointCloud, delta: float, box_radius: float = BOX_RADIUS,
                     z_clip: float = Z_CLIP) -> TubeFamily:
    """One delta-tube per pair (x1, x3), its axis the pair line clipped to
    |x0| <= box_radius (sup norm) and |z| <= z_clip."""
    if len(F1) == 0 or len(F2) == 0:
        raise IncidenceError("empty cloud")
    if F1.dim != 2 or F2.dim != 2:
        raise IncidenceError("pair tubes need planar clouds")
    x1 = np.repeat(F1.points, len(F2), axis=0)
    x3 = np.tile(F2.points, (len(F1), 1))
    if np.any(np.all(x1 == x3, axis=1)):
        raise IncidenceError("coincident pair: the clouds share a point")
    mid = (x1 + x3) / 2
    v = _perp(x1 - x3) / 2
    # z range where |mid + z v|_inf <= box_radius, intersected with |z| <= z_clip
    lo = np.full(len(mid), -z_clip)
    hi = np.full(len(mid), z_clip)
    with np.errstate(divide="ignore", invalid="ignore"):
        for ax in range(2):
            a = (-box_radius - mid[:, ax]) / v[:, ax]
            b = (box_radius - mid[:, ax]) / v[:, ax]
            nz = v[:, ax] != 0
            lo = np.where(nz, np.maximum(lo, np.minimum(a, b)), lo)
            hi = np.where(nz, np.minimum(hi, np.maximum(a, b)), hi)
    if np.any(hi <= lo):
        raise IncidenceError("a pair line misses the coordinate box; enlarge box_radius")
    direction = np.concatenate([v, np.ones((len(v), 1))], axis=1)
    speed = np.linalg.norm(direction, axis=1)
    zc = (lo + hi) / 2
    anchors = np.concatenate([mid + zc[:, None] * v, zc[:, None]], axis=1)
    return TubeFamily(anchors, direction, (hi - lo) * speed, delta)


def random_rotations(rng: np.random.Generator, size: int, spread: float = 3.0) -> list[RigidMotion]:
    """Rotations with uniform angle and translation uniform in [-spread, spread]^2."""
    theta = rng.random(size) * 2 * math.pi
    s = rng.uniform(-spread, spread, (size, 2))
    return [RigidMotion(rotation_matrix(t), v) for t, v in zip(theta, s)]
