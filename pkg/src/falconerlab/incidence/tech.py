"""Share of squared near-coincidence mass carried by motions far from the identity."""
from __future__ import annotations

import math

import numpy as np
from scipy.spatial import cKDTree

from ..geometry import haar_orthogonal
from ..measures import DiscreteMeasure, Estimate
from ..rng import block_map, tree_sum
from .tubes import IncidenceError

FAR_FROM_IDENTITY = 0.1
TRANSLATION_RADIUS = 3.0


def coincidence_mass(m1: DiscreteMeasure, m2: DiscreteMeasure, S: np.ndarray, s: np.ndarray, delta: float,
                     tree: cKDTree | None = None) -> np.ndarray:
    """m1 x m2 {(x1, x3): |x1 - (S x3 + s)| <= 2 delta} for each motion (S[i], s[i])."""
    tree = cKDTree(m1.points) if tree is None else tree
    w1, w2 = np.array(m1.weights), np.array(m2.weights)  # cKDTree wants writable buffers
    out = np.empty(len(S))
    for i in range(len(S)):
        moved = cKDTree(m2.points @ S[i].T + s[i])
        out[i] = tree.count_neighbors(moved, 2 * delta, weights=(w1, w2))
    return out


def operator_gap(S: np.ndarray) -> np.ndarray:
    """||S - I|| in operator norm for a stack of 2x2 orthogonal matrices."""
    return np.linalg.norm(S - np.eye(2), ord=2, axis=(-2, -1))


def tech_ratio(m1: DiscreteMeasure, m2: DiscreteMeasure, delta: float, g_samples: int = 20_000, seed: int = 0,
               reflections: bool = True, threads: int = 1) -> Estimate:
    """Monte Carlo ratio int_{U'} F(g)^2 dg / int F(g)^2 dg over g = (S, s).

    S is Haar on O(2) (or SO(2)), s uniform in the radius-3 disc, and U' the
    motions with ||S - I|| >= 0.1. The standard error comes from the delta
    method for a ratio of means.
    """
    if m1.dim != 2 or m2.dim != 2:
        raise IncidenceError("the condition is stated for planar measures")
    tree = cKDTree(m1.points)

    def fn(rng, start, count):
        S = haar_orthogonal(rng, 2, count, reflections)
        rad = TRANSLATION_RADIUS * np.sqrt(rng.random(count))
        ang = 2 * math.pi * rng.random(count)
        s = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
        f2 = coincidence_mass(m1, m2, S, s, delta, tree) ** 2
        far = operator_gap(S) >= FAR_FROM_IDENTITY
        a, b = f2 * far, f2
        return np.array([a.sum(), b.sum(), (a * a).sum(), (b * b).sum(), (a * b).sum()])

    sa, sb, saa, sbb, sab = tree_sum(block_map(fn, g_samples, seed, "tech_ratio", threads, block=1024))
    n = g_samples
    if sb == 0:
        raise IncidenceError("no sampled motion brings the clouds within 2 delta; increase g_samples")
    ma, mb = sa / n, sb / n
    ratio = ma / mb
    # var of a - ratio * b, divided by n mb^2
    var = (saa - 2 * ratio * sab + ratio * ratio * sbb) / n - (ma - ratio * mb) ** 2
    return Estimate(float(ratio), float(math.sqrt(max(var, 0.0) / n) / mb))


def haar_far_fraction(reflections: bool = True) -> float:
    """Haar probability of ||S - I|| >= 0.1: rotations with |2 sin(theta/2)| < 0.1 are near."""
    near_arc = 4 * math.asin(FAR_FROM_IDENTITY / 2) / (2 * math.pi)
    return 1 - (near_arc / 2 if reflections else near_arc)
