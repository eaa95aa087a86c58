"""Standard tube arrangements: bushes through the origin and random placements."""
from __future__ import annotations

import math

import numpy as np

from ..geometry import haar_orthogonal
from ..rng import stream
from .tubes import IncidenceError, TubeFamily

GOLDEN = (1 + math.sqrt(5)) / 2


def line_angle(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Angle between the lines spanned by unit vectors u and v, in [0, pi/2]."""
    return np.arccos(np.clip(np.abs(np.sum(u * v, -1)), 0.0, 1.0))


def min_line_separation(dirs: np.ndarray) -> float:
    if len(dirs) < 2:
        return math.pi / 2
    g = np.abs(dirs @ dirs.T)
    np.fill_diagonal(g, 0.0)
    return float(np.arccos(min(g.max(), 1.0)))


def fibonacci_directions(n: int, hemisphere: bool = True) -> np.ndarray:
    """Fibonacci lattice on the upper hemisphere (or the whole sphere)."""
    i = np.arange(n) + 0.5
    z = 1 - i / n if hemisphere else 1 - 2 * i / n
    phi = 2 * math.pi * i / GOLDEN
    r = np.sqrt(1 - z * z)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def line_directions(d: int, sep: float) -> np.ndarray:
    """A maximal sep-separated set of line directions (antipodes identified).

    d = 2: angles 0, sep, 2 sep, ... below pi. d = 3: greedy net over a dense
    Fibonacci candidate set on the upper hemisphere, using a spatial hash.
    """
    if not 0 < sep < math.pi / 2:
        raise IncidenceError("separation must lie in (0, pi/2)")
    if d == 2:
        th = np.arange(int(math.floor(math.pi / sep + 1e-12))) * sep
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    if d != 3:
        raise IncidenceError("directions are generated for d in {2, 3}")
    cand = fibonacci_directions(int(math.ceil(40 * math.pi / sep**2)))
    chord = 2 * math.sin(sep / 2)
    cos_sep = math.cos(sep)
    buckets: dict[tuple, list[int]] = {}
    kept: list[np.ndarray] = []
    keys = np.floor(cand / chord).astype(np.int64)
    offsets = [(a, b, c) for a in (-1, 0, 1) for b in (-1, 0, 1) for c in (-1, 0, 1)]
    for p, key in zip(cand, map(tuple, keys)):
        ok = True
        for sgn in (1, -1):
            k = key if sgn == 1 else tuple(np.floor(-p / chord).astype(np.int64))
            for o in offsets:
                for j in buckets.get((k[0] + o[0], k[1] + o[1], k[2] + o[2]), ()):
                    if sgn * float(kept[j] @ p) > cos_sep:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            buckets.setdefault(key, []).append(len(kept))
            kept.append(p)
    return np.array(kept)


def bush(d: int, delta: float, sep_factor: float = 10.0, length: float = 1.0, count: int | None = None) -> TubeFamily:
    """Unit tubes of radius delta through the origin with sep_factor*delta-separated directions.

    In the plane ``count`` takes consecutive directions of the maximal net.
    """
    sep = sep_factor * delta
    dirs = line_directions(d, sep)
    if count is not None:
        if count > len(dirs):
            raise IncidenceError(f"only {len(dirs)} directions at separation {sep}")
        dirs = dirs[:count]
    return TubeFamily(np.zeros_like(dirs), dirs, length, delta, sep)


def random_family(d: int, delta: float, L: int, seed: int = 0, sep: float | None = None,
                  length: float = 1.0) -> TubeFamily:
    """L unit tubes with sep-separated directions (default delta) and centres uniform in [0, 1]^d."""
    sep = delta if sep is None else sep
    rng = stream(seed, f"random_family/{d}")
    if d == 2:
        dirs_angle = (np.arange(L) * math.pi / L + rng.random() * math.pi) % math.pi
        dirs = np.stack([np.cos(dirs_angle), np.sin(dirs_angle)], axis=1)
        if L > 1 and math.pi / L < sep * (1 - 1e-12):
            raise IncidenceError(f"{L} planar directions cannot be {sep}-separated")
    else:
        dirs = fibonacci_directions(L) @ haar_orthogonal(rng, 3, 1, reflections=False)[0].T
        got = min_line_separation(dirs)
        if got < sep:
            raise IncidenceError(f"{L} directions are only {got:.3g}-separated (< {sep})")
    centers = rng.random((L, d))
    return TubeFamily(centers, dirs, length, delta, sep)
