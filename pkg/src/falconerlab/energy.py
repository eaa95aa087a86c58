"""Configuration sets and group-theoretic energies of discrete measures.

Everything here works on the N^2 pushed atoms z = u - g(v) (weight w_u w_v).
A 2k-tuple (x_1..x_k, y_1..y_k) is exactly a k-tuple of such atoms, so the
mu^{2k} mass of the event "all pushed differences pairwise delta-close" is a
weighted clique sum over the atom proximity graph.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ResourceCapError
from .geometry import RigidMotion, grid_count, haar_orthogonal
from .measures import DiscreteMeasure, Estimate
from .rng import block_map, mc_mean, stream, tree_sum

CONFIG_CAP = 2**20
ENERGY_CAP = 2**24
ATOM_TOL = 1e-12
DENSE_ATOMS = 4096
LETTERS = "abcdefghij"


class EnergyError(ValueError):
    pass


class EnergyCapError(EnergyError, ResourceCapError):
    pass


def _check_k(m: DiscreteMeasure, k: int) -> None:
    if not 2 <= k <= m.dim + 1:
        raise EnergyError(f"k must lie in {{2, ..., d+1}} = {{2, ..., {m.dim + 1}}}, got {k}")


def _linear(g, d: int) -> np.ndarray:
    if isinstance(g, RigidMotion):
        if not g.is_linear:
            raise EnergyError("energies need a motion in O(n) (zero translation)")
        a = g.linear
    else:
        a = np.asarray(g, dtype=float)
    if a.shape != (d, d):
        raise EnergyError("motion dimension does not match the measure")
    return a


def pair_count(k: int) -> int:
    return k * (k - 1) // 2


# --------------------------------------------------------------------------
# configuration vectors

def config_vectors(points: np.ndarray, tuples: np.ndarray) -> np.ndarray:
    """Rows (|x_i - x_j|)_{i<j} in lexicographic (i, j) order for each index tuple."""
    k = tuples.shape[1]
    cols = []
    for i in range(k):
        for j in range(i + 1, k):
            cols.append(np.linalg.norm(points[tuples[:, i]] - points[tuples[:, j]], axis=1))
    return np.stack(cols, axis=1)


def all_tuples(n: int, k: int, distinct: bool = False) -> np.ndarray:
    idx = np.stack(np.unravel_index(np.arange(n**k), (n,) * k), axis=1)
    if distinct:
        keep = np.ones(len(idx), bool)
        for i in range(k):
            for j in range(i + 1, k):
                keep &= idx[:, i] != idx[:, j]
        idx = idx[keep]
    return idx


def _tuple_weights(m: DiscreteMeasure, tuples: np.ndarray) -> np.ndarray:
    return np.prod(m.weights[tuples], axis=1)


def config_cells(m: DiscreteMeasure, k: int, delta: float, cap: int = CONFIG_CAP, samples: int | None = None,
                 seed: int = 0, distinct: bool = False) -> int:
    """Occupied delta-cells of the k-point configuration vectors.

    All N^k tuples are enumerated when N^k <= cap; otherwise ``samples``
    mu-random tuples are used and the count is a lower bound.
    """
    _check_k(m, k)
    n = len(m)
    if n**k <= cap:
        tuples = all_tuples(n, k, distinct)
    elif samples:
        rng = stream(seed, "config_cells")
        tuples = rng.choice(n, size=(samples, k), p=m.weights)
        if distinct:
            tuples = tuples[np.all(np.diff(np.sort(tuples, axis=1), axis=1) != 0, axis=1)]
    else:
        raise EnergyCapError(f"N^k = {n}^{k} exceeds the enumeration cap {cap}; pass samples= to sample")
    if len(tuples) == 0:
        return 0
    return grid_count(config_vectors(m.points, tuples), delta).occupied


# --------------------------------------------------------------------------
# pushed measures

@dataclass(frozen=True)
class PushedMeasure:
    atoms: np.ndarray
    weights: np.ndarray

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def __len__(self) -> int:
        return len(self.weights)


def raw_atoms(m: DiscreteMeasure, g) -> tuple[np.ndarray, np.ndarray]:
    """All N^2 atoms u - g(v) with weights w_u w_v, unconsolidated (u-major order)."""
    a = _linear(g, m.dim)
    x = m.points
    gy = x @ a.T
    z = (x[:, None, :] - gy[None, :, :]).reshape(-1, m.dim)
    w = np.outer(m.weights, m.weights).ravel()
    return z, w


def consolidate(z: np.ndarray, w: np.ndarray, tol: float = ATOM_TOL) -> tuple[np.ndarray, np.ndarray]:
    keys = np.round(z / tol).astype(np.int64)
    uniq, first, inv = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    weights = np.bincount(inv.ravel(), weights=w, minlength=len(uniq))
    return z[first], weights


def push_measure(m: DiscreteMeasure, g) -> PushedMeasure:
    """Distribution of u - g(v) for independent u, v ~ m."""
    z, w = raw_atoms(m, g)
    atoms, weights = consolidate(z, w)
    return PushedMeasure(atoms, weights)


# --------------------------------------------------------------------------
# group energy

@dataclass(frozen=True)
class EnergyResult:
    value: float
    exact: bool
    samples: int = 0
    stderr: float = 0.0


def _clique_mass(adj: np.ndarray, w: np.ndarray, k: int) -> float:
    """sum over k-tuples of atoms of prod w * prod_{i<j} adj[a_i, a_j]."""
    subs, ops = [], []
    for i in range(k):
        for j in range(i + 1, k):
            subs.append(LETTERS[i] + LETTERS[j])
            ops.append(adj)
    for i in range(k):
        subs.append(LETTERS[i])
        ops.append(w)
    return float(np.einsum(",".join(subs) + "->", *ops, optimize="greedy"))


def _pair_mass_tree(z: np.ndarray, w: np.ndarray, r: float, p: float = 2.0) -> float:
    """sum_{a,b} w_a w_b [|z_a - z_b|_p <= r] by a weighted dual-tree count."""
    tree = cKDTree(z)
    return float(tree.count_neighbors(tree, r, p=p, weights=(w, w)))


def group_energy(m: DiscreteMeasure, g, k: int, delta: float, cap: int = ENERGY_CAP, samples: int | None = None,
                 seed: int = 0) -> EnergyResult:
    """mu^{2k} mass of 2k-tuples with |(x_i - g y_i) - (x_j - g y_j)| <= delta for all i < j."""
    _check_k(m, k)
    n = len(m)
    z, w = raw_atoms(m, g)
    if k == 2 and len(z) > DENSE_ATOMS:
        zc, wc = consolidate(z, w)
        return EnergyResult(min(_pair_mass_tree(zc, wc, delta), 1.0), True)
    if n ** (2 * k) <= cap:
        zc, wc = consolidate(z, w)
        diff = np.linalg.norm(zc[:, None] - zc[None], axis=-1)
        return EnergyResult(min(_clique_mass((diff <= delta).astype(float), wc, k), 1.0), True)
    if not samples:
        raise EnergyCapError(f"N^(2k) = {n}^{2 * k} exceeds the cap {cap}; pass samples= to sample")
    a = _linear(g, m.dim)

    def draw(rng, count):
        xi = rng.choice(n, size=(count, k), p=m.weights)
        yi = rng.choice(n, size=(count, k), p=m.weights)
        d = m.points[xi] - m.points[yi] @ a.T
        ok = np.ones(count, bool)
        for i in range(k):
            for j in range(i + 1, k):
                ok &= np.linalg.norm(d[:, i] - d[:, j], axis=1) <= delta
        return ok.astype(float)

    mean, se = mc_mean(draw, samples, seed, "group_energy")
    return EnergyResult(mean, False, samples, se)


def energy_rhs(m: DiscreteMeasure, g, k: int, delta: float, radius_factor: float = 2.5) -> float:
    """sum over pushed atoms z of weight(z) * nu_g(closed B_{radius_factor*delta}(z))^(k-1)."""
    _check_k(m, k)
    pm = push_measure(m, g)
    r = radius_factor * delta
    if len(pm) <= DENSE_ATOMS:
        diff = np.linalg.norm(pm.atoms[:, None] - pm.atoms[None], axis=-1)
        mass = (diff <= r).astype(float) @ pm.weights
    else:
        tree = cKDTree(pm.atoms)
        mass = np.array([pm.weights[idx].sum() for idx in tree.query_ball_point(pm.atoms, r)])
    return float(pm.weights @ np.minimum(mass, 1.0) ** (k - 1))


def haar_energy(m: DiscreteMeasure, k: int, delta: float, g_samples: int = 64, seed: int = 0,
                reflections: bool = True, threads: int = 1, cap: int = ENERGY_CAP,
                tuple_samples: int | None = None) -> Estimate:
    """Haar average over O(d) of group_energy, by Monte Carlo over g."""
    _check_k(m, k)
    if m.dim not in (2, 3):
        raise EnergyError("Haar averaging is implemented for d in {2, 3}")
    if len(m) == 1:
        return Estimate(1.0, 0.0)

    def fn(rng, start, count):
        mats = haar_orthogonal(rng, m.dim, count, reflections)
        vals = np.array([group_energy(m, a, k, delta, cap, tuple_samples, seed + start + i).value
                         for i, a in enumerate(mats)])
        return np.array([vals.sum(), (vals * vals).sum()])

    s, s2 = tree_sum(block_map(fn, g_samples, seed, f"haar_energy/{k}/{delta!r}", threads, block=16))
    mean = s / g_samples
    var = max(s2 / g_samples - mean * mean, 0.0) * g_samples / max(g_samples - 1, 1)
    return Estimate(float(mean), float(math.sqrt(var / g_samples)))


def nu_l2_mass(m: DiscreteMeasure, k: int, delta: float, samples: int = 100_000, seed: int = 0,
               cap: int = CONFIG_CAP) -> Estimate:
    """delta^{-k(k-1)/2} * P(|t - t'|_inf <= delta) for independent configuration vectors t, t'.

    Exact (weighted sup-norm pair count) when N^k <= cap, otherwise Monte Carlo.
    """
    _check_k(m, k)
    n = len(m)
    scale = delta ** -pair_count(k)
    if n**k <= cap:
        tuples = all_tuples(n, k)
        t, w = consolidate(config_vectors(m.points, tuples), _tuple_weights(m, tuples))
        return Estimate(scale * min(_pair_mass_tree(t, w, delta, p=np.inf), 1.0), 0.0)

    def draw(rng, count):
        a = rng.choice(n, size=(count, k), p=m.weights)
        b = rng.choice(n, size=(count, k), p=m.weights)
        ta, tb = config_vectors(m.points, a), config_vectors(m.points, b)
        return (np.abs(ta - tb).max(axis=1) <= delta).astype(float)

    mean, se = mc_mean(draw, samples, seed, "nu_l2_mass")
    return Estimate(scale * mean, scale * se)


def chain_ratio(m: DiscreteMeasure, k: int, delta: float, g_samples: int = 64, seed: int = 0, threads: int = 1) -> float:
    """nu_l2_mass / (delta^{-d(k-1)} * haar_energy)."""
    num = nu_l2_mass(m, k, delta, seed=seed).value
    den = delta ** (-m.dim * (k - 1)) * haar_energy(m, k, delta, g_samples, seed, threads=threads).value
    return num / den
