"""Named experiments. Each recipe declares typed defaults (tolerances included),
and returns tables plus verdicts; the runner in ``cli`` handles files."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import bounds as B
from .energy import energy_rhs, group_energy, haar_energy, nu_l2_mass
from .geometry import (
    PointCloud,
    RigidMotion,
    four_corner_cantor,
    generate_ifs_cloud,
    haar_orthogonal,
    middle_third_cantor,
)
from .incidence import (
    bush,
    bush_radius_bound,
    bush_radius_check,
    cell_pair_mass,
    coords_to_motion,
    fit_richness_exponent,
    haar_far_fraction,
    motion_to_coords,
    pair_line,
    pairwise_intersection_sum,
    random_family,
    rich_profile,
    tech_ratio,
    union_volume,
    verify_bound,
)
from .incidence.coords import coords_to_motions
from .incidence.tubes import average_profiles, bound_value
from .measures import (
    DiscreteMeasure,
    ball_average,
    box_count_series,
    box_dimension,
    frostman_exponent,
    spherical_average,
)
from .rng import stream


@dataclass
class Table:
    header: list[str]
    rows: list[list] = field(default_factory=list)


@dataclass
class Verdict:
    name: str
    value: float
    tolerance: object  # number (upper bound), [lo, hi] interval, or {"min": x}
    passed: bool

    def as_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "tolerance": self.tolerance, "pass": self.passed}


def at_most(name, value, tol) -> Verdict:
    return Verdict(name, float(value), tol, bool(value <= tol))


def at_least(name, value, floor) -> Verdict:
    return Verdict(name, float(value), {"min": floor}, bool(value >= floor))


def within(name, value, lo, hi) -> Verdict:
    return Verdict(name, float(value), [lo, hi], bool(lo <= value <= hi))


@dataclass
class Context:
    seed: int = 0
    threads: int = 1


@dataclass(frozen=True)
class Recipe:
    name: str
    description: str
    claim: str
    defaults: dict
    fn: Callable[[dict, Context], tuple[dict[str, Table], list[Verdict]]]


REGISTRY: dict[str, Recipe] = {}


def recipe(name: str, description: str, claim: str, **defaults):
    def wrap(fn):
        REGISTRY[name] = Recipe(name, description, claim, defaults, fn)
        return fn
    return wrap


def spread(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(v.max() / v.min()) if v.min() > 0 else math.inf


# --------------------------------------------------------------------------
# bounds

@recipe("bounds-table", "k-point configuration dimension bounds over an s-grid",
        "configuration-set dimension bound from the spherical decay exponent; planar k=3 table 3s-1 / 2s-0.5 / 2.5s-1",
        n=2, k=3, s_start=0.1, s_stop=2.0, s_step=0.1, spot_s=(0.4, 0.8, 1.5), spot_values=(0.2, 1.1, 2.75),
        spot_tol=1e-12)
def _bounds_table(p, ctx):
    count = int(round((p["s_stop"] - p["s_start"]) / p["s_step"])) + 1
    grid = [round(p["s_start"] + i * p["s_step"], 12) for i in range(count)]
    rows = B.bounds_table(p["n"], p["k"], grid)
    table = Table(["n", "k", "s", "gamma", "bound", "lebesgue_positive"],
                  [[r["n"], r["k"], r["s"], float(r["gamma"]), float(r["bound"]), r["lebesgue_positive"]] for r in rows])
    err = max((abs(float(B.config_dim_bound(p["n"], p["k"], s).value) - v)
               for s, v in zip(p["spot_s"], p["spot_values"])), default=0.0)
    return {"bounds": table}, [at_most("spot_value_error", err, p["spot_tol"])]


@recipe("bounds-checks", "continuity of gamma_s, absolute-continuity thresholds, asymmetric criterion",
        "piecewise spherical decay exponent; L^2 threshold s > n/2 + 1/3 for distances; asymmetric criterion s2 + s1/2 > 3n/4 + 1/2",
        n_max=6, continuity_tol=1e-12, threshold_tol=1e-9, grid=50, max_mismatches=0)
def _bounds_checks(p, ctx):
    jumps = []
    for n in range(2, p["n_max"] + 1):
        # at s = n (the top cut when n = 2) there is no right-hand side to compare
        for cut in (c for c in (Fraction(n - 1, 2), Fraction(n, 2), Fraction(n + 2, 2)) if c < n):
            for eps in (1e-13,):
                jumps.append(abs(B.gamma_s(n, float(cut) - eps) - B.gamma_s(n, float(cut) + eps)))
    thr = Table(["n", "closed_form", "bisection", "expected"])
    worst = 0.0
    for n in range(2, p["n_max"] + 1):
        a, b = B.abs_continuity_threshold(n, 2), B.abs_continuity_threshold_bisect(n, 2)
        thr.rows.append([n, a, b, n / 2 + 1 / 3])
        worst = max(worst, abs(a - (n / 2 + 1 / 3)), abs(a - b))
    mismatches = 0
    for n in (2, 3):
        lo, hi = Fraction(n, 2), Fraction(n + 2, 2)
        g = p["grid"]
        for i in range(g):
            for j in range(g):
                s1 = lo + (hi - lo) * Fraction(i, g - 1)
                s2 = lo + (hi - lo) * Fraction(j, g - 1)
                if s2 < s1:
                    continue
                mismatches += B.asymmetric_positive(n, s1, s2) != (s2 + s1 / 2 > Fraction(3 * n, 4) + Fraction(1, 2))
    return {"thresholds": thr}, [at_most("gamma_max_jump", max(jumps), p["continuity_tol"]),
                                 at_most("threshold_error", worst, p["threshold_tol"]),
                                 at_most("asymmetric_mismatches", mismatches, p["max_mismatches"])]


# --------------------------------------------------------------------------
# energies

@recipe("lemma52-sweep", "group energy against its ball-mass majorant on random small clouds",
        "energy inequality E^k(mu, g, delta) <= sum_z nu_g(z) nu_g(B(z, 2.5 delta))^(k-1)",
        clouds=100, motions=20, max_points=8, ks=(2, 3), deltas=(0.05, 0.1, 0.3), max_violations=0)
def _energy_majorant_sweep(p, ctx):
    table = Table(["cloud", "motion", "k", "delta", "energy", "rhs"])
    bad = 0
    for c in range(p["clouds"]):
        rng = stream(ctx.seed, "energy-majorant", c)
        n = int(rng.integers(1, p["max_points"] + 1))
        w = rng.random(n) + 0.1
        m = DiscreteMeasure(PointCloud(rng.random((n, 2))), w / w.sum())
        for j, a in enumerate(haar_orthogonal(rng, 2, p["motions"])):
            for k in p["ks"]:
                for d in p["deltas"]:
                    e = group_energy(m, a, k, d).value
                    r = energy_rhs(m, a, k, d)
                    bad += e > r + 1e-12
                    table.rows.append([c, j, k, d, e, r])
    return {"energy_majorant": table}, [at_most("violations", bad, p["max_violations"])]


@recipe("gilp-chain", "configuration L^2 mass over Haar energy on the four-corner Cantor set",
        "L^2 chain: nu_delta mass of configuration vectors is bounded by delta^(-d(k-1)) times the Haar-averaged energy",
        depth=4, k=2, scale_exps=(3, 4, 5, 6), g_samples=32, max_spread=4.0)
def _gilp_chain(p, ctx):
    m = DiscreteMeasure.uniform(generate_ifs_cloud(four_corner_cantor(), p["depth"]))
    table = Table(["delta", "nu_mass", "haar_energy", "haar_stderr", "ratio"])
    ratios = []
    for j in p["scale_exps"]:
        d = 2.0**-j
        nu = nu_l2_mass(m, p["k"], d, seed=ctx.seed).value
        he = haar_energy(m, p["k"], d, p["g_samples"], ctx.seed, threads=ctx.threads)
        ratio = nu / (d ** (-m.dim * (p["k"] - 1)) * he.value)
        ratios.append(ratio)
        table.rows.append([d, nu, he.value, he.stderr, ratio])
    return {"chain": table}, [at_most("ratio_spread", spread(ratios), p["max_spread"])]


@recipe("energy-oracle", "two-point group energy against brute-force enumeration",
        "definition of the group energy E^k(mu, g, delta)", delta=0.1, expected=0.375, tol=0.0)
def _energy_oracle(p, ctx):
    m = DiscreteMeasure.uniform(PointCloud.from_list([[0.0, 0.0], [1.0, 0.0]]))
    e = group_energy(m, np.eye(2), 2, p["delta"]).value
    return {"energy": Table(["delta", "energy"], [[p["delta"], e]])}, [at_most("abs_error", abs(e - p["expected"]), p["tol"])]


# --------------------------------------------------------------------------
# measures

@recipe("fourier-oracles", "ball and spherical averages of |mu^|^2 against closed forms",
        "Fourier side of the energy: ball averages of |mu^|^2 and spherical averages",
        samples=100_000, radius=1.0, max_z=3.0)
def _fourier(p, ctx):
    from scipy import integrate

    R = p["radius"]
    pm = DiscreteMeasure.point_mass([0.2, 0.4])
    two = DiscreteMeasure.uniform(PointCloud.from_list([[-0.5, 0.0], [0.5, 0.0]]))
    ball_pm = ball_average(pm, R, p["samples"], ctx.seed, ctx.threads)
    ball_two = ball_average(two, R, p["samples"], ctx.seed, ctx.threads)
    sph_two = spherical_average(two, R, p["samples"], ctx.seed, ctx.threads)
    q_ball = integrate.quad(lambda u: math.cos(math.pi * u) ** 2 * 2 * math.sqrt(R * R - u * u), -R, R, limit=200)[0]
    q_sph = integrate.quad(lambda f: math.cos(math.pi * R * math.cos(f)) ** 2, 0, 2 * math.pi, limit=200)[0] / (2 * math.pi)
    rows = [["ball_point_mass", ball_pm.value, ball_pm.stderr, math.pi * R * R],
            ["ball_two_points", ball_two.value, ball_two.stderr, q_ball],
            ["sphere_two_points", sph_two.value, sph_two.stderr, q_sph],
            ["sphere_point_mass", spherical_average(pm, R).value, 0.0, 1.0]]
    z = max(abs(v - o) / se if se > 0 else (0.0 if v == o else math.inf) for _, v, se, o in rows)
    return {"fourier": Table(["case", "value", "stderr", "oracle"], rows)}, [at_most("max_z", z, p["max_z"])]


@recipe("cantor-dimensions", "box and Frostman exponents of self-similar Cantor sets",
        "dimension of self-similar sets: log 2 / log 3 and 1", cantor_depth=7, corner_depth=5, box_tol=0.02,
        frostman_tol=0.05)
def _dimensions(p, ctx):
    c = generate_ifs_cloud(middle_third_cantor(), p["cantor_depth"])
    series = box_count_series(c, [3.0**-j for j in range(1, p["cantor_depth"] + 1)])
    box = box_dimension(series)
    fc = DiscreteMeasure.uniform(generate_ifs_cloud(four_corner_cantor(), p["corner_depth"]))
    fr = frostman_exponent(fc, [4.0**-j for j in range(1, p["corner_depth"] + 1)])
    t = Table(["scale", "boxes"], [[s, int(v)] for s, v in zip(series.scales, series.values)])
    target = math.log(2) / math.log(3)
    return {"box_counts": t}, [within("cantor_box_dimension", box, target - p["box_tol"], target + p["box_tol"]),
                               within("four_corner_frostman", fr, 1 - p["frostman_tol"], 1 + p["frostman_tol"])]


# --------------------------------------------------------------------------
# incidence

def _profile_table(profile, bound: str, delta: float) -> Table:
    bv = bound_value(bound, delta, profile.L, profile.r)
    return Table(["r", "measure", "bound_value", "ratio"],
                 [[int(r), m, b, m / b] for r, m, b in zip(profile.r, profile.measure, bv)])


@recipe("coords-roundtrip", "fixed-point coordinates of planar rotations and pair lines",
        "rigid-motion coordinates (fixed point, cot(theta/2)); motions carrying x3 to x1 form a line",
        samples=10_000, roundtrip_tol=1e-10, line_tol=1e-9)
def _coords(p, ctx):
    rng = stream(ctx.seed, "coords")
    n = p["samples"]
    theta = rng.uniform(1e-3, 2 * math.pi - 1e-3, n)
    x0 = rng.uniform(-3, 3, (n, 2))
    worst = 0.0
    for t, c in zip(theta, x0):
        g = RigidMotion.rotation(t, c)
        h = coords_to_motion(motion_to_coords(g))
        worst = max(worst, float(np.abs(h.linear - g.linear).max()), float(np.abs(h.translation - g.translation).max()))
    pairs = max(1, n // 10)
    x1 = rng.uniform(-1, 1, (pairs, 2))
    x3 = x1 + rng.uniform(0.5, 1.5, (pairs, 1)) * np.stack([np.cos(a := rng.uniform(0, 2 * math.pi, pairs)), np.sin(a)], 1)
    z = rng.normal(scale=3, size=(pairs, 10))
    pts = np.concatenate([pair_line(a, b).point(zs) for a, b, zs in zip(x1, x3, z)])
    S, s = coords_to_motions(pts)
    moved = np.einsum("nij,nj->ni", S, np.repeat(x3, 10, axis=0)) + s
    line_err = float(np.abs(moved - np.repeat(x1, 10, axis=0)).max())
    t = Table(["check", "samples", "max_error"], [["roundtrip", n, worst], ["pair_line", pairs * 10, line_err]])
    return {"coords": t}, [at_most("roundtrip_error", worst, p["roundtrip_tol"]),
                           at_most("pair_line_error", line_err, p["line_tol"])]


@recipe("bush3d", "richness profile of a 10-delta-separated bush through the origin in R^3",
        "bush law lambda(P_r) ~ delta^3 L^1.5 / r^1.5 and rich points satisfy |x| <= 10/sqrt(r)",
        delta=2.0**-7, sep_factor=10.0, cell=0.0, exponent_lo=-1.7, exponent_hi=-1.3, max_radius_violations=0)
def _bush3d(p, ctx):
    d = p["delta"]
    cell = p["cell"] or d / 2
    fam = bush(3, d, p["sep_factor"])
    prof = rich_profile(fam, cell, threads=ctx.threads)
    slope = fit_richness_exponent(prof)
    rs = [int(r) for r in prof.r if r <= len(fam)] + [len(fam)]
    radii = bush_radius_check(fam, cell, rs, threads=ctx.threads)
    rad = Table(["r", "max_norm", "bound"], [[r, x, bush_radius_bound(r, cell)] for r, x in zip(rs, radii)])
    bad = sum(x > bush_radius_bound(r, cell) for r, x in zip(rs, radii))
    return ({"profile": _profile_table(prof, "bush", d), "guess": _profile_table(prof, "guess", d), "radius": rad},
            [within("fitted_exponent", slope, p["exponent_lo"], p["exponent_hi"]),
             at_most("radius_violations", bad, p["max_radius_violations"])])


@recipe("bush2d", "richness profile of a planar bush through the origin",
        "planar bush law lambda(P_r) ~ delta L / r^2",
        delta=2.0**-9, sep_factor=10.0, cell=0.0, exponent_lo=-2.2, exponent_hi=-1.8)
def _bush2d(p, ctx):
    d = p["delta"]
    fam = bush(2, d, p["sep_factor"])
    prof = rich_profile(fam, p["cell"] or d / 2, threads=ctx.threads)
    return ({"profile": _profile_table(prof, "bush_planar", d)},
            [within("fitted_exponent", fit_richness_exponent(prof), p["exponent_lo"], p["exponent_hi"])])


@recipe("cordoba2d", "planar bushes of L consecutive delta-separated directions",
        "Cordoba's planar bound lambda(P_r) <= C delta L log L / r^2",
        delta=2.0**-9, Ls=(32, 64, 128, 256, 512), inflate=3.0, max_spread=4.0)
def _cordoba(p, ctx):
    d = p["delta"]
    t = Table(["L", "max_ratio", "pair_sum", "pair_sum_over_dLlogL"])
    ratios = []
    for L in p["Ls"]:
        fam = bush(2, d, sep_factor=1.0, count=L)
        m, _ = verify_bound(rich_profile(fam, threads=ctx.threads), "cordoba")
        ps = pairwise_intersection_sum(fam, p["inflate"])
        ratios.append(m)
        t.rows.append([L, m, ps, ps / (d * L * math.log(L))])
    return {"cordoba": t}, [at_most("ratio_spread", spread(ratios), p["max_spread"])]


@recipe("counting-identity", "cell-level pair count against the analytic pairwise intersection sum",
        "double counting sum_k k^2 #_k delta^3 <= sum_{i<j} |T_i^(3 delta) & T_j^(3 delta)|",
        seeds=20, delta=2.0**-5, L=1024, inflate=3.0, max_violations=0)
def _counting(p, ctx):
    t = Table(["seed", "cell_pair_mass", "twice_pair_sum"])
    bad = 0
    for i in range(p["seeds"]):
        fam = random_family(3, p["delta"], p["L"], seed=ctx.seed * 1000 + i)
        lhs = cell_pair_mass(rich_profile(fam, threads=ctx.threads))
        rhs = 2 * pairwise_intersection_sum(fam, p["inflate"])
        bad += lhs > rhs
        t.rows.append([i, lhs, rhs])
    return {"identity": t}, [at_most("violations", bad, p["max_violations"])]


@recipe("random3d", "seed-averaged richness of random direction-separated families in R^3",
        "random placement: expected lambda(P_r) <~ delta^3 L^1.5 / r^2",
        seeds=20, delta=2.0**-6, L=4096, exponent_max=-1.8)
def _random3d(p, ctx):
    L = p["L"]
    profs = [rich_profile(random_family(3, p["delta"], L, seed=ctx.seed * 1000 + i), r_list=range(1, L + 1),
                          threads=ctx.threads) for i in range(p["seeds"])]
    avg = average_profiles(profs)
    slope = fit_richness_exponent(avg)
    t = _profile_table(avg, "weak", p["delta"])
    t.rows = [row for row in t.rows if row[1] > 0]
    return {"profile": t}, [at_most("fitted_exponent", slope, p["exponent_max"])]


@recipe("weak-stability", "empirical constant of the weak bound across delta",
        "weak incidence bound lambda(P_r) <= C delta^2 L^1.5 / r^2 for direction-separated tubes",
        delta_exps=(5, 6, 7), L=256, seeds=3, max_spread=4.0)
def _weak(p, ctx):
    t = Table(["delta", "seed", "max_ratio"])
    per_delta = []
    for j in p["delta_exps"]:
        d = 2.0**-j
        vals = []
        for i in range(p["seeds"]):
            fam = random_family(3, d, p["L"], seed=ctx.seed * 1000 + i)
            m, _ = verify_bound(rich_profile(fam, r_list=range(1, p["L"] + 1), threads=ctx.threads), "weak")
            vals.append(m)
            t.rows.append([d, i, m])
        per_delta.append(max(vals))
    return {"weak": t}, [at_most("constant_spread", spread(per_delta), p["max_spread"])]


@recipe("kakeya-union", "union volume of inflated random direction-separated tubes",
        "Kakeya-type lower bound lambda(union T_i^(3 delta)) >= C (-log delta)^-2",
        delta=2.0**-6, L=4096, inflate=3.0, floor_constant=0.25)
def _union(p, ctx):
    d = p["delta"]
    fam = random_family(3, d, p["L"], seed=ctx.seed)
    vol = union_volume(fam, inflate=p["inflate"], threads=ctx.threads)
    floor = p["floor_constant"] * (-math.log(d)) ** -2
    return {"union": Table(["delta", "L", "volume", "floor"], [[d, p["L"], vol, floor]])}, [at_least("volume", vol, floor)]


@recipe("tech-condition", "share of squared coincidence mass away from the identity rotation",
        "technical condition: at least half of the squared near-coincidence mass lies on ||S - I|| >= 0.1",
        delta=0.1, g_samples=4000, parallel_seeds=5, max_z=3.0)
def _tech(p, ctx):
    pts = []
    for j, r in enumerate(np.linspace(0.5, 1, 13)):
        n = int(2 * math.pi * r / 0.04)
        th = np.arange(n) * 2 * math.pi / n + 0.37 * j
        pts.append(np.stack([r * np.cos(th), r * np.sin(th)], 1))
    ann = DiscreteMeasure.uniform(PointCloud(np.concatenate(pts)))
    est = tech_ratio(ann, ann, p["delta"], p["g_samples"], ctx.seed, threads=ctx.threads)
    z = abs(est.value - haar_far_fraction()) / est.stderr
    t = Table(["case", "seed", "ratio", "stderr", "below_half"], [["annulus", ctx.seed, est.value, est.stderr, est.value < 0.5]])
    s = np.linspace(0, 1, 60)
    m1 = DiscreteMeasure.uniform(PointCloud(np.stack([s, np.zeros_like(s)], 1)))
    m2 = DiscreteMeasure.uniform(PointCloud(np.stack([s, np.full_like(s, 0.5)], 1)))
    for i in range(p["parallel_seeds"]):
        e = tech_ratio(m1, m2, p["delta"] / 5, p["g_samples"] // 2, ctx.seed * 1000 + i, threads=ctx.threads)
        t.rows.append(["parallel_segments", ctx.seed * 1000 + i, e.value, e.stderr, e.value < 0.5])
    return {"tech": t}, [at_most("annulus_z", z, p["max_z"])]


def list_recipes() -> list[tuple[str, str, list[str], str]]:
    return [(r.name, r.description, sorted(r.defaults), r.claim) for r in sorted(REGISTRY.values(), key=lambda r: r.name)]
