"""Closed-form exponents and thresholds for k-point configuration sets.

All calculators are plain arithmetic, so they accept ``fractions.Fraction``
as well as floats; exact inputs give exact branch decisions.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

Number = float | int | Fraction

BRANCHES = ("s", "(n-1)/2", "(n+2s-2)/4", "s-1")


class BoundsError(ValueError):
    pass


def _check(n: int, s: Number) -> None:
    if n < 2:
        raise BoundsError(f"n must be >= 2, got {n}")
    if not 0 < s <= n:
        raise BoundsError(f"s must lie in (0, n], got s={s}, n={n}")


def _branch(n: int, s: Number) -> int:
    # ties go to the lower-s branch; the values agree there anyway
    if 2 * s <= n - 1:
        return 0
    if 2 * s <= n:
        return 1
    if 2 * s <= n + 2:
        return 2
    return 3


def _branch_coeffs(n: int, b: int) -> tuple[Fraction, Fraction]:
    """gamma = a + c*s on branch b."""
    return [(Fraction(0), Fraction(1)),
            (Fraction(n - 1, 2), Fraction(0)),
            (Fraction(n - 2, 4), Fraction(1, 2)),
            (Fraction(-1), Fraction(1))][b]


def _branch_interval(n: int, b: int) -> tuple[Fraction, Fraction]:
    cuts = [Fraction(0), Fraction(n - 1, 2), Fraction(n, 2), Fraction(n + 2, 2), Fraction(n)]
    return cuts[b], cuts[b + 1]


def gamma_s(n: int, s: Number) -> Number:
    """Spherical-average decay exponent; the last branch is closed at s = n by continuity."""
    _check(n, s)
    b = _branch(n, s)
    if b == 0:
        return s
    if b == 1:
        return Fraction(n - 1, 2) if isinstance(s, (int, Fraction)) else (n - 1) / 2
    if b == 2:
        return (n + 2 * s - 2) / 4 if not isinstance(s, int) else Fraction(n + 2 * s - 2, 4)
    return s - 1


def gamma_branch(n: int, s: Number) -> str:
    _check(n, s)
    return BRANCHES[_branch(n, s)]


@dataclass(frozen=True)
class BoundReport:
    value: Number
    unclamped: Number
    lebesgue_positive: bool
    branch: str


def _check_k(n: int, k: int) -> None:
    if not 2 <= k <= n + 1:
        raise BoundsError(f"k must lie in {{2, ..., n+1}}, got k={k}, n={n}")


def config_dim_bound(n: int, k: int, s: Number) -> BoundReport:
    """Lower bound for the dimension of the k-point configuration set of an s-dimensional set."""
    _check_k(n, k)
    g = gamma_s(n, s)
    full = k * (k - 1) // 2
    raw = full - n * (k - 1) + s * (k - 1) + g
    return BoundReport(min(raw, full), raw, bool(raw >= full), gamma_branch(n, s))


def _excess(n: int, k: int, s: Number) -> Number:
    """gamma_s - (n - s)(k - 1); positive means the configuration measure is L^2."""
    return gamma_s(n, s) - (n - s) * (k - 1)


def abs_continuity_threshold(n: int, k: int) -> float:
    """Infimum of s with (n - s)(k - 1) < gamma_s, solved branch by branch.

    Returns n when no s in (0, n) qualifies.
    """
    _check_k(n, k)
    if n < 2:
        raise BoundsError("n must be >= 2")
    best = None
    for b in range(4):
        lo, hi = _branch_interval(n, b)
        if hi <= lo:
            continue
        a, c = _branch_coeffs(n, b)
        # (n - s)(k - 1) < a + c s  <=>  s > (n(k-1) - a) / (k - 1 + c)
        root = (n * (k - 1) - a) / (k - 1 + c)
        cand = max(root, lo)
        if cand < hi:
            best = cand if best is None else min(best, cand)
    if best is None or best >= n:
        return float(n)
    return float(best)


def abs_continuity_threshold_bisect(n: int, k: int, tol: float = 1e-12) -> float:
    """Bisection on the monotone excess gamma_s - (n - s)(k - 1); independent of the branch algebra."""
    _check_k(n, k)
    lo, hi = 1e-15, float(n)
    if _excess(n, k, hi) <= 0:
        return float(n)
    if _excess(n, k, lo) > 0:
        return 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _excess(n, k, mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def asymmetric_positive(n: int, s1: Number, s2: Number) -> bool:
    """Positivity criterion for the distance set between sets of dimensions s1 and s2."""
    return bool(max(gamma_s(n, s1) + s2, gamma_s(n, s2) + s1) > n)


def bounds_table(n: int, k: int, s_values: Iterable[Number]) -> list[dict]:
    rows = []
    for s in s_values:
        rep = config_dim_bound(n, k, s)
        rows.append({"n": n, "k": k, "s": s, "gamma": gamma_s(n, s), "bound": rep.value,
                     "lebesgue_positive": rep.lebesgue_positive})
    return rows
