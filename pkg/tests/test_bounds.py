from fractions import Fraction as F

import numpy as np
import pytest

from falconerlab.bounds import (
    BoundsError,
    abs_continuity_threshold,
    abs_continuity_threshold_bisect,
    asymmetric_positive,
    bounds_table,
    config_dim_bound,
    gamma_branch,
    gamma_s,
)


def test_gamma_table_values():
    assert gamma_s(2, 0.4) == 0.4
    assert gamma_s(2, 1) == 0.5
    assert gamma_s(3, 2.6) == pytest.approx(1.6, abs=1e-15)
    assert gamma_branch(3, 2.6) == "s-1"


def test_gamma_domain():
    for s in (0, -1, 2.0001):
        with pytest.raises(BoundsError):
            gamma_s(2, s)
    with pytest.raises(BoundsError):
        gamma_s(1, 0.5)


@pytest.mark.parametrize("n", range(2, 7))
def test_gamma_continuity(n):
    for cut in ((n - 1) / 2, n / 2, (n + 2) / 2):
        if cut > n:
            continue
        left = gamma_s(n, cut - 1e-13)
        right = gamma_s(n, min(cut + 1e-13, n))
        assert abs(left - right) < 1e-12
    # exact values at the cuts, from either neighbouring branch formula
    assert gamma_s(n, F(n - 1, 2)) == F(n - 1, 2)
    assert gamma_s(n, F(n, 2)) == F(n - 1, 2) == (n + 2 * F(n, 2) - 2) / 4
    assert gamma_s(n, F(n + 2, 2)) == F(n, 2) == F(n + 2, 2) - 1


@pytest.mark.parametrize("n", range(2, 7))
def test_gamma_monotone(n):
    s = np.linspace(1e-6, n, 2000)
    g = [gamma_s(n, x) for x in s]
    assert np.all(np.diff(g) >= -1e-15)


def test_gamma_endpoint_by_continuity():
    assert gamma_s(2, 2) == 1
    assert gamma_s(4, 4) == 3


def test_corollary_examples():
    assert config_dim_bound(2, 3, 0.4).value == pytest.approx(0.2, abs=1e-12)
    assert config_dim_bound(2, 3, 1.2).value == pytest.approx(2.0, abs=1e-12)
    rep = config_dim_bound(2, 2, 2)
    assert rep.value == 1 and rep.unclamped == 2 and rep.lebesgue_positive


def test_wolff_shape():
    assert config_dim_bound(2, 2, 1).unclamped == pytest.approx(0.5)
    vals = [config_dim_bound(2, 2, s).unclamped for s in np.linspace(0.01, 2, 300)]
    assert np.all(np.diff(vals) >= -1e-15)


def test_k_range():
    with pytest.raises(BoundsError):
        config_dim_bound(2, 4, 1.0)
    with pytest.raises(BoundsError):
        config_dim_bound(2, 1, 1.0)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_threshold_k2(n):
    assert abs_continuity_threshold(n, 2) == pytest.approx(n / 2 + 1 / 3, abs=1e-9)
    assert abs_continuity_threshold_bisect(n, 2) == pytest.approx(n / 2 + 1 / 3, abs=1e-9)


def test_threshold_n2_k3():
    assert abs_continuity_threshold(2, 3) == pytest.approx(8 / 5, abs=1e-12)
    assert abs_continuity_threshold_bisect(2, 3) == pytest.approx(8 / 5, abs=1e-10)


@pytest.mark.parametrize("n", range(2, 7))
def test_threshold_matches_bisection_everywhere(n):
    for k in range(2, n + 2):
        assert abs_continuity_threshold(n, k) == pytest.approx(abs_continuity_threshold_bisect(n, k), abs=1e-9)


def test_asymmetric_examples():
    assert asymmetric_positive(2, 1, 1.6)
    assert not asymmetric_positive(2, F(4, 3), F(4, 3))
    assert asymmetric_positive(2, 1.2, 1.5)
    assert 1.5 + 0.5 * 1.2 > 0.75 * 2 + 0.5


@pytest.mark.parametrize("n", [2, 3])
def test_asymmetric_closed_form(n):
    grid = [F(n, 2) + F(i, 49) for i in range(50)]
    for s1 in grid:
        for s2 in grid:
            if s2 >= s1:
                assert asymmetric_positive(n, s1, s2) == (s2 + s1 / 2 > F(3 * n, 4) + F(1, 2))


def test_table_rows():
    rows = bounds_table(2, 3, [0.4, 0.8, 1.5])
    assert [round(r["bound"], 12) for r in rows] == [0.2, 1.1, 2.75]
    assert set(rows[0]) == {"n", "k", "s", "gamma", "bound", "lebesgue_positive"}
