import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from falconerlab.energy import (
    EnergyError,
    config_cells,
    energy_rhs,
    group_energy,
    haar_energy,
    nu_l2_mass,
    push_measure,
)
from falconerlab.geometry import PointCloud, RigidMotion, haar_orthogonal
from falconerlab.measures import DiscreteMeasure
from falconerlab.rng import stream

TWO = DiscreteMeasure.uniform(PointCloud.from_list([[0.0, 0.0], [1.0, 0.0]]))
L3 = DiscreteMeasure.uniform(PointCloud.from_list([[0, 0], [1, 0], [0, 1]]))


def brute_energy(m, a, k, delta):
    """Direct sum over all 2k-tuples (x_1..x_k, y_1..y_k)."""
    pts, w = m.points, m.weights
    n = len(pts)
    total = 0.0
    for xs in itertools.product(range(n), repeat=k):
        for ys in itertools.product(range(n), repeat=k):
            z = [pts[xs[i]] - a @ pts[ys[i]] for i in range(k)]
            if all(np.linalg.norm(z[i] - z[j]) <= delta for i in range(k) for j in range(i + 1, k)):
                total += np.prod(w[list(xs)]) * np.prod(w[list(ys)])
    return total


def brute_cells(pts, k, delta):
    cells = set()
    for tup in itertools.product(range(len(pts)), repeat=k):
        vec = [math.dist(pts[tup[i]], pts[tup[j]]) for i in range(k) for j in range(i + 1, k)]
        cells.add(tuple(math.floor(v / delta + 1e-9) for v in vec))
    return len(cells)


class TestConfigCells:
    def test_single_point(self):
        pm = DiscreteMeasure.point_mass([0.3, 0.4])
        assert config_cells(pm, 2, 0.1) == 1
        assert config_cells(pm, 3, 0.01) == 1

    def test_l_shape_k2(self):
        assert config_cells(L3, 2, 0.1) == 3

    def test_l_shape_k3(self):
        pts = L3.points.tolist()
        assert config_cells(L3, 3, 0.01) == brute_cells(pts, 3, 0.01)

    def test_k_range(self):
        with pytest.raises(EnergyError):
            config_cells(L3, 4, 0.1)

    def test_cap(self):
        m = DiscreteMeasure.uniform(PointCloud(stream(0, "cap").random((40, 2))))
        with pytest.raises(EnergyError):
            config_cells(m, 3, 0.1, cap=1000)
        assert 0 < config_cells(m, 3, 0.1, cap=1000, samples=5000) <= brute_cells(m.points.tolist(), 3, 0.1)

    def test_distinct(self):
        assert config_cells(L3, 2, 0.1, distinct=True) == 2

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_rigid_invariance(self, seed):
        rng = stream(seed, "cfg")
        pts = rng.random((6, 2))
        g = RigidMotion(haar_orthogonal(rng, 2, 1)[0], rng.normal(size=2))
        a = config_cells(DiscreteMeasure.uniform(PointCloud(pts)), 3, 0.05)
        b = config_cells(DiscreteMeasure.uniform(PointCloud(g(pts))), 3, 0.05)
        # distances move by ~1e-16, which can only matter on a cell boundary
        assert a == b


class TestPushMeasure:
    def test_point_mass(self):
        pm = push_measure(DiscreteMeasure.point_mass([0.3, 0.7]), np.eye(2))
        np.testing.assert_allclose(pm.atoms, [[0, 0]], atol=1e-15)
        assert pm.weights.tolist() == [1.0]

    def test_identity_two_points(self):
        a, b = np.array([0.2, 0.1]), np.array([0.9, 0.4])
        pm = push_measure(DiscreteMeasure.uniform(PointCloud(np.stack([a, b]))), np.eye(2))
        got = {tuple(np.round(z, 12)): w for z, w in zip(pm.atoms, pm.weights)}
        assert got == {(0.0, 0.0): 0.5, tuple(np.round(a - b, 12)): 0.25, tuple(np.round(b - a, 12)): 0.25}

    def test_half_turn(self):
        pm = push_measure(TWO, RigidMotion.rotation(math.pi))
        got = {tuple(np.round(z, 12) + 0.0): w for z, w in zip(pm.atoms, pm.weights)}
        assert got == {(0.0, 0.0): 0.25, (1.0, 0.0): 0.5, (2.0, 0.0): 0.25}

    def test_rejects_translation(self):
        with pytest.raises(EnergyError):
            push_measure(TWO, RigidMotion(np.eye(2), [1.0, 0.0]))


class TestGroupEnergy:
    def test_point_mass(self):
        pm = DiscreteMeasure.point_mass([0.5, 0.5])
        for k in (2, 3):
            assert group_energy(pm, RigidMotion.rotation(1.0), k, 0.01).value == 1.0

    def test_two_points_identity(self):
        res = group_energy(TWO, np.eye(2), 2, 0.1)
        assert res.exact and res.value == 3 / 8
        assert brute_energy(TWO, np.eye(2), 2, 0.1) == 3 / 8

    def test_large_delta(self):
        assert group_energy(L3, RigidMotion.rotation(0.3), 3, 10.0).value == pytest.approx(1.0)

    @pytest.mark.parametrize("k", [2, 3])
    def test_against_brute_force(self, k):
        rng = stream(11, "brute")
        for _ in range(4):
            m = DiscreteMeasure(PointCloud(rng.random((3, 2))), np.array([0.2, 0.3, 0.5]))
            a = haar_orthogonal(rng, 2, 1)[0]
            for delta in (0.1, 0.4):
                assert group_energy(m, a, k, delta).value == pytest.approx(brute_energy(m, a, k, delta), abs=1e-12)

    def test_three_dimensional_k4(self):
        rng = stream(12, "k4")
        m = DiscreteMeasure.uniform(PointCloud(rng.random((3, 3))))
        a = haar_orthogonal(rng, 3, 1)[0]
        assert group_energy(m, a, 4, 0.6).value == pytest.approx(brute_energy(m, a, 4, 0.6), abs=1e-12)

    def test_sampled_mode(self):
        m = DiscreteMeasure.uniform(PointCloud(stream(2, "samp").random((20, 2))))
        a = haar_orthogonal(stream(3, "g"), 2, 1)[0]
        exact = group_energy(m, a, 3, 0.3, cap=2**27).value
        est = group_energy(m, a, 3, 0.3, cap=1000, samples=50_000, seed=1)
        assert not est.exact
        assert abs(est.value - exact) <= 4 * est.stderr
        with pytest.raises(EnergyError):
            group_energy(m, a, 3, 0.3, cap=1000)

    def test_tree_path_matches_dense(self):
        m = DiscreteMeasure.uniform(PointCloud(stream(4, "tree").random((70, 2))))
        a = haar_orthogonal(stream(5, "g"), 2, 1)[0]
        tree = group_energy(m, a, 2, 0.05).value
        from falconerlab.energy import raw_atoms
        z, w = raw_atoms(m, a)
        d = np.linalg.norm(z[:, None] - z[None], axis=-1)
        assert tree == pytest.approx(float(w @ (d <= 0.05) @ w), abs=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]))
    def test_rotation_invariance(self, seed, k):
        rng = stream(seed, "rot")
        pts = rng.random((5, 2))
        g, h = haar_orthogonal(rng, 2, 2)
        a = group_energy(DiscreteMeasure.uniform(PointCloud(pts)), g, k, 0.2).value
        b = group_energy(DiscreteMeasure.uniform(PointCloud(pts @ h.T)), h @ g @ h.T, k, 0.2).value
        assert a == pytest.approx(b, abs=1e-10)


class TestRhs:
    def test_point_mass(self):
        assert energy_rhs(DiscreteMeasure.point_mass([0.1, 0.1]), np.eye(2), 3, 0.01) == pytest.approx(1.0)

    def test_two_points(self):
        assert energy_rhs(TWO, np.eye(2), 2, 0.1) == pytest.approx(3 / 8)

    def test_large_radius(self):
        assert energy_rhs(L3, RigidMotion.rotation(2.0), 3, 2.0) == pytest.approx(1.0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3]), st.sampled_from([0.05, 0.1, 0.3]))
    def test_majorant_and_monotonicity(self, seed, k, delta):
        rng = stream(seed, "majorant")
        n = int(rng.integers(1, 9))
        w = rng.random(n) + 0.1
        m = DiscreteMeasure(PointCloud(rng.random((n, 2))), w / w.sum())
        a = haar_orthogonal(rng, 2, 1)[0]
        e1, e2 = group_energy(m, a, k, delta).value, group_energy(m, a, k, 2 * delta).value
        r1, r2 = energy_rhs(m, a, k, delta), energy_rhs(m, a, k, 2 * delta)
        assert e1 <= r1 + 1e-12
        assert e1 <= e2 + 1e-12 and r1 <= r2 + 1e-12


class TestHaar:
    def test_point_mass(self):
        est = haar_energy(DiscreteMeasure.point_mass([0.2, 0.3]), 2, 0.1, 10)
        assert est.value == 1.0 and est.stderr == 0.0

    def test_two_points_quadrature(self):
        nodes = (np.arange(10_000) + 0.5) * 2 * math.pi / 10_000
        per_g = []
        for th in nodes:
            rot = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
            per_g.append(group_energy(TWO, rot, 2, 0.1).value)
            per_g.append(group_energy(TWO, rot @ np.diag([1.0, -1.0]), 2, 0.1).value)
        oracle = float(np.mean(per_g))
        est = haar_energy(TWO, 2, 0.1, 2000, seed=3)
        assert abs(est.value - oracle) <= 3 * est.stderr

    def test_monotone_in_delta(self):
        m = DiscreteMeasure.uniform(PointCloud(stream(8, "mono").random((6, 2))))
        a = haar_energy(m, 2, 0.1, 50, seed=4).value
        b = haar_energy(m, 2, 0.2, 50, seed=4).value
        assert a <= b


class TestNuMass:
    def test_point_mass(self):
        for k in (2, 3):
            assert nu_l2_mass(DiscreteMeasure.point_mass([0, 0]), k, 0.1).value == pytest.approx(0.1 ** -(k * (k - 1) // 2))

    def test_two_points(self):
        assert nu_l2_mass(TWO, 2, 0.1).value == pytest.approx(5.0)

    def test_spreading_lowers_mass(self):
        three = DiscreteMeasure.uniform(PointCloud.from_list([[0, 0], [1, 0], [0.2, 1.8]]))
        # distances {0: 1/3; 1, 1.81.., 1.97..: 2/9 each}: collision prob 1/9 + 3 * 4/81 = 21/81
        assert nu_l2_mass(three, 2, 0.1).value == pytest.approx(21 / 81 * 10)
        assert nu_l2_mass(three, 2, 0.1).value < nu_l2_mass(TWO, 2, 0.1).value

    def test_sampled_matches_exact(self):
        m = DiscreteMeasure.uniform(PointCloud(stream(6, "nu").random((12, 2))))
        exact = nu_l2_mass(m, 3, 0.1).value
        est = nu_l2_mass(m, 3, 0.1, samples=200_000, seed=2, cap=100)
        assert abs(est.value - exact) <= 4 * est.stderr
