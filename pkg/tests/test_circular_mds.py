"""Angle embedding: stress objective, gradient, optimizer, sector allocation."""
import math

import numpy as np
import pytest

from dpsir_miner.circular_mds import (TWO_PI, allocate_sectors, circular_mean,
                                      circular_stress, circular_stress_gradient,
                                      optimize_angles, pairwise_model_distances)


def stress_oracle(thetas, D):
    """Literal double loop with the wrapped angular difference."""
    n = len(thetas)
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            delta = abs(thetas[i] - thetas[j])
            delta = min(delta, TWO_PI - delta)
            total += (1.0 - math.cos(delta) - D[i, j]) ** 2
    return total


def random_instance(rng, n):
    thetas = rng.uniform(0, TWO_PI, size=n)
    D = rng.uniform(0, 2, size=(n, n))
    D = (D + D.T) / 2
    np.fill_diagonal(D, 0.0)
    return thetas, D


def test_model_distance_range_and_symmetry():
    rng = np.random.default_rng(0)
    thetas, _ = random_instance(rng, 12)
    d = pairwise_model_distances(thetas)
    assert np.allclose(d, d.T)
    assert np.all(d >= -1e-12) and np.all(d <= 2 + 1e-12)
    assert np.allclose(np.diag(d), 0.0)


def test_stress_matches_oracle():
    rng = np.random.default_rng(1)
    for _ in range(20):
        thetas, D = random_instance(rng, 9)
        assert circular_stress(thetas, D) == pytest.approx(stress_oracle(thetas, D),
                                                           rel=1e-12, abs=1e-12)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    h = 1e-6
    for _ in range(10):
        thetas, D = random_instance(rng, 8)
        grad = circular_stress_gradient(thetas, D)
        for i in range(len(thetas)):
            tp, tm = thetas.copy(), thetas.copy()
            tp[i] += h
            tm[i] -= h
            fd = (circular_stress(tp, D) - circular_stress(tm, D)) / (2 * h)
            assert grad[i] == pytest.approx(fd, rel=1e-5, abs=1e-6)


def test_optimize_trivial_sizes():
    assert optimize_angles(np.zeros((0, 0))).thetas.shape == (0,)
    sol = optimize_angles(np.zeros((1, 1)))
    assert sol.thetas.shape == (1,)
    assert sol.objective == 0.0


def test_optimize_deterministic():
    rng = np.random.default_rng(3)
    _, D = random_instance(rng, 10)
    a = optimize_angles(D, restarts=3, seed=0)
    b = optimize_angles(D, restarts=3, seed=0)
    assert np.array_equal(a.thetas, b.thetas)
    assert a.objective == b.objective


def test_gauge_is_fixed():
    rng = np.random.default_rng(4)
    _, D = random_instance(rng, 6)
    sol = optimize_angles(D, restarts=2, seed=1)
    assert sol.thetas[0] == pytest.approx(0.0, abs=1e-9)
    assert 0.0 <= sol.thetas[1] <= math.pi + 1e-9


def test_planted_angles_recovered():
    rng = np.random.default_rng(5)
    planted = rng.uniform(0, TWO_PI, size=12)
    D = pairwise_model_distances(planted)
    sol = optimize_angles(D, restarts=10, seed=0)
    assert sol.objective <= 1e-8
    assert np.allclose(pairwise_model_distances(sol.thetas), D, atol=1e-4)


def test_circular_mean_wraps():
    # mean of angles straddling 0 stays near 0, not near pi
    m = circular_mean([0.1, TWO_PI - 0.1])
    assert min(m, TWO_PI - m) < 1e-9
    assert circular_mean([1.0]) == pytest.approx(1.0)


def test_sector_allocation_spans_and_padding():
    clusters = {0: ["a", "b", "c"], 1: ["d"], 2: ["e", "f"]}
    thetas = {"a": 0.1, "b": 0.2, "c": 0.3, "d": 2.0, "e": 4.0, "f": 4.2}
    padding = math.radians(2)
    alloc = allocate_sectors(clusters, thetas, padding=padding)
    spans = {cid: end - start for cid, (start, end) in alloc.sectors.items()}
    assert sum(spans.values()) == pytest.approx(TWO_PI - 3 * padding, abs=1e-9)
    # proportional to cluster sizes
    usable = TWO_PI - 3 * padding
    assert spans[0] == pytest.approx(usable * 3 / 6, abs=1e-9)
    assert spans[1] == pytest.approx(usable * 1 / 6, abs=1e-9)
    assert spans[2] == pytest.approx(usable * 2 / 6, abs=1e-9)


def test_sector_allocation_single_cluster_full_circle():
    alloc = allocate_sectors({5: ["a", "b"]}, {"a": 1.0, "b": 2.0})
    (start, end), = alloc.sectors.values()
    assert end - start == pytest.approx(TWO_PI, abs=1e-9)


def test_sector_order_follows_circular_means():
    clusters = {0: ["a"], 1: ["b"], 2: ["c"]}
    thetas = {"a": 5.0, "b": 1.0, "c": 3.0}
    alloc = allocate_sectors(clusters, thetas)
    order = list(alloc.order)
    # rotation of the mean-sorted sequence b(1.0) -> c(3.0) -> a(5.0)
    idx = order.index(1)
    assert [order[(idx + i) % 3] for i in range(3)] == [1, 2, 0]
