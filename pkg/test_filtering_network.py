#!/usr/bin/env python3
"""
Tests for TMFG construction and the LoGo sparse precision.

TMFG 與 LoGo 稀疏精度矩陣的測試。
"""

import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
from src.filtering_network import (build_tmfg, correlation_similarity, log_det, logo_precision,
                                   sparse_precision)
from src.errors import DataError, NotPositiveDefiniteError, SingularCliqueError
from testing_utils import module_tests, run_standalone


def random_covariance(n, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, 2 * n))
    return a @ a.T / (2 * n)


def precision_on_graph(graph, seed=1):
    """Diagonally dominant SPD matrix supported on the graph edges."""
    rng = np.random.default_rng(seed)
    j = np.zeros((graph.n, graph.n))
    for a, b in graph.edges:
        j[a, b] = j[b, a] = rng.uniform(-0.3, 0.3)
    np.fill_diagonal(j, 1.0 + np.abs(j).sum(axis=1))
    return j


@pytest.mark.parametrize("n", [4, 6, 10, 25])
def test_tmfg_is_planar_maximal(n):
    graph = build_tmfg(correlation_similarity(random_covariance(n)))
    assert len(graph.edges) == 3 * n - 6
    assert len(graph.cliques) == n - 3
    assert len(graph.separators) == n - 4
    assert all(i < j for i, j in graph.edges)
    # every separator is a triangle of the graph shared by two cliques
    adjacency = graph.adjacency()
    for a, b, c in graph.separators:
        assert adjacency[a, b] and adjacency[a, c] and adjacency[b, c]
        assert sum(set((a, b, c)) <= set(clique) for clique in graph.cliques) >= 2
    assert adjacency.sum(axis=1).min() >= 3


def test_tmfg_small_and_invalid_inputs():
    triangle = build_tmfg(np.ones((3, 3)))
    assert len(triangle.edges) == 3
    four = build_tmfg(np.ones((4, 4)))
    assert len(four.edges) == 6 and four.cliques == [(0, 1, 2, 3)] and four.separators == []

    with pytest.raises(DataError):
        build_tmfg(np.ones((2, 2)))
    with pytest.raises(DataError):
        build_tmfg(np.array([[1.0, 0.2, 0.1], [0.3, 1.0, 0.1], [0.1, 0.1, 1.0]]))
    bad = np.ones((4, 4))
    bad[0, 1] = bad[1, 0] = np.nan
    with pytest.raises(DataError):
        build_tmfg(bad)


def test_tmfg_is_deterministic():
    s = correlation_similarity(random_covariance(12, seed=5))
    first, second = build_tmfg(s), build_tmfg(s)
    assert first.edges == second.edges
    assert first.cliques == second.cliques


def test_logo_equals_dense_inverse_for_four_variables():
    cov = random_covariance(4, seed=3)
    precision = sparse_precision(cov)
    np.testing.assert_allclose(precision.matrix, np.linalg.inv(cov), atol=1e-8)
    print("✅ Single clique gives the dense inverse")


@pytest.mark.parametrize("n", [6, 8, 15])
def test_logo_recovers_precision_supported_on_graph(n):
    graph = build_tmfg(correlation_similarity(random_covariance(n, seed=n)))
    truth = precision_on_graph(graph, seed=n)
    covariance = np.linalg.inv(truth)
    estimate = logo_precision(covariance, graph, ridge_fallback=False)
    np.testing.assert_allclose(estimate.matrix, truth, atol=1e-8)

    off_support = ~graph.adjacency()
    np.fill_diagonal(off_support, False)
    assert np.all(estimate.matrix[off_support] == 0.0)


def test_singular_clique_ridge_fallback():
    cov = random_covariance(4, seed=2)
    cov[1, :] = cov[0, :]
    cov[:, 1] = cov[:, 0]
    graph = build_tmfg(np.ones((4, 4)))
    with pytest.raises(SingularCliqueError) as info:
        logo_precision(cov, graph, ridge_fallback=False)
    assert info.value.clique == (0, 1, 2, 3)
    with pytest.warns(UserWarning, match="ridge"):
        precision = logo_precision(cov, graph)
    assert np.all(np.isfinite(precision.matrix))


def test_dense_fallback_below_three_variables():
    cov = np.array([[2.0, 0.5], [0.5, 1.0]])
    np.testing.assert_allclose(sparse_precision(cov).matrix, np.linalg.inv(cov), atol=1e-12)


def test_log_det():
    assert log_det(2.0 * np.eye(5)) == pytest.approx(5 * np.log(2.0))
    precision = sparse_precision(random_covariance(6, seed=4))
    assert log_det(precision) == pytest.approx(np.linalg.slogdet(precision.matrix)[1])
    with pytest.raises(NotPositiveDefiniteError):
        log_det(np.diag([1.0, -1.0, 1.0]))


def main():
    tests = [(name, func) for name, func in module_tests(globals())
             if not hasattr(func, "pytestmark")]
    tests += [(f"tmfg is planar maximal n={n}", lambda n=n: test_tmfg_is_planar_maximal(n)) for n in (4, 6, 10, 25)]
    tests += [(f"logo recovers precision n={n}", lambda n=n: test_logo_recovers_precision_supported_on_graph(n))
              for n in (6, 8, 15)]
    return run_standalone("Testing Filtering Network", tests)


if __name__ == "__main__":
    sys.exit(main())
