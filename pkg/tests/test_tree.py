import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from gwspine.offspring import deterministic, finite, geometric, make_dyadic_power_log
from gwspine.pgf import build_norming_table
from gwspine.tree import (
    GWTree, TruncationError, derivative_bound, estimate_w, expand_generation, martingale_trace,
    martingale_values, simulate_gw, simulate_populations, subtree_population,
)


def tree_from(levels):
    nu = [np.array(v, dtype=np.int64) for v in levels]
    return GWTree(nu, [np.ones(len(v), dtype=bool) for v in nu])


def test_binary_tree(binary):
    tree = simulate_gw(binary, 4, 10 ** 6, np.random.default_rng(0))
    assert tree.z.tolist() == [1, 2, 4, 8, 16]
    for n in range(2):
        for i in range(tree.z[n]):
            assert subtree_population(tree, (n, i), 3) == 8
    assert subtree_population(tree, (0, 0), 4) == tree.z[4]
    assert tree.parent(2).tolist() == [0, 0, 1, 1]


def test_binary_estimate_w(binary):
    t = build_norming_table(binary, 0.5, 6)
    tree = simulate_gw(binary, 6, 10 ** 6, np.random.default_rng(0))
    for k in range(7):
        assert estimate_w(tree, (0, 0), t, k) == pytest.approx(math.log(2), rel=1e-15)
    assert estimate_w(tree, (2, 3), t, 4) == pytest.approx(math.log(2), rel=1e-15)


def test_binary_martingales(binary):
    t = build_norming_table(binary, 0.5, 30)
    z = 2 ** np.arange(31)
    M, dM, w = martingale_values(z, t)
    assert np.allclose(M, 0.5, rtol=1e-14)
    assert np.allclose(dM, 1.0, rtol=1e-13)
    assert np.allclose(-np.log(M), w, rtol=1e-14)


def test_coin_one_step_is_fair(coin):
    z1 = simulate_populations(coin, 1, 20000, np.random.default_rng(1))[:, 1]
    assert set(np.unique(z1).tolist()) == {1, 2}
    assert stats.chisquare(np.bincount(z1)[1:]).pvalue > 1e-3


def test_geometric_mean_population(geom):
    z = simulate_populations(geom, 10, 10 ** 4, np.random.default_rng(2))[:, 10]
    se = z.std(ddof=1) / math.sqrt(len(z))
    assert abs(z.mean() - 1024) < 5 * se


def test_populations_agree_with_vertex_trees(geom):
    rng = np.random.default_rng(3)
    a = simulate_populations(geom, 6, 5000, rng)[:, 6]
    b = [simulate_gw(geom, 6, 10 ** 7, rng).z[6] for _ in range(5000)]
    assert stats.ks_2samp(a, b).pvalue > 1e-3


@settings(max_examples=25)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(0, 4), k=st.integers(0, 4))
def test_partition_additivity(seed, n, k):
    law = make_dyadic_power_log(2.0) if seed % 2 else geometric(0.5)
    tree = simulate_gw(law, n + k, 10 ** 7, np.random.default_rng(seed))
    parts = [subtree_population(tree, (n, i), k) for i in range(tree.z[n])]
    assert sum(parts) == tree.z[n + k]
    for g in range(tree.depth):
        assert tree.z[g + 1] == tree.nu[g].sum()


def test_known_small_tree():
    tree = tree_from([[2], [2, 1], [1, 2, 1]])
    assert tree.z.tolist() == [1, 2, 3, 4]
    assert subtree_population(tree, (1, 0), 2) == 3
    assert subtree_population(tree, (1, 1), 2) == 1
    assert list(tree.children((1, 0))) == [0, 1]
    assert tree.descendant_range((1, 1), 1) == (2, 3)
    with pytest.raises(IndexError):
        tree.descendant_range((1, 0), 3)


def test_cap_truncation_flags(geom):
    tree = simulate_gw(geom, 15, 500, np.random.default_rng(4))
    assert tree.n_vertices <= 500
    assert tree.truncated.any()
    g = int(np.argmax(tree.truncated))
    cut = int(np.argmin(tree.expanded[g]))
    with pytest.raises(TruncationError):
        subtree_population(tree, (g, cut), 1)
    with pytest.raises(TruncationError):
        tree.children((g, cut))


@given(st.lists(st.integers(1, 9), min_size=1, max_size=30), st.integers(0, 200))
def test_expand_generation_prefix(nu, budget):
    e = expand_generation(np.array(nu), budget)
    assert np.array(nu)[e].sum() <= budget
    # expanded vertices form a prefix
    assert not np.any(e[1:] & ~e[:-1])
    keep = len(nu) // 2
    e2 = expand_generation(np.array(nu), budget, keep=keep)
    assert e2[keep]
    others = np.delete(e2, keep)
    assert not np.any(others[1:] & ~others[:-1])


@pytest.mark.parametrize("law", [geometric(0.5), make_dyadic_power_log(2.0), finite(0.3, 0.3, 0.4)],
                         ids=lambda l: l.spec)
def test_martingale_mean_and_bound(law):
    t = build_norming_table(law, 0.5, 10)
    z = simulate_populations(law, 10, 10 ** 5, np.random.default_rng(5))
    M, dM, _ = martingale_values(z, t)
    for n in range(11):
        se = M[:, n].std(ddof=1) / math.sqrt(len(M))
        assert abs(M[:, n].mean() - 0.5) < 4 * se + 1e-15
        assert dM[:, n].max() <= derivative_bound(t, n) * (1 + 1e-12)


def test_trace_matches_values(geom):
    t = build_norming_table(geom, 0.5, 8)
    tree = simulate_gw(geom, 8, 10 ** 6, np.random.default_rng(6))
    tr = martingale_trace(tree, t)
    M, dM, w = martingale_values(tree.z, t)
    assert np.array_equal(tr.M, M) and np.array_equal(tr.dM, dM)
    assert np.allclose(tr.w_hat, -np.log(tr.M))
    assert estimate_w(tree, (0, 0), t, 8) == pytest.approx(w[8])


def test_w_hat_settles_over_k10_to_30(geom):
    # every successive relative increment of Z_k/c_k for k = 10..30 below 0.05, on >= 95% of replicas
    t = build_norming_table(geom, 0.5, 30)
    z = simulate_populations(geom, 30, 1000, np.random.default_rng(3))
    w = martingale_values(z, t)[2][:, 10:]
    inc = np.abs(w[:, 1:] / w[:, :-1] - 1)
    settled = np.mean(inc.max(axis=1) < 0.05)
    assert settled >= 0.95, f"only {settled:.3f} of replicas settled"
