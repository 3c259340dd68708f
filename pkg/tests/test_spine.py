import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from gwspine.offspring import BudgetExceeded, deterministic, finite, geometric, make_dyadic_power_log
from gwspine.oracle import enumerate_trees, marked_log_prob
from gwspine.pgf import HorizonError, build_norming_table
from gwspine.spine import (
    SpinePopulations, offspine_law, offspine_tail_bound, sample_marked_tree, sample_spine_children,
    sample_spine_offspring, sample_spine_populations, spine_law, spine_tail_bound, tilted_laws,
)

FAMILIES = ["geom", "dyadic"]


@pytest.fixture
def fam(request, geom, dyadic, geom_table, dyadic_table):
    return {"geom": (geom, geom_table), "dyadic": (dyadic, dyadic_table)}[request.param]


def mass_with_tail(law, table, k, mass, tail):
    acc = []
    for ell, _ in law.atoms():
        acc.append(mass(law, table, k, ell))
        if tail(law, table, k, ell) < 1e-14:
            return math.fsum(acc), tail(law, table, k, ell)
    raise AssertionError("tail bound never became small")


def test_fixed_values(binary, geom, geom_table):
    t2 = build_norming_table(binary, 0.5, 30)
    for k in range(30):
        assert spine_law(binary, t2, k, 2) == pytest.approx(1.0, abs=4e-16)
        assert offspine_law(binary, t2, k, 2) == pytest.approx(1.0, abs=4e-16)
    assert spine_law(geom, geom_table, 0, 1) == pytest.approx(4 / 9, rel=1e-14)
    assert offspine_law(geom, geom_table, 0, 1) == pytest.approx(2 / 3, rel=1e-14)
    assert spine_law(geom, geom_table, 0, 0) == 0.0


@pytest.mark.parametrize("fam", FAMILIES, indirect=True)
@pytest.mark.parametrize("k", [0, 1, 5, 10, 20])
def test_tilted_laws_normalize(fam, k):
    law, table = fam
    for mass, tail in ((spine_law, spine_tail_bound), (offspine_law, offspine_tail_bound)):
        total, bound = mass_with_tail(law, table, k, mass, tail)
        assert abs(total - 1.0) < 1e-8
        assert total <= 1.0 + 1e-12 and total + bound >= 1.0 - 1e-12


@pytest.mark.parametrize("fam", FAMILIES, indirect=True)
def test_generating_identities(fam):
    # E[u^nu] = phi_k^{-1}(s) and E[nu u^(nu-1)] = D_{k+1}/D_k at u = phi_{k+1}^{-1}(s),
    # summed from the plain law, independent of the tilt code
    law, table = fam
    for k in range(21):
        x = float(table.x[k + 1])
        a, b = [], []
        for ell, q in law.atoms():
            a.append(q * math.exp(-ell * x))
            b.append(q * ell * math.exp(-(ell - 1) * x))
            if law.tail_bound(ell) * math.exp(-ell * x) * ell < 1e-17 and ell > 1 / x:
                break
        assert math.fsum(a) == pytest.approx(math.exp(-table.x[k]), rel=1e-10)
        assert math.fsum(b) == pytest.approx(math.exp(table.step[k + 1]), rel=1e-10)


def test_large_k_limits(geom, geom_table, dyadic, dyadic_table):
    for ell in range(1, 9):
        assert abs(spine_law(geom, geom_table, 30, ell) - ell * geom.pmf(ell) / 2) < 1e-3
        assert offspine_law(geom, geom_table, 40, ell) == pytest.approx(geom.pmf(ell), abs=1e-6)
    # without XlogX the spine law approaches the size-biased law slowly; only the trend is tested
    errs = [max(abs(spine_law(dyadic, dyadic_table, k, 2 ** j) - 2 ** j * dyadic.pmf(2 ** j) / 2)
                for j in range(4)) for k in (5, 10, 20, 30, 40)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_horizon_guard(geom):
    t = build_norming_table(geom, 0.5, 3)
    spine_law(geom, t, 2, 1)
    with pytest.raises(HorizonError):
        spine_law(geom, t, 3, 1)
    with pytest.raises(HorizonError):
        sample_marked_tree(geom, t, 4, 100, np.random.default_rng(0))


def test_spine_children_frequency(geom, geom_table):
    draws = tilted_laws(geom, geom_table).spine(0).sample(np.random.default_rng(2), 10 ** 6)
    assert abs(np.mean(draws == 1) - 4 / 9) < 0.002
    assert sample_spine_children(deterministic(2), build_norming_table(deterministic(2), 0.5, 3), 1,
                                 np.random.default_rng(0)) == 2


def test_dyadic_spine_mean_exceeds_plain_mean(dyadic, dyadic_table):
    draws = tilted_laws(dyadic, dyadic_table).spine(20).sample(np.random.default_rng(3), 10 ** 5)
    exact_partial = math.fsum(ell * spine_law(dyadic, dyadic_table, 20, ell) for ell in [1] + [2 ** j for j in range(1, 11)])
    assert draws.mean() > dyadic.mean
    assert exact_partial > dyadic.mean


@pytest.mark.parametrize("k", [0, 3, 12])
def test_spine_sampler_matches_law(geom, geom_table, k):
    draws = sample_spine_offspring(geom, geom_table, k + 1, 10 ** 5, np.random.default_rng(k))[:, k]
    cells = np.arange(1, 12)
    p = np.array([spine_law(geom, geom_table, k, int(c)) for c in cells])
    obs = np.array([(draws == c).sum() for c in cells])
    obs = np.append(obs, len(draws) - obs.sum())
    exp = np.append(p, 1 - p.sum()) * len(draws)
    assert stats.chisquare(obs, exp).pvalue > 1e-3


def test_binary_spine_position_uniform(binary):
    t = build_norming_table(binary, 0.5, 3)
    rng = np.random.default_rng(4)
    pos = [int(sample_marked_tree(binary, t, 3, 100, rng).spine[3]) for _ in range(10 ** 5)]
    counts = np.bincount(pos, minlength=8)
    assert counts.sum() == 10 ** 5
    assert stats.chisquare(counts).pvalue > 1e-3


def test_marked_tree_law_matches_oracle(coin):
    t = build_norming_table(coin, 0.5, 2)
    exact = {}
    for tree in enumerate_trees(coin, 2):
        for i in range(tree.z[-1]):
            exact[tree.counts, i] = math.exp(marked_log_prob(coin, t, tree.counts, i))
    assert math.fsum(exact.values()) == pytest.approx(1.0, abs=1e-12)
    n = 200_000
    rng = np.random.default_rng(5)
    seen = Counter()
    for _ in range(n):
        mt = sample_marked_tree(coin, t, 2, 100, rng)
        seen[tuple(tuple(int(v) for v in g) for g in mt.tree.nu), int(mt.spine[2])] += 1
    assert set(seen) <= set(exact)
    tv = 0.5 * sum(abs(seen[key] / n - p) for key, p in exact.items())
    assert tv < 0.01
    keys = sorted(exact)
    assert stats.chisquare([seen[k] for k in keys], [exact[k] * n for k in keys]).pvalue > 1e-3


@settings(max_examples=15)
@given(seed=st.integers(0, 2 ** 32 - 1), depth=st.integers(1, 9))
def test_marked_tree_structure(seed, depth):
    law = geometric(0.5)
    t = build_norming_table(law, 0.5, depth)
    mt = sample_marked_tree(law, t, depth, 10 ** 6, np.random.default_rng(seed))
    nu = mt.nu_spine
    for n in range(depth):
        assert int(mt.spine[n + 1]) in mt.tree.children((n, int(mt.spine[n])))
        assert len(mt.siblings(n)) == nu[n] - 1
        assert 0 <= mt.spine_rank(n) < nu[n]
    assert not mt.tree.truncated.any()


def test_spine_rank_uniform_given_count(geom, geom_table):
    rng = np.random.default_rng(6)
    by_count = {2: [], 3: []}
    for _ in range(20000):
        mt = sample_marked_tree(geom, geom_table, 1, 1000, rng)
        c = int(mt.nu_spine[0])
        if c in by_count:
            by_count[c].append(mt.spine_rank(0))
    for c, ranks in by_count.items():
        assert stats.chisquare(np.bincount(ranks, minlength=c)).pvalue > 1e-3


def test_cap_truncates_off_spine_only(dyadic, dyadic_table):
    rng = np.random.default_rng(7)
    mt = sample_marked_tree(geometric(0.5), build_norming_table(geometric(0.5), 0.5, 12), 12, 300, rng)
    assert mt.tree.n_vertices <= 300 + 12 * int(mt.nu_spine.max())
    assert mt.tree.truncated.any()
    for n in range(12):
        assert mt.tree.expanded[n][mt.spine[n]]
    assert len(mt.nu_spine) == 12
    with pytest.raises(BudgetExceeded):
        sample_marked_tree(deterministic(3), build_norming_table(deterministic(3), 0.5, 10), 10, 2,
                           np.random.default_rng(0))


def test_populations_structure(dyadic, dyadic_table):
    pops = sample_spine_populations(dyadic, dyadic_table, 12, 50, np.random.default_rng(8))
    for p in pops:
        assert isinstance(p, SpinePopulations)
        assert np.all(p.clan[np.arange(12), np.arange(1, 13)] == p.nu_spine - 1)
        for n in range(12):
            assert p.spine_subtree_population(n, 1) == p.nu_spine[n]
            # Z_{g} splits into the spine vertex and the clans hanging off it
            assert p.population(n + 1) == 1 + sum(p.sibling_population(i, n - i) for i in range(n + 1))
        assert p.population(0) == 1 and not p.window_truncated(0, 12)
    with pytest.raises(IndexError):
        pops[0].spine_subtree_population(5, 8)


def test_populations_match_vertex_sampler(geom):
    t = build_norming_table(geom, 0.5, 8)
    agg = sample_spine_populations(geom, t, 8, 4000, np.random.default_rng(9))
    rng = np.random.default_rng(10)
    vert = [sample_marked_tree(geom, t, 8, 10 ** 7, rng) for _ in range(4000)]
    for g in (3, 8):
        a = [p.population(g) for p in agg]
        b = [m.population(g) for m in vert]
        assert stats.ks_2samp(a, b).pvalue > 1e-3
    a = [p.spine_subtree_population(2, 4) for p in agg]
    b = [m.spine_subtree_population(2, 4) for m in vert]
    assert stats.ks_2samp(a, b).pvalue > 1e-3
