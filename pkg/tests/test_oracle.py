import math

import numpy as np
import pytest

from gwspine.offspring import deterministic, finite, geometric
from gwspine.oracle import (
    EnumerationBudgetError, ancestors, enumerate_trees, marked_log_prob, run_all, subtree_counts,
    verify_change_of_measure, verify_marked_total, verify_martingales, verify_offspine_density, verify_offspine_subtree_law,
    verify_uniform_conditional,
)
from gwspine.pgf import NormingTable, build_norming_table


def test_enumeration_counts(coin, binary):
    assert len(enumerate_trees(binary, 3)) == 1 and enumerate_trees(binary, 3)[0].prob == 1.0
    one = enumerate_trees(coin, 1)
    assert sorted(t.counts for t in one) == [((1,),), ((2,),)] and all(t.prob == 0.5 for t in one)
    assert len(enumerate_trees(coin, 2)) == 6
    assert len(enumerate_trees(coin, 3)) == 42
    for d in range(4):
        assert math.fsum(t.prob for t in enumerate_trees(coin, d)) == pytest.approx(1.0, abs=1e-12)


def test_enumeration_rejects_infinite_and_huge():
    with pytest.raises(ValueError):
        enumerate_trees(geometric(0.5), 2)
    with pytest.raises(EnumerationBudgetError):
        enumerate_trees(finite(0.2, 0.5, 0.3), 3, budget=1000)


def test_tree_helpers():
    counts = ((2,), (2, 1), (1, 2, 1))
    assert ancestors(counts, 3, 2) == [0, 0, 1, 2]
    assert ancestors(counts, 3, 3) == [0, 1, 2, 3]
    assert subtree_counts(counts, 1, 0, 2) == ((2,), (1, 2))
    assert subtree_counts(counts, 1, 1, 2) == ((1,), (1,))


def test_binary_exact(binary):
    t = build_norming_table(binary, 0.5, 3)
    tree = enumerate_trees(binary, 2)[0]
    for i in range(4):
        assert math.exp(marked_log_prob(binary, t, tree.counts, i)) == pytest.approx(0.25, abs=1e-15)
    for r in run_all(binary, t, 3):
        assert r.max_abs_error < 1e-14, r


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_coin_all_checks(coin, s):
    t = build_norming_table(coin, s, 3)
    reports = run_all(coin, t, 3)
    assert {r.check for r in reports} >= {"change_of_measure", "tree_marginal", "uniform_conditional",
                                          "martingale_M", "martingale_dM", "offspine_subtree_n1_j1",
                                          "marked_total"}
    for r in reports:
        assert r.passed and r.max_abs_error < 1e-12, r.as_dict()


def test_three_atom_law(coin):
    law = finite(0.2, 0.5, 0.3)
    t = build_norming_table(law, 0.5, 2)
    assert all(r.passed for r in run_all(law, t, 2))


def test_first_step_martingale(coin):
    t = build_norming_table(coin, 0.5, 1)
    u = math.exp(-t.x[1])
    assert 0.5 * u + 0.5 * u * u == pytest.approx(0.5, abs=1e-14)
    assert verify_martingales(coin, t, 1)[0].max_abs_error < 1e-14


def test_offspine_density_binary(binary):
    t = build_norming_table(binary, 0.5, 4)
    for n, j in ((1, 1), (1, 2), (2, 2)):
        assert verify_offspine_density(binary, t, n, j).max_abs_error < 1e-14
        assert verify_offspine_subtree_law(binary, t, n, j).max_abs_error < 1e-14


def test_checks_detect_a_wrong_table(coin):
    good = build_norming_table(coin, 0.5, 3)
    bad = NormingTable(coin, 0.5, good.x * (1 + 1e-6), good.lnD, good.step)
    assert not verify_marked_total(coin, bad, 3).passed
    assert not verify_martingales(coin, bad, 3)[0].passed
    assert not verify_offspine_density(coin, bad, 1, 2).passed
    # the pointwise identity telescopes for any x_n, and the spine choice is uniform by construction
    assert verify_change_of_measure(coin, bad, 3).passed
    assert verify_uniform_conditional(coin, bad, 3).passed
    step = good.step + np.r_[0, 1e-6, 0, 0]
    shifted = NormingTable(coin, 0.5, good.x, np.cumsum(step), step)
    assert not verify_marked_total(coin, shifted, 3).passed
    assert not verify_martingales(coin, shifted, 3)[1].passed


def test_report_dict(coin):
    r = verify_change_of_measure(coin, build_norming_table(coin, 0.5, 2), 2)
    d = r.as_dict()
    assert set(d) == {"check", "law", "depth", "max_abs_error", "tol", "pass"}
    assert d["pass"] is True
