"""Exhaustive enumeration of small trees for exact identity checks.

For a finite-support law every tree of depth ``n`` is listed with its exact
GW probability.  Marked-tree probabilities are then recomputed factor by
factor from the tilted laws and compared against the martingale side
(derivative martingale over ``Z_n`` times GW).  All probabilities are kept in
log-space and exponentiated only when two sides are compared.
"""
from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import asdict, dataclass

import numpy as np

from .offspring import OffspringLaw
from .pgf import NormingTable
from .spine import offspine_law, spine_law
from .tree import GWTree, martingale_values

EXACT_TOL = 1e-12
IDENTITY_TOL = 1e-10


class EnumerationBudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnumeratedTree:
    """Child counts of every vertex above depth ``n``, in breadth-first order."""

    counts: tuple[tuple[int, ...], ...]
    log_prob: float

    @property
    def depth(self) -> int:
        return len(self.counts)

    @property
    def prob(self) -> float:
        return math.exp(self.log_prob)

    @property
    def z(self) -> tuple[int, ...]:
        return (1,) + tuple(sum(c) for c in self.counts)

    def to_gwtree(self) -> GWTree:
        nu = [np.array(c, dtype=np.int64) for c in self.counts]
        return GWTree(nu, [np.ones(len(c), dtype=bool) for c in nu])


@dataclass(frozen=True)
class CheckReport:
    check: str
    law: str
    depth: int
    max_abs_error: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.max_abs_error < self.tol)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = self.passed
        return d


def _finite_atoms(law: OffspringLaw) -> list[tuple[int, float]]:
    if law.max_support is None:
        raise ValueError(f"enumeration needs a finite-support law, got {law.spec}")
    return list(law.atoms())


def _log_gw(law: OffspringLaw, counts) -> float:
    return math.fsum(math.log(law.pmf(c)) for gen in counts for c in gen)


def enumerate_trees(law: OffspringLaw, depth: int, budget: int = 200_000) -> list[EnumeratedTree]:
    """Every distinct depth-``depth`` tree with its exact GW probability."""
    atoms = _finite_atoms(law)
    support = [ell for ell, _ in atoms]
    logq = {ell: math.log(q) for ell, q in atoms}
    partial = [((), 0.0, 1)]
    for _ in range(depth):
        grown = []
        for counts, lp, z in partial:
            for gen in itertools.product(support, repeat=z):
                grown.append((counts + (gen,), lp + math.fsum(logq[c] for c in gen), sum(gen)))
                if len(grown) > budget:
                    raise EnumerationBudgetError(f"more than {budget} trees at depth {depth}")
        partial = grown
    return [EnumeratedTree(c, lp) for c, lp, _ in partial]


def ancestors(counts, n: int, i: int) -> list[int]:
    """Indices of the ancestors of vertex ``(n, i)`` in generations ``0..n``."""
    path = [i]
    for g in range(n - 1, -1, -1):
        cum = np.cumsum(counts[g])
        path.append(int(np.searchsorted(cum, path[-1], side="right")))
    return path[::-1]


def subtree_counts(counts, n: int, i: int, j: int) -> tuple[tuple[int, ...], ...]:
    """Child counts of the depth-``j`` subtree rooted at ``(n, i)``."""
    lo, hi = i, i + 1
    out = []
    for g in range(n, n + j):
        block = tuple(counts[g][lo:hi])
        out.append(block)
        lo = sum(counts[g][:lo])
        hi = lo + sum(block)
    return tuple(out)


def marked_log_prob(law: OffspringLaw, table: NormingTable, counts, i: int) -> float:
    """Log-probability that the construction yields tree ``counts`` with ``xi_n = i``.

    Product of spine-law masses divided by the spine child count (uniform
    choice of the next spine vertex) and off-spine masses for everybody else.
    """
    n = len(counts)
    path = ancestors(counts, n, i)
    terms = []
    for g in range(n):
        for v, c in enumerate(counts[g]):
            if v == path[g]:
                terms.append(math.log(spine_law(law, table, g, c)) - math.log(c))
            else:
                terms.append(math.log(offspine_law(law, table, g, c)))
    return math.fsum(terms)


def _martingale_log_side(table: NormingTable, tree: EnumeratedTree) -> float:
    """``log(dM_n / Z_n) + log GW(T_n)`` from the martingale formulas."""
    z = np.array(tree.z)
    _, dM, _ = martingale_values(z, table)
    return math.log(dM[-1]) - math.log(z[-1]) + tree.log_prob


def verify_change_of_measure(law: OffspringLaw, table: NormingTable, depth: int) -> CheckReport:
    """Pointwise identity for every tree and spine position, at every depth ``1..depth``."""
    err = 0.0
    for n in range(1, depth + 1):
        for t in enumerate_trees(law, n):
            rhs = math.exp(_martingale_log_side(table, t))
            for i in range(t.z[-1]):
                err = max(err, abs(math.exp(marked_log_prob(law, table, t.counts, i)) - rhs))
    return CheckReport("change_of_measure", law.spec, depth, err, IDENTITY_TOL)


def verify_marked_total(law: OffspringLaw, table: NormingTable, depth: int) -> CheckReport:
    """The construction is a probability law: marked-tree masses sum to one.

    The pointwise identity telescopes for any sequence ``x_n``; this total is
    what ties the tilted laws to the actual norming table.
    """
    total = math.fsum(
        math.exp(marked_log_prob(law, table, t.counts, i))
        for t in enumerate_trees(law, depth)
        for i in range(t.z[-1])
    )
    return CheckReport("marked_total", law.spec, depth, abs(total - 1.0), EXACT_TOL)


def verify_tree_marginal(law: OffspringLaw, table: NormingTable, depth: int) -> CheckReport:
    """Summing over spine positions gives ``dM_n GW(T_n)``."""
    err = 0.0
    for t in enumerate_trees(law, depth):
        lhs = math.fsum(math.exp(marked_log_prob(law, table, t.counts, i)) for i in range(t.z[-1]))
        _, dM, _ = martingale_values(np.array(t.z), table)
        err = max(err, abs(lhs - dM[-1] * t.prob))
    return CheckReport("tree_marginal", law.spec, depth, err, IDENTITY_TOL)


def verify_uniform_conditional(law: OffspringLaw, table: NormingTable, depth: int) -> CheckReport:
    """Given the tree, the spine position is uniform over generation ``depth``."""
    err = 0.0
    for t in enumerate_trees(law, depth):
        logs = np.array([marked_log_prob(law, table, t.counts, i) for i in range(t.z[-1])])
        w = np.exp(logs - logs.max())
        cond = w / math.fsum(w)
        err = max(err, float(np.max(np.abs(cond - 1.0 / t.z[-1]))))
    return CheckReport("uniform_conditional", law.spec, depth, err, EXACT_TOL)


def verify_martingales(law: OffspringLaw, table: NormingTable, depth: int) -> list[CheckReport]:
    """One-step conditional expectations of ``M_n`` and the derivative martingale."""
    err_m = err_dm = 0.0
    for n in range(1, depth + 1):
        groups = defaultdict(list)
        for t in enumerate_trees(law, n):
            groups[t.counts[:-1]].append(t)
        for prefix, children in groups.items():
            parent_lp = _log_gw(law, prefix)
            z_prev = np.array((1,) + tuple(sum(c) for c in prefix))
            M_prev, dM_prev, _ = martingale_values(z_prev, table)
            em, edm = [], []
            for t in children:
                M, dM, _ = martingale_values(np.array(t.z), table)
                w = math.exp(t.log_prob - parent_lp)
                em.append(w * M[-1])
                edm.append(w * dM[-1])
            err_m = max(err_m, abs(math.fsum(em) - M_prev[-1]))
            err_dm = max(err_dm, abs(math.fsum(edm) - dM_prev[-1]))
    return [
        CheckReport("martingale_M", law.spec, depth, err_m, EXACT_TOL),
        CheckReport("martingale_dM", law.spec, depth, err_dm, EXACT_TOL),
    ]


def verify_offspine_subtree_law(
    law: OffspringLaw, table: NormingTable, depth: int, subtree_depth: int
) -> CheckReport:
    """Conditional law of an off-spine subtree against GW reweighted by ``M_j(u)``.

    Marked trees of depth ``n + j`` are enumerated, conditioned on
    ``(T_n, xi_n)`` and marginalised onto the depth-``j`` subtree of every
    off-spine vertex ``u`` at generation ``n = depth``.  The target density is
    ``M_j(u) = exp(x_n - Z_j(u) x_{n+j})``.
    """
    n, j = depth, subtree_depth
    x = table.x
    joint: dict = defaultdict(float)
    marginal: dict = defaultdict(float)
    for t in enumerate_trees(law, n + j):
        for i in range(t.z[-1]):
            p = math.exp(marked_log_prob(law, table, t.counts, i))
            xi_n = ancestors(t.counts, n + j, i)[n]
            key = (t.counts[:n], xi_n)
            marginal[key] += p
            z_n = 1 if n == 0 else sum(t.counts[n - 1])
            for u in range(z_n):
                if u != xi_n:
                    joint[key, u, subtree_counts(t.counts, n, u, j)] += p
    err = 0.0
    for (key, u, shape), p in joint.items():
        z_j = sum(shape[-1])
        target = math.exp(_log_gw(law, shape) + x[n] - z_j * x[n + j])
        err = max(err, abs(p / marginal[key] - target))
    return CheckReport(f"offspine_subtree_n{n}_j{j}", law.spec, n + j, err, IDENTITY_TOL)


def verify_offspine_density(law: OffspringLaw, table: NormingTable, n: int, j: int) -> CheckReport:
    """``sum_S GW(S) M_j(S) = 1`` over depth-``j`` subtrees rooted at generation ``n``."""
    x = table.x
    total = math.fsum(
        math.exp(s.log_prob + x[n] - s.z[-1] * x[n + j]) for s in enumerate_trees(law, j)
    )
    return CheckReport(f"offspine_density_n{n}_j{j}", law.spec, n + j, abs(total - 1.0), EXACT_TOL)


def verify_enumeration(law: OffspringLaw, depth: int) -> CheckReport:
    total = math.fsum(t.prob for t in enumerate_trees(law, depth))
    return CheckReport("enumeration_total", law.spec, depth, abs(total - 1.0), EXACT_TOL)


def run_all(law: OffspringLaw, table: NormingTable, depth: int) -> list[CheckReport]:
    """Every oracle check up to ``depth``; the table needs rows ``0..depth``."""
    table.check(depth)
    reports = [
        verify_enumeration(law, depth),
        verify_change_of_measure(law, table, depth),
        verify_marked_total(law, table, depth),
        verify_tree_marginal(law, table, depth),
        verify_uniform_conditional(law, table, depth),
        *verify_martingales(law, table, depth),
    ]
    for n in range(1, depth):
        for j in range(1, depth - n + 1):
            reports.append(verify_offspine_subtree_law(law, table, n, j))
            reports.append(verify_offspine_density(law, table, n, j))
    return reports
