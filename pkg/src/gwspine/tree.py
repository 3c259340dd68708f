"""Galton-Watson trees stored generation by generation.

A tree is a list of per-generation arrays of drawn child counts.  Vertices
are addressed as ``(generation, index)`` in breadth-first order, so the
children of a contiguous block of vertices form a contiguous block in the
next generation and subtree populations are two array lookups per level.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .offspring import OffspringLaw
from .pgf import NormingTable


class TruncationError(RuntimeError):
    """A requested subtree window contains vertices whose children were capped."""


@dataclass
class GWTree:
    """``nu[n][i]`` is the drawn child count of vertex ``(n, i)`` for ``n < depth``.

    ``expanded[n][i]`` is False when the vertex's children were not
    materialized because of the vertex cap.
    """

    nu: list[np.ndarray]
    expanded: list[np.ndarray]
    offsets: list[np.ndarray] = field(init=False, repr=False)

    def __post_init__(self):
        self.offsets = [
            np.concatenate(([0], np.cumsum(np.where(e, v, 0)))).astype(np.int64)
            for v, e in zip(self.nu, self.expanded)
        ]

    @property
    def depth(self) -> int:
        return len(self.nu)

    @property
    def z(self) -> np.ndarray:
        return np.array([1] + [int(o[-1]) for o in self.offsets], dtype=np.int64)

    @property
    def truncated(self) -> np.ndarray:
        """Per generation: did any vertex of generation ``n`` lose its children?"""
        return np.array([not e.all() for e in self.expanded] + [False])

    @property
    def n_vertices(self) -> int:
        return int(self.z.sum())

    def parent(self, n: int) -> np.ndarray:
        if n == 0:
            return np.array([-1])
        counts = np.where(self.expanded[n - 1], self.nu[n - 1], 0)
        return np.repeat(np.arange(len(counts)), counts)

    def children(self, u: tuple[int, int]) -> range:
        n, i = u
        if not self.expanded[n][i]:
            raise TruncationError(f"children of {u} were not materialized")
        return range(int(self.offsets[n][i]), int(self.offsets[n][i + 1]))

    def descendant_range(self, u: tuple[int, int], k: int) -> tuple[int, int]:
        n, i = u
        if n + k > self.depth:
            raise IndexError(f"window {u} + {k} passes tree depth {self.depth}")
        lo, hi = i, i + 1
        for g in range(n, n + k):
            if not self.expanded[g][lo:hi].all():
                raise TruncationError(f"subtree of {u} truncated at generation {g}")
            lo, hi = int(self.offsets[g][lo]), int(self.offsets[g][hi])
        return lo, hi


def expand_generation(nu: np.ndarray, budget: int, keep: int | None = None) -> np.ndarray:
    """Breadth-first cap: expand the longest prefix of vertices whose children fit ``budget``.

    Vertex ``keep`` (the spine) is always expanded and charged first, even
    past the budget.  Child counts are at least 1, so the running cost is
    strictly increasing and the other expanded vertices form a prefix.
    """
    nu = np.asarray(nu, dtype=np.int64)
    if keep is None:
        return np.cumsum(nu) <= budget
    others = np.ones(len(nu), dtype=bool)
    others[keep] = False
    expanded = others & (np.cumsum(np.where(others, nu, 0)) <= budget - int(nu[keep]))
    expanded[keep] = True
    return expanded


def simulate_gw(law: OffspringLaw, depth: int, cap: int, rng: np.random.Generator) -> GWTree:
    """Plain GW tree to ``depth`` generations with at most ``cap`` vertices."""
    if depth < 0 or cap < 1:
        raise ValueError("need depth >= 0 and cap >= 1")
    sampler = law.sampler()
    nu, expanded = [], []
    z, total = 1, 1
    for _ in range(depth):
        counts = np.asarray(sampler.sample(rng, z), dtype=np.int64)
        e = expand_generation(counts, cap - total)
        nu.append(counts)
        expanded.append(e)
        z = int(np.where(e, counts, 0).sum())
        total += z
    return GWTree(nu, expanded)


def simulate_populations(
    law: OffspringLaw, depth: int, replicas: int, rng: np.random.Generator
) -> np.ndarray:
    """``Z_0..Z_depth`` for many independent trees, shape ``(replicas, depth+1)``.

    Exact: the sum of ``Z_n`` offspring draws is obtained from one multinomial
    count over the atoms of the law, so no vertex is ever materialized.
    """
    sampler = law.sampler()
    z = np.ones((replicas, depth + 1), dtype=np.int64)
    for n in range(depth):
        z[:, n + 1] = sampler.sum_of_draws(z[:, n], rng)
    return z


def subtree_population(tree: GWTree, u: tuple[int, int], k: int) -> int:
    """``Z_k(u)``: descendants of ``u`` exactly ``k`` generations below it."""
    lo, hi = tree.descendant_range(u, k)
    return hi - lo


def estimate_w(tree: GWTree, u: tuple[int, int], table: NormingTable, k: int) -> float:
    """Finite-horizon proxy ``Z_k(u) / c_k`` of ``W_inf(u)``."""
    table.check(k)
    return subtree_population(tree, u, k) * float(table.x[k])


@dataclass(frozen=True)
class MartingaleTrace:
    M: np.ndarray
    dM: np.ndarray
    w_hat: np.ndarray
    truncated: np.ndarray


def martingale_values(z: np.ndarray, table: NormingTable) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``M_n``, the derivative martingale and ``Z_n/c_n`` for populations ``z[..., n]``."""
    z = np.asarray(z)
    n = z.shape[-1]
    table.check(n - 1)
    x, lnD = table.x[:n], table.lnD[:n]
    w = z * x
    M = np.exp(-w)
    dM = np.exp(x + np.log(z) - lnD - w)
    return M, dM, w


def martingale_trace(tree: GWTree, table: NormingTable) -> MartingaleTrace:
    M, dM, w = martingale_values(tree.z, table)
    return MartingaleTrace(M, dM, w, tree.truncated)


def derivative_bound(table: NormingTable, n: int) -> float:
    """``exp(1/c_0) e^-1 max_{j<=n} c_j / D_j``, valid since ``y e^-y <= e^-1``."""
    return float(np.exp(table.x[0] - 1.0) * np.max(np.exp(-np.log(table.x[: n + 1]) - table.lnD[: n + 1])))
