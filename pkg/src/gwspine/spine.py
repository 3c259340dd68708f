"""Tilted offspring laws and the marked-tree (spine) construction.

At generation ``k`` the spine vertex reproduces according to

    qs_l = q_l * l * exp(-(l - 1) x_{k+1}) * D_k / D_{k+1}

and every other vertex according to

    qo_l = q_l * exp(x_k) * exp(-l x_{k+1}),

with ``x_k = 1/c_k`` read from a :class:`NormingTable`.  The next spine
vertex is uniform among the spine's children.  The resulting marked tree has
the law of the tree under ``dQ = dM_inf dGW`` with the spine distributed as
the uniform measure given the tree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .offspring import AtomTable, BudgetExceeded, OffspringLaw
from .pgf import HorizonError, NormingTable
from .tree import GWTree, expand_generation


def _log_spine_tilt(table: NormingTable, k: int, ell: int) -> float:
    return math.log(ell) - (ell - 1) * float(table.x[k + 1]) - float(table.step[k + 1])


def _log_offspine_tilt(table: NormingTable, k: int, ell: int) -> float:
    return float(table.x[k]) - ell * float(table.x[k + 1])


def _check(table: NormingTable, k: int) -> None:
    if k < 0 or k + 1 > table.horizon:
        raise HorizonError(f"generation {k} needs norming rows up to {k + 1}, table has {table.horizon}")


def spine_law(law: OffspringLaw, table: NormingTable, k: int, ell: int) -> float:
    """Mass of ``ell`` children for the spine vertex at generation ``k``."""
    _check(table, k)
    q = law.pmf(ell)
    if q == 0.0:
        return 0.0
    return math.exp(math.log(q) + _log_spine_tilt(table, k, ell))


def offspine_law(law: OffspringLaw, table: NormingTable, k: int, ell: int) -> float:
    """Mass of ``ell`` children for an off-spine vertex at generation ``k``."""
    _check(table, k)
    q = law.pmf(ell)
    if q == 0.0:
        return 0.0
    return math.exp(math.log(q) + _log_offspine_tilt(table, k, ell))


def spine_tail_bound(law: OffspringLaw, table: NormingTable, k: int, L: int) -> float:
    """Bound on the spine-law mass beyond ``L``: ``sup_{l>L} l e^{-(l-1)x}`` times ``P(nu > L)``."""
    x = float(table.x[k + 1])
    if (L + 1) * x >= 1.0:
        peak = math.log(L + 1) - L * x
    else:
        peak = x - 1.0 - math.log(x)
    tail = law.tail_bound(L)
    if tail == 0.0:
        return 0.0
    return math.exp(peak - float(table.step[k + 1]) + math.log(tail))


def offspine_tail_bound(law: OffspringLaw, table: NormingTable, k: int, L: int) -> float:
    tail = law.tail_bound(L)
    if tail == 0.0:
        return 0.0
    return math.exp(_log_offspine_tilt(table, k, L + 1) + math.log(tail))


def spine_atoms(law: OffspringLaw, table: NormingTable, k: int, after: int = 0):
    for ell, q in law.atoms(after):
        yield ell, math.exp(math.log(q) + _log_spine_tilt(table, k, ell))


def offspine_atoms(law: OffspringLaw, table: NormingTable, k: int, after: int = 0):
    for ell, q in law.atoms(after):
        yield ell, math.exp(math.log(q) + _log_offspine_tilt(table, k, ell))


class TiltedLaws:
    """Per-generation samplers for both tilted laws, built lazily and cached."""

    def __init__(self, law: OffspringLaw, table: NormingTable):
        self.law = law
        self.table = table
        self._spine: dict[int, AtomTable] = {}
        self._off: dict[int, AtomTable] = {}

    def spine(self, k: int) -> AtomTable:
        if k not in self._spine:
            _check(self.table, k)
            law, table = self.law, self.table
            self._spine[k] = AtomTable(
                lambda after: spine_atoms(law, table, k, after),
                lambda L: spine_tail_bound(law, table, k, L),
            )
        return self._spine[k]

    def offspine(self, k: int) -> AtomTable:
        if k not in self._off:
            _check(self.table, k)
            law, table = self.law, self.table
            self._off[k] = AtomTable(
                lambda after: offspine_atoms(law, table, k, after),
                lambda L: offspine_tail_bound(law, table, k, L),
            )
        return self._off[k]


def tilted_laws(law: OffspringLaw, table: NormingTable) -> TiltedLaws:
    """Shared cache hung on the table, so samplers are built once per table."""
    cache = table.__dict__.setdefault("_tilted", {})
    if law not in cache:
        cache[law] = TiltedLaws(law, table)
    return cache[law]


def sample_spine_children(law: OffspringLaw, table: NormingTable, k: int, rng: np.random.Generator) -> int:
    return int(tilted_laws(law, table).spine(k).sample(rng))


@dataclass
class MarkedTree:
    """A :class:`GWTree` with a distinguished ray; ``spine[n]`` indexes ``xi_n`` in generation ``n``."""

    tree: GWTree
    spine: np.ndarray

    @property
    def depth(self) -> int:
        return self.tree.depth

    @property
    def nu_spine(self) -> np.ndarray:
        return np.array([self.tree.nu[n][self.spine[n]] for n in range(self.depth)], dtype=np.int64)

    def spine_rank(self, n: int) -> int:
        """Position of ``xi_{n+1}`` among the children of ``xi_n``."""
        return int(self.spine[n + 1] - self.tree.offsets[n][self.spine[n]])

    def siblings(self, n: int) -> list[int]:
        """Indices in generation ``n+1`` of ``H(xi_n)``, the children of ``xi_n`` other than ``xi_{n+1}``."""
        return [i for i in self.tree.children((n, int(self.spine[n]))) if i != self.spine[n + 1]]

    def population(self, g: int) -> int:
        return int(self.tree.z[g])

    def spine_subtree_population(self, n: int, k: int) -> int:
        lo, hi = self.tree.descendant_range((n, int(self.spine[n])), k)
        return hi - lo

    def sibling_population(self, n: int, k: int) -> int:
        """``sum_{u in H(xi_n)} Z_k(u)``."""
        return self.spine_subtree_population(n, k + 1) - self.spine_subtree_population(n + 1, k)

    def window_truncated(self, n: int, k: int) -> bool:
        return bool(self.tree.truncated[n : n + k].any())


def sample_marked_tree(
    law: OffspringLaw,
    table: NormingTable,
    depth: int,
    cap: int,
    rng: np.random.Generator,
) -> MarkedTree:
    """Grow ``(T, xi)`` generation by generation under a vertex cap.

    Off-spine vertices beyond the cap keep their drawn child count but lose
    their children (flagged in ``tree.expanded``).  The spine is never cut; a
    spine vertex with more children than ``cap`` raises :class:`BudgetExceeded`.
    """
    if depth > table.horizon or depth < 0:
        raise HorizonError(f"depth {depth} needs norming rows up to {depth}, table has {table.horizon}")
    laws = tilted_laws(law, table)
    spine = [0]
    nu, expanded = [], []
    z, total = 1, 1
    for g in range(depth):
        s = spine[-1]
        others = np.asarray(laws.offspine(g).sample(rng, z - 1), dtype=np.int64)
        counts = np.insert(others, s, laws.spine(g).sample(rng))
        if counts[s] > cap:
            raise BudgetExceeded(f"spine vertex at generation {g} has {int(counts[s])} children, over the cap {cap}")
        e = expand_generation(counts, cap - total, keep=s)
        nu.append(counts)
        expanded.append(e)
        rank = int(rng.integers(counts[s]))
        spine.append(int(np.where(e[:s], counts[:s], 0).sum()) + rank)
        z = int(np.where(e, counts, 0).sum())
        total += z
    return MarkedTree(GWTree(nu, expanded), np.array(spine, dtype=np.int64))


@dataclass(frozen=True)
class SpinePopulations:
    """Exact population bookkeeping of a marked tree without per-vertex storage.

    ``clan[i, g]`` is the number of generation-``g`` descendants of ``H(xi_i)``
    (so ``clan[i, i+1] = nu(xi_i) - 1``).  Every quantity along the spine is a
    sum over clans, and clans are grown with aggregated multinomial draws.
    """

    nu_spine: np.ndarray
    clan: np.ndarray

    @property
    def depth(self) -> int:
        return len(self.nu_spine)

    def population(self, g: int) -> int:
        return 1 + int(self.clan[:g, g].sum())

    def spine_subtree_population(self, n: int, k: int) -> int:
        if n + k > self.depth:
            raise IndexError(f"window {n} + {k} passes depth {self.depth}")
        return 1 + int(self.clan[n : n + k, n + k].sum())

    def sibling_population(self, n: int, k: int) -> int:
        if n + 1 + k > self.depth:
            raise IndexError(f"window {n + 1} + {k} passes depth {self.depth}")
        return int(self.clan[n, n + 1 + k])

    def window_truncated(self, n: int, k: int) -> bool:
        return False


def sample_spine_populations(
    law: OffspringLaw,
    table: NormingTable,
    depth: int,
    replicas: int,
    rng: np.random.Generator,
) -> list[SpinePopulations]:
    """``replicas`` independent marked trees, kept as clan population counts."""
    if depth > table.horizon or depth < 0:
        raise HorizonError(f"depth {depth} needs norming rows up to {depth}, table has {table.horizon}")
    laws = tilted_laws(law, table)
    nu = np.zeros((replicas, depth), dtype=np.int64)
    clan = np.zeros((replicas, depth, depth + 1), dtype=np.int64)
    for g in range(depth):
        if g > 0:
            live = clan[:, :g, g].ravel()
            clan[:, :g, g + 1] = laws.offspine(g).sum_of_draws(live, rng).reshape(replicas, g)
        nu[:, g] = laws.spine(g).sample(rng, replicas)
        clan[:, g, g + 1] = nu[:, g] - 1
    return [SpinePopulations(nu[r], clan[r]) for r in range(replicas)]


def sample_spine_offspring(
    law: OffspringLaw,
    table: NormingTable,
    depth: int,
    replicas: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """``nu(xi_0..xi_{depth-1})`` only, shape ``(replicas, depth)``.

    Spine child counts are independent across generations, so burst
    statistics need nothing else from the tree.
    """
    if depth > table.horizon or depth < 0:
        raise HorizonError(f"depth {depth} needs norming rows up to {depth}, table has {table.horizon}")
    laws = tilted_laws(law, table)
    nu = np.zeros((replicas, depth), dtype=np.int64)
    for g in range(depth):
        nu[:, g] = laws.spine(g).sample(rng, replicas)
    return nu
