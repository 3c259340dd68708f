"""Uniform-measure weights, Hoelder-exponent trajectories and burst statistics.

All limits are reported as finite-horizon trajectories.  ``W(u)`` is always
the proxy ``Z_k(u) / c_k`` at an explicit horizon ``k``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Protocol

import numpy as np

from .offspring import OffspringLaw
from .pgf import NormingTable
from .spine import _check as _check_spine_row, spine_atoms, spine_tail_bound
from .tree import GWTree, TruncationError, subtree_population


class SpineView(Protocol):
    nu_spine: np.ndarray

    @property
    def depth(self) -> int: ...

    def population(self, g: int) -> int: ...

    def spine_subtree_population(self, n: int, k: int) -> int: ...

    def sibling_population(self, n: int, k: int) -> int: ...

    def window_truncated(self, n: int, k: int) -> bool: ...


def unif_weight(tree: GWTree, u: tuple[int, int], k: int) -> float:
    """Mass of the cylinder of rays through ``u`` as ``Z_k(u) / Z_{n+k}``.

    The ratio form is exact at every finite horizon and the weights of a
    generation sum to one.
    """
    n, _ = u
    return subtree_population(tree, u, k) / int(tree.z[n + k])


def unif_weights(tree: GWTree, n: int, k: int) -> np.ndarray:
    """Weights of every vertex of generation ``n``."""
    z = tree.z
    return np.array([subtree_population(tree, (n, i), k) for i in range(z[n])]) / z[n + k]


@dataclass(frozen=True)
class TrajectoryRecord:
    """Quantities along the spine, indexed by ``n = 0..depth-1``.

    Entries that need generations past the tree depth are NaN, as are the
    ``1/n``-normalised fields at ``n = 0``.
    """

    m: float
    horizon: int
    nu_spine: np.ndarray
    population: np.ndarray
    w_spine: np.ndarray
    sibling_mass: np.ndarray
    w_root: np.ndarray
    holder_hat: np.ndarray
    growth_hat: np.ndarray
    truncated: np.ndarray
    m_hat: float

    @property
    def n(self) -> np.ndarray:
        return np.arange(len(self.nu_spine))

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.growth_hat)


def holder_trajectory(marked: SpineView, table: NormingTable, horizon: int) -> TrajectoryRecord:
    """Fill a :class:`TrajectoryRecord` along the spine of ``marked``.

    ``W(xi_n) = Z_k(xi_n)/c_k``, the siblings are measured one generation
    shorter so that both live in generation ``n + k``, and the root estimate
    is ``Z_{n+k}/c_{n+k}``.
    """
    k = horizon
    depth = marked.depth
    if k < 1:
        raise ValueError("horizon must be >= 1")
    table.check(depth)
    m = table.law.mean
    x = table.x
    nan = np.full(depth, np.nan)
    w_spine, sib, w_root = nan.copy(), nan.copy(), nan.copy()
    holder, growth = nan.copy(), nan.copy()
    truncated = np.zeros(depth, dtype=bool)
    for n in range(0, min(depth, depth - k + 1)):
        truncated[n] = marked.window_truncated(0, n + k)
        try:
            w_spine[n] = marked.spine_subtree_population(n, k) * x[k]
            sib[n] = marked.sibling_population(n, k - 1) * x[k - 1]
        except TruncationError:
            continue
        w_root[n] = marked.population(n + k) * x[n + k]
        if n > 0:
            holder[n] = -(-n * math.log(m) + math.log(w_spine[n]) - math.log(w_root[n])) / n
            growth[n] = math.log(w_spine[n]) / n
    population = np.array([marked.population(g) for g in range(depth + 1)], dtype=np.int64)
    return TrajectoryRecord(
        m=m,
        horizon=k,
        nu_spine=np.asarray(marked.nu_spine, dtype=np.int64),
        population=population,
        w_spine=w_spine,
        sibling_mass=sib,
        w_root=w_root,
        holder_hat=holder,
        growth_hat=growth,
        truncated=truncated,
        m_hat=float(x[k - 1] / x[k]),
    )


def _check_window(a: float, b: float, m: float) -> None:
    if not 1.0 < a < b < m:
        raise ValueError(f"burst window needs 1 < a < b < m; got a={a!r}, b={b!r}, m={m!r}")


def burst_scan(record: TrajectoryRecord, a: float, b: float) -> set[int]:
    """Generations with ``a^n < nu(xi_n) < b^n``."""
    _check_window(a, b, record.m)
    return {int(n) for n in np.flatnonzero(burst_mask(record.nu_spine, a, b))}


def burst_mask(nu: np.ndarray, a: float, b: float) -> np.ndarray:
    """Boolean burst flags for spine child counts ``nu[..., n]``."""
    nu = np.asarray(nu)
    n = np.arange(nu.shape[-1])
    return (nu > a ** n) & (nu < b ** n)


def spine_burst_prob(law: OffspringLaw, table: NormingTable, n: int, a: float, b: float) -> float:
    """``P(a^n < nu(xi_n) < b^n)`` by direct summation of the spine law."""
    _check_window(a, b, law.mean)
    _check_spine_row(table, n)
    lo, hi = a ** n, b ** n
    terms = []
    for ell, p in spine_atoms(law, table, n, after=math.floor(lo)):
        if ell >= hi:
            break
        terms.append(p)
        acc = math.fsum(terms)
        bound = spine_tail_bound(law, table, n, ell)
        if bound < 1e-300 or (acc > 0 and bound < 2.0 ** -64 * acc):
            break
    return math.fsum(terms)


def spine_burst_probs(law: OffspringLaw, table: NormingTable, N: int, a: float, b: float) -> np.ndarray:
    """``P(a^n < nu(xi_n) < b^n)`` for ``n = 0..N``."""
    return np.array([spine_burst_prob(law, table, n, a, b) for n in range(N + 1)])


def burst_partial_sums(law: OffspringLaw, table: NormingTable, N: int, a: float, b: float) -> np.ndarray:
    """``S_0..S_N`` with ``S_N = sum_{n <= N} P(a^n < nu(xi_n) < b^n)``."""
    probs = spine_burst_probs(law, table, N, a, b).tolist()
    return np.array([math.fsum(probs[: i + 1]) for i in range(N + 1)])


def burst_tail_increment(law: OffspringLaw, table: NormingTable, lo: int, hi: int, a: float, b: float) -> float:
    """``S_hi - S_lo`` summed term by term, so tiny increments are not lost to cancellation."""
    return math.fsum(spine_burst_prob(law, table, n, a, b) for n in range(lo + 1, hi + 1))


def window_size_biased_mass(law: OffspringLaw, lo: float, hi: float) -> float:
    """``E[nu; lo < nu < hi]`` under the untilted law."""
    terms = []
    for ell, q in law.atoms(after=math.floor(lo)):
        if ell >= hi:
            break
        terms.append(ell * q)
    return math.fsum(terms)


@dataclass(frozen=True)
class GrowthSummary:
    max_growth: np.ndarray
    final_holder: np.ndarray
    min_holder: np.ndarray
    bound_violations: int
    median: float = field(init=False)
    mad: float = field(init=False)

    def __post_init__(self):
        med = float(np.median(self.max_growth))
        object.__setattr__(self, "median", med)
        object.__setattr__(self, "mad", float(np.median(np.abs(self.max_growth - med))))

    def quantiles(self, values: np.ndarray, qs=(0.05, 0.25, 0.5, 0.75, 0.95)) -> dict[str, float]:
        return {f"q{int(round(100 * q)):02d}": float(np.quantile(values, q)) for q in qs}


def growth_summary(records: Iterable[TrajectoryRecord], N: int | None = None) -> GrowthSummary:
    """Per-record ``max_{n <= N} growth_hat_n`` plus the finite-horizon upper bound check.

    The bound ``W(xi_n) <= m^n W(e)`` holds exactly at matched horizons because
    ``c_{n+k} <= m^n c_k``.
    """
    records = list(records)
    if not records:
        raise ValueError("need at least one record")
    max_growth, final_holder, min_holder = [], [], []
    violations = 0
    for r in records:
        upto = len(r.growth_hat) if N is None else N + 1
        g = r.growth_hat[:upto]
        h = r.holder_hat[:upto]
        ok = np.isfinite(g)
        if not ok.any():
            raise ValueError("record has no finite growth entries; increase depth or lower the horizon")
        max_growth.append(float(np.max(g[ok])))
        final_holder.append(float(h[ok][-1]))
        min_holder.append(float(np.min(h[ok])))
        n = r.n[:upto][ok]
        bound = (n * math.log(r.m) + np.log(r.w_root[:upto][ok])) / n
        clean = ~r.truncated[:upto][ok]
        violations += int(np.sum((g[ok] > bound + 1e-12) & clean))
    return GrowthSummary(
        np.array(max_growth), np.array(final_holder), np.array(min_holder), violations
    )
