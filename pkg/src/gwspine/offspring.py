"""Offspring laws on the positive integers and exact discrete sampling.

Four families are provided: a point mass, an arbitrary finite pmf, the
shifted geometric law and a dyadic power-log law whose mass sits on powers
of two.  The dyadic family has finite mean but ``E[nu log nu] = inf``.

Infinite-support families expose an analytic upper bound on their tail mass,
so every series in the package can be cut off with a certified error instead
of bare truncation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

LN2 = math.log(2.0)
ZETA2 = math.pi ** 2 / 6
# dilog(1/2), closed form
LI2_HALF = math.pi ** 2 / 12 - LN2 ** 2 / 2
DYADIC_MAX_MEAN = ZETA2 / LI2_HALF

SUM_TOL = 1e-12
TABLE_TOL = 2.0 ** -64
MAX_VALUE = 2 ** 62


class LawSpecError(ValueError):
    """Malformed or out-of-range offspring law."""


class BudgetExceeded(RuntimeError):
    """A population or offspring count left the representable range."""


class OffspringLaw:
    """Base class.  Subclasses are frozen dataclasses."""

    mean: float
    xlogx_finite: bool = True

    def atoms(self, after: int = 0) -> Iterator[tuple[int, float]]:
        """Yield ``(l, q_l)`` with ``q_l > 0`` for ``l > after``, increasing in ``l``."""
        raise NotImplementedError

    def tail_bound(self, L: int) -> float:
        """Upper bound on ``P(nu > L)``."""
        raise NotImplementedError

    @property
    def spec(self) -> str:
        raise NotImplementedError

    @property
    def max_support(self) -> int | None:
        return None

    def pmf(self, ell: int) -> float:
        raise NotImplementedError

    def cdf(self, L: int) -> float:
        return math.fsum(q for _, q in self.atoms_upto(L))

    def atoms_upto(self, L: int) -> Iterator[tuple[int, float]]:
        for ell, q in self.atoms():
            if ell > L:
                return
            yield ell, q

    def xlogx_partial_sum(self, L: int) -> float:
        """``sum_{l <= L} l log(l) q_l``."""
        if L < 1:
            raise ValueError("L must be >= 1")
        return math.fsum(ell * math.log(ell) * q for ell, q in self.atoms_upto(L))

    def sampler(self) -> "AtomTable":
        table = getattr(self, "_sampler", None)
        if table is None:
            table = AtomTable(self.atoms, self.tail_bound)
            object.__setattr__(self, "_sampler", table)
        return table

    def sample(self, rng: np.random.Generator, size=None):
        """Exact inverse-CDF draw(s)."""
        return self.sampler().sample(rng, size)

    def __str__(self) -> str:
        return self.spec


@dataclass(frozen=True)
class Deterministic(OffspringLaw):
    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise LawSpecError(f"deterministic law needs integer k >= 2, got {self.k!r}")

    @property
    def mean(self) -> float:
        return float(self.k)

    @property
    def spec(self) -> str:
        return f"deterministic:k={self.k}"

    @property
    def max_support(self) -> int:
        return self.k

    def pmf(self, ell: int) -> float:
        return 1.0 if ell == self.k else 0.0

    def atoms(self, after: int = 0):
        if self.k > after:
            yield self.k, 1.0

    def tail_bound(self, L: int) -> float:
        return 0.0 if L >= self.k else 1.0


@dataclass(frozen=True)
class FiniteSupport(OffspringLaw):
    """``probs[i]`` is the mass of ``i + 1`` children."""

    probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if not probs or any(p < 0 or not math.isfinite(p) for p in probs):
            raise LawSpecError(f"finite law needs nonnegative probabilities, got {probs!r}")
        if abs(math.fsum(probs) - 1.0) > SUM_TOL:
            raise LawSpecError(f"finite law probabilities sum to {math.fsum(probs)!r}, not 1")
        if not self.mean > 1.0:
            raise LawSpecError(f"finite law has mean {self.mean!r}; need mean > 1")

    @property
    def mean(self) -> float:
        return math.fsum((i + 1) * p for i, p in enumerate(self.probs))

    @property
    def spec(self) -> str:
        return "finite:" + ",".join(repr(p) for p in self.probs)

    @property
    def max_support(self) -> int:
        return max(i + 1 for i, p in enumerate(self.probs) if p > 0)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i + 1 for i, p in enumerate(self.probs) if p > 0)

    def pmf(self, ell: int) -> float:
        return self.probs[ell - 1] if 1 <= ell <= len(self.probs) else 0.0

    def atoms(self, after: int = 0):
        for i, p in enumerate(self.probs):
            if i + 1 > after and p > 0:
                yield i + 1, p

    def tail_bound(self, L: int) -> float:
        return math.fsum(self.probs[max(L, 0):])


@dataclass(frozen=True)
class ShiftedGeometric(OffspringLaw):
    """``q_l = p (1 - p)^(l - 1)`` for ``l >= 1``; mean ``1/p``."""

    p: float

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise LawSpecError(f"geometric law needs 0 < p < 1, got {self.p!r}")

    @property
    def mean(self) -> float:
        return 1.0 / self.p

    @property
    def spec(self) -> str:
        return f"geometric:p={self.p!r}"

    def pmf(self, ell: int) -> float:
        if ell < 1:
            return 0.0
        return self.p * (1.0 - self.p) ** (ell - 1)

    def atoms(self, after: int = 0):
        ell = max(after, 0) + 1
        log_r = math.log1p(-self.p)
        while True:
            q = math.exp(math.log(self.p) + (ell - 1) * log_r)
            if q == 0.0:
                return
            yield ell, q
            ell += 1

    def tail_bound(self, L: int) -> float:
        return (1.0 - self.p) ** max(L, 0)

    def cdf(self, L: int) -> float:
        return -math.expm1(max(L, 0) * math.log1p(-self.p))


@dataclass(frozen=True)
class DyadicPowerLog(OffspringLaw):
    """Mass ``C 2^-j j^-2`` on ``2^j`` (``j >= 1``), the remainder on 1."""

    C: float
    xlogx_finite = False

    def __post_init__(self):
        if not 0.0 < self.C <= 1.0 / LI2_HALF:
            raise LawSpecError(f"dyadic law needs 0 < C <= {1 / LI2_HALF!r}, got {self.C!r}")

    @property
    def mean(self) -> float:
        return 1.0 + self.C * (ZETA2 - LI2_HALF)

    @property
    def q1(self) -> float:
        return 1.0 - self.C * LI2_HALF

    @property
    def spec(self) -> str:
        return f"dyadic:m={self.mean!r}"

    def pmf(self, ell: int) -> float:
        if ell == 1:
            return self.q1
        if ell < 2 or ell & (ell - 1):
            return 0.0
        j = ell.bit_length() - 1
        return self.C * math.ldexp(1.0, -j) / (j * j)

    def atoms(self, after: int = 0):
        if after < 1 and self.q1 > 0:
            yield 1, self.q1
        j = max(after, 1).bit_length()
        if after < 2:
            j = 1
        while True:
            q = self.C * math.ldexp(1.0, -j) / (j * j)
            if q == 0.0:
                return
            yield 1 << j, q
            j += 1

    def tail_bound(self, L: int) -> float:
        """``C sum_{j > J} 2^-j j^-2 <= C 2^-J (J+1)^-2`` with ``2^J <= L < 2^(J+1)``."""
        if L < 1:
            return 1.0
        J = int(L).bit_length() - 1
        return self.C * math.ldexp(1.0, -J) / ((J + 1) ** 2)


def make_dyadic_power_log(target_mean: float) -> DyadicPowerLog:
    """Dyadic power-log law with the requested mean.

    The mean is ``1 + C (pi^2/6 - Li2(1/2))``; the mass on 1 stays nonnegative
    only while ``target_mean <= pi^2 / (6 Li2(1/2)) ~ 2.825``.
    """
    if not 1.0 < target_mean <= DYADIC_MAX_MEAN:
        raise LawSpecError(
            f"dyadic mean must lie in (1, {DYADIC_MAX_MEAN:.6f}], got {target_mean!r}"
        )
    return DyadicPowerLog((target_mean - 1.0) / (ZETA2 - LI2_HALF))


def deterministic(k: int) -> Deterministic:
    return Deterministic(k)


def finite(*probs: float) -> FiniteSupport:
    return FiniteSupport(tuple(probs))


def geometric(p: float) -> ShiftedGeometric:
    return ShiftedGeometric(p)


def _parse_number(token: str, kind=float):
    try:
        return kind(token)
    except ValueError:
        raise LawSpecError(f"cannot parse {token!r} as {kind.__name__}") from None


def _keyed(body: str, key: str) -> str:
    name, sep, value = body.partition("=")
    if not sep or name.strip() != key:
        raise LawSpecError(f"expected '{key}=<value>', got {body!r}")
    return value.strip()


def parse_law(text: str) -> OffspringLaw:
    """Parse ``deterministic:k=2``, ``finite:0.5,0.5``, ``geometric:p=0.5`` or ``dyadic:m=2``."""
    family, sep, body = text.strip().partition(":")
    if not sep:
        raise LawSpecError(f"law {text!r} lacks a ':' after the family name")
    family = family.strip().lower()
    if family == "deterministic":
        return Deterministic(_parse_number(_keyed(body, "k"), int))
    if family == "finite":
        tokens = [t.strip() for t in body.split(",")]
        return FiniteSupport(tuple(_parse_number(t) for t in tokens))
    if family == "geometric":
        return ShiftedGeometric(_parse_number(_keyed(body, "p")))
    if family == "dyadic":
        return make_dyadic_power_log(_parse_number(_keyed(body, "m")))
    raise LawSpecError(f"unknown law family {family!r}")


class AtomTable:
    """Inverse-CDF sampler over a discrete law on the positive integers.

    ``source(after)`` yields ``(value, prob)`` atoms beyond ``after`` and
    ``tail_bound(L)`` bounds the mass beyond ``L``.  Prefix sums are extended
    until the bound drops below ``tol``; draws landing in the leftover mass are
    resolved by walking the source further, conditioned on exceeding the table.
    """

    def __init__(
        self,
        source: Callable[[int], Iterator[tuple[int, float]]],
        tail_bound: Callable[[int], float],
        tol: float = TABLE_TOL,
    ):
        self.source = source
        self.tail_bound = tail_bound
        values, probs = [], []
        exhausted = True
        for ell, p in source(0):
            if ell > MAX_VALUE:
                break
            values.append(ell)
            probs.append(p)
            if tail_bound(ell) < tol:
                exhausted = False
                break
        if not values:
            raise ValueError("law has no atoms")
        self.values = np.asarray(values, dtype=np.int64)
        probs = np.asarray(probs, dtype=float)
        total = math.fsum(probs)
        if exhausted or total >= 1.0:
            probs = probs / total
            self.tail = 0.0
        else:
            self.tail = 1.0 - total
        self.probs = probs
        self.cdf = np.cumsum(probs)
        self._tail_cache = None

    def __len__(self) -> int:
        return len(self.values)

    def _tail_atoms(self):
        if self._tail_cache is None:
            vals, ps = [], []
            acc = 0.0
            for ell, p in self.source(int(self.values[-1])):
                if ell > MAX_VALUE:
                    break
                vals.append(ell)
                ps.append(p)
                acc += p
                if self.tail_bound(ell) < TABLE_TOL * acc or len(vals) > 100_000:
                    break
            if not vals:
                vals, ps = [int(self.values[-1])], [1.0]
            ps = np.asarray(ps)
            self._tail_cache = (np.asarray(vals, dtype=np.int64), np.cumsum(ps) / ps.sum())
        return self._tail_cache

    def _tail_draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        vals, cdf = self._tail_atoms()
        idx = np.searchsorted(cdf, rng.random(size), side="left")
        return vals[np.minimum(idx, len(vals) - 1)]

    def sample(self, rng: np.random.Generator, size=None):
        u = rng.random(size)
        idx = np.searchsorted(self.cdf, u, side="left")
        out = self.values[np.minimum(idx, len(self.values) - 1)]
        beyond = idx >= len(self.values)
        if np.any(beyond):
            if size is None:
                return int(self._tail_draw(rng, 1)[0])
            out = out.copy()
            out[beyond] = self._tail_draw(rng, int(beyond.sum()))
        return int(out) if size is None else out

    def sum_of_draws(self, counts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """For each entry ``n`` of ``counts``, the sum of ``n`` i.i.d. draws.

        Uses one multinomial over the atoms, so the cost does not depend on ``n``.
        """
        counts = np.asarray(counts, dtype=np.int64)
        out = np.zeros(counts.shape, dtype=np.int64)
        live = counts > 0
        if not np.any(live):
            return out
        n = counts[live]
        pvals = np.append(self.probs, self.tail)
        k = rng.multinomial(n, pvals)
        atom_counts = k[:, :-1]
        approx = atom_counts.astype(float) @ self.values.astype(float)
        if np.any(approx > MAX_VALUE):
            raise BudgetExceeded("population exceeds int64 budget")
        sums = atom_counts @ self.values
        extra = k[:, -1]
        for i in np.flatnonzero(extra):
            sums[i] += int(self._tail_draw(rng, int(extra[i])).sum())
        out[live] = sums
        return out
