"""Generating functions, their inverses and the Seneta-Heyde norming table.

Everything is parametrised by ``x = -log(s)``.  The two workhorses are

    F(x) = -log phi(exp(-x))        (strictly increasing, concave, F(x) ~ m x)
    G(x) =  log phi'(exp(-x))       (G(0) = log m)

and the inverse iterate is stored as ``x_n = -log phi_n^{-1}(s)``, never as
``phi_n^{-1}(s)`` itself: after forty generations that point sits within
``m^-40`` of 1 and direct storage keeps no significant digits of ``1 - s``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import singledispatch

import numpy as np
from scipy.optimize import brentq

from .offspring import (
    Deterministic,
    DyadicPowerLog,
    FiniteSupport,
    OffspringLaw,
    ShiftedGeometric,
)

MAX_ITER = 200
_J = np.arange(1, 1001, dtype=float)
_POW2 = np.ldexp(1.0, np.arange(1, 1001))


class DomainError(ValueError):
    pass


class HorizonError(IndexError):
    """Generation index beyond the rows of a norming table."""


@singledispatch
def neg_log_pgf(law: OffspringLaw, x: float) -> float:
    """``-log phi(exp(-x))`` for ``x > 0``."""
    raise TypeError(f"no generating function for {type(law).__name__}")


@singledispatch
def log_pgf_slope(law: OffspringLaw, x: float) -> float:
    """``log phi'(exp(-x))`` for ``x > 0``."""
    raise TypeError(f"no generating function for {type(law).__name__}")


def _from_complement(one_minus_phi: float, phi: float) -> float:
    # log1p keeps relative precision of 1 - phi when x is tiny
    if one_minus_phi < 0.5:
        return -math.log1p(-one_minus_phi)
    return -math.log(phi)


@neg_log_pgf.register
def _(law: Deterministic, x: float) -> float:
    return law.k * x


@log_pgf_slope.register
def _(law: Deterministic, x: float) -> float:
    return math.log(law.k) - (law.k - 1) * x


@neg_log_pgf.register
def _(law: FiniteSupport, x: float) -> float:
    ell = np.arange(1, len(law.probs) + 1, dtype=float)
    q = np.asarray(law.probs)
    return _from_complement(
        float(np.sum(q * -np.expm1(-ell * x))), float(np.sum(q * np.exp(-ell * x)))
    )


@log_pgf_slope.register
def _(law: FiniteSupport, x: float) -> float:
    ell = np.arange(1, len(law.probs) + 1, dtype=float)
    return math.log(float(np.sum(ell * np.asarray(law.probs) * np.exp(-(ell - 1) * x))))


@neg_log_pgf.register
def _(law: ShiftedGeometric, x: float) -> float:
    # phi(s) = p s / (1 - (1-p) s)
    return x + math.log1p((1.0 - law.p) / law.p * -math.expm1(-x))


@log_pgf_slope.register
def _(law: ShiftedGeometric, x: float) -> float:
    # phi'(s) = p / (1 - (1-p) s)^2
    return -math.log(law.p) - 2.0 * math.log1p((1.0 - law.p) / law.p * -math.expm1(-x))


def _dyadic_terms(x: float) -> int:
    # past J = log2(1/x) + 64 every remaining term is below 2^-64 relative
    return int(min(1000, max(64, math.ceil(math.log2(1.0 / x)) + 64 if x < 1 else 64)))


@neg_log_pgf.register
def _(law: DyadicPowerLog, x: float) -> float:
    J = _dyadic_terms(x)
    w = law.C * np.ldexp(1.0, -np.arange(1, J + 1)) / _J[:J] ** 2
    a = _POW2[:J] * x
    one_minus = law.q1 * -math.expm1(-x) + float(np.sum(w * -np.expm1(-a)))
    phi = law.q1 * math.exp(-x) + float(np.sum(w * np.exp(-a)))
    return _from_complement(one_minus, phi)


@log_pgf_slope.register
def _(law: DyadicPowerLog, x: float) -> float:
    # l q_l = C / j^2 at l = 2^j
    J = _dyadic_terms(x)
    terms = law.C / _J[:J] ** 2 * np.exp(-(_POW2[:J] - 1.0) * x)
    return math.log(law.q1 + float(np.sum(terms)))


def _check_unit(s: float) -> None:
    if not 0.0 < s < 1.0:
        raise DomainError(f"generating function argument must lie in (0, 1), got {s!r}")


def pgf_eval(law: OffspringLaw, s: float) -> float:
    """``phi(s) = E[s^nu]``."""
    _check_unit(s)
    return math.exp(-neg_log_pgf(law, -math.log(s)))


def pgf_derivative(law: OffspringLaw, s: float) -> float:
    """``phi'(s) = E[nu s^(nu-1)]``."""
    _check_unit(s)
    return math.exp(log_pgf_slope(law, -math.log(s)))


def invert_pgf_log(law: OffspringLaw, y: float) -> float:
    """Solve ``-log phi(exp(-x)) = y`` for ``x``, i.e. ``x = -log phi^{-1}(exp(-y))``.

    ``F`` is concave with ``x < F(x) <= m x``, so ``[y/m, y]`` always brackets
    the root.
    """
    if not y > 0:
        raise DomainError(f"y must be positive, got {y!r}")
    if isinstance(law, Deterministic):
        return y / law.k
    lo, hi = y / law.mean, y
    f_lo = neg_log_pgf(law, lo) - y
    if f_lo >= 0:
        return lo
    x, info = brentq(
        lambda t: neg_log_pgf(law, t) - y, lo, hi,
        xtol=1e-300, maxiter=MAX_ITER, full_output=True, disp=False,
    )
    if not info.converged:
        raise RuntimeError(f"pgf inversion did not converge for y={y!r}: {info.flag}")
    return x


@dataclass(frozen=True)
class NormingTable:
    """Rows ``n = 0..N`` of ``x_n = 1/c_n`` and ``log D_n``.

    ``D_n = phi_n'(phi_n^{-1}(s))``; ``step[n] = log D_n - log D_{n-1}``
    is kept separately so per-generation ratios never subtract large logs.
    """

    law: OffspringLaw
    s: float
    x: np.ndarray
    lnD: np.ndarray
    step: np.ndarray

    @property
    def horizon(self) -> int:
        return len(self.x) - 1

    @property
    def c(self) -> np.ndarray:
        return 1.0 / self.x

    def check(self, n: int) -> None:
        if not 0 <= n <= self.horizon:
            raise HorizonError(f"generation {n} outside norming table 0..{self.horizon}")

    def to_csv(self, header: str = "") -> str:
        buf = io.StringIO()
        buf.write(header)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "x", "c", "lnD", "c_ratio", "D_ratio"])
        for n, c_ratio, d_ratio in ratio_diagnostics(self, pad=True):
            w.writerow([n, _g(self.x[n]), _g(self.c[n]), _g(self.lnD[n]), _g(c_ratio), _g(d_ratio)])
        return buf.getvalue()


def _g(v: float) -> str:
    return "" if v is None or not math.isfinite(v) else "%.17g" % v


def build_norming_table(law: OffspringLaw, s: float = 0.5, N: int = 40) -> NormingTable:
    """Iterate ``x_n = F^{-1}(x_{n-1})`` from ``x_0 = -log s``."""
    _check_unit(s)
    if N < 0:
        raise ValueError("N must be >= 0")
    x = [-math.log(s)]
    step = [0.0]
    for _ in range(N):
        x.append(invert_pgf_log(law, x[-1]))
        step.append(log_pgf_slope(law, x[-1]))
    lnD = [math.fsum(step[: n + 1]) for n in range(N + 1)]
    return NormingTable(law, s, np.array(x), np.array(lnD), np.array(step))


def ratio_diagnostics(table: NormingTable, pad: bool = False) -> list[tuple[int, float, float]]:
    """``(n, c_{n+1}/c_n, D_{n+1}/D_n)``; with ``pad`` the last row carries NaNs."""
    rows = [
        (n, table.x[n] / table.x[n + 1], math.exp(table.step[n + 1]))
        for n in range(table.horizon)
    ]
    if pad:
        rows.append((table.horizon, math.nan, math.nan))
    return rows
