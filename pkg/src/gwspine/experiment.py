"""Seeded, replica-parallel experiment runner.

Replicas are processed in fixed blocks of ``BLOCK`` consecutive indices.
Block ``b`` draws from ``SeedSequence(seed, spawn_key=(b,))``, so the numbers
any replica sees depend only on ``(seed, replica index)`` and never on how
blocks are scheduled across workers.  Block results are merged in block order.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial

import numpy as np

from . import __version__
from .measure import burst_mask, burst_partial_sums, burst_tail_increment, growth_summary, holder_trajectory
from .offspring import OffspringLaw, parse_law
from .pgf import build_norming_table
from .spine import sample_marked_tree, sample_spine_offspring, sample_spine_populations
from .tree import martingale_values, simulate_populations

BLOCK = 256


@dataclass
class ExperimentConfig:
    law: str = "geometric:p=0.5"
    law2: str | None = None
    s: float = 0.5
    depth: int = 30
    horizon: int = 10
    cap: int = 10_000_000
    replicas: int = 100
    seed: int = 0
    a: float = 1.2
    b: float | None = None
    vertex: bool = False
    format: str = "csv"
    extra: dict = field(default_factory=dict)

    def offspring(self, which: str = "law") -> OffspringLaw:
        return parse_law(getattr(self, which))

    def window(self, law: OffspringLaw) -> tuple[float, float]:
        b = self.b if self.b is not None else min(1.9, 0.95 * law.mean)
        if not 1.0 < self.a < b < law.mean:
            raise ValueError(f"burst window needs 1 < a < b < m; got a={self.a}, b={b}, m={law.mean}")
        return self.a, b

    def validate(self) -> None:
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie in (0, 1), got {self.s}")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.depth < 0 or self.cap < 1:
            raise ValueError("depth must be >= 0 and cap >= 1")
        if self.format not in ("csv", "json"):
            raise ValueError(f"format must be csv or json, got {self.format!r}")
        self.offspring()
        if self.law2 is not None:
            self.offspring("law2")

    def provenance(self) -> dict:
        return {"version": __version__, "config": asdict(self)}


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def blocks(replicas: int) -> list[tuple[int, int, int]]:
    """``(block index, first replica, size)``."""
    return [(b, start, min(BLOCK, replicas - start)) for b, start in enumerate(range(0, replicas, BLOCK))]


def map_blocks(fn, cfg: ExperimentConfig, workers: int = 1) -> list:
    """Apply ``fn(cfg_dict, block, start, size)`` to every block; results in block order."""
    jobs = blocks(cfg.replicas)
    task = partial(_call, fn, asdict(cfg))
    if workers <= 1 or len(jobs) == 1:
        return [task(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, jobs))


def _call(fn, cfg_dict, job):
    return fn(ExperimentConfig(**cfg_dict), *job)


def spine_block(cfg: ExperimentConfig, block: int, start: int, size: int):
    law = cfg.offspring()
    table = build_norming_table(law, cfg.s, cfg.depth + 1)
    rng = block_rng(cfg.seed, block)
    if cfg.vertex:
        marked = [sample_marked_tree(law, table, cfg.depth, cfg.cap, rng) for _ in range(size)]
    else:
        marked = sample_spine_populations(law, table, cfg.depth, size, rng)
    return [holder_trajectory(mt, table, cfg.horizon) for mt in marked]


def spine_rows(records, first_replica: int = 0):
    for r_i, rec in enumerate(records):
        for n in range(len(rec.nu_spine)):
            yield (
                first_replica + r_i, n, int(rec.nu_spine[n]), int(rec.population[n]),
                rec.w_spine[n], rec.sibling_mass[n], rec.holder_hat[n], rec.growth_hat[n],
                int(rec.truncated[n]),
            )


SPINE_COLUMNS = ["replica", "n", "nu_spine", "z_n", "w_hat_spine", "sibling_mass",
                 "holder_hat", "growth_hat", "truncated"]


def spine_summary(cfg: ExperimentConfig, records) -> dict:
    law = cfg.offspring()
    table = build_norming_table(law, cfg.s, cfg.depth + 1)
    gs = growth_summary(records)
    out = {
        "family": law.spec,
        "m": law.mean,
        "s": cfg.s,
        "N": cfg.depth,
        "horizon": cfg.horizon,
        "replicas": len(records),
        "holder_hat_final": gs.quantiles(gs.final_holder),
        "holder_hat_running_min": gs.quantiles(gs.min_holder),
        "growth_hat_running_max": gs.quantiles(gs.max_growth),
        "growth_hat_running_max_median": gs.median,
        "growth_hat_running_max_mad": gs.mad,
        "growth_bound_violations": gs.bound_violations,
        "truncated_entries": int(sum(r.truncated.sum() for r in records)),
    }
    try:
        a, b = cfg.window(law)
    except ValueError:
        return out
    if cfg.depth >= 1:
        nu = np.array([r.nu_spine for r in records])
        counts = burst_mask(nu, a, b).sum(axis=1)
        out["burst_window"] = [a, b]
        out["burst_count_mean"] = float(counts.mean())
        out["burst_partial_sums"] = burst_partial_sums(law, table, cfg.depth - 1, a, b).tolist()
    return out


def burst_block(cfg: ExperimentConfig, block: int, start: int, size: int, which: str = "law"):
    law = cfg.offspring(which)
    table = build_norming_table(law, cfg.s, cfg.depth + 2)
    a, b = cfg.window(law)
    nu = sample_spine_offspring(law, table, cfg.depth + 1, size, block_rng(cfg.seed, block))
    return burst_mask(nu, a, b)


def burst_report(cfg: ExperimentConfig, workers: int = 1) -> dict:
    """Exact partial sums ``S_0..S_N`` against Monte Carlo burst counts for each law."""
    out = {"laws": []}
    tail_from = int(cfg.extra.get("tail_from", max(cfg.depth - 10, 0)))
    for which in ("law", "law2"):
        if getattr(cfg, which) is None:
            continue
        law = cfg.offspring(which)
        table = build_norming_table(law, cfg.s, cfg.depth + 2)
        a, b = cfg.window(law)
        S = burst_partial_sums(law, table, cfg.depth, a, b)
        tail = burst_tail_increment(law, table, tail_from, cfg.depth, a, b)
        flags = np.concatenate(map_blocks(partial(burst_block, which=which), cfg, workers))
        counts = flags.sum(axis=1)
        se = math.sqrt(float(np.var(counts, ddof=1)) / len(counts)) if len(counts) > 1 else math.nan
        out["laws"].append({
            "family": law.spec,
            "m": law.mean,
            "window": [a, b],
            "partial_sums": S.tolist(),
            "tail_increment": tail,
            "tail_from": tail_from,
            "mc_mean_count": float(counts.mean()),
            "mc_standard_error": se,
            "mc_z_score": float((counts.mean() - S[-1]) / se) if se > 0 else 0.0,
        })
    if len(out["laws"]) == 2:
        first, second = (d["tail_increment"] for d in out["laws"])
        out["tail_increment_ratio"] = second / first if first > 0 else None
    return out


def gw_block(cfg: ExperimentConfig, block: int, start: int, size: int):
    law = cfg.offspring()
    return simulate_populations(law, cfg.depth, size, block_rng(cfg.seed, block))


def gw_rows(cfg: ExperimentConfig, z_blocks):
    law = cfg.offspring()
    table = build_norming_table(law, cfg.s, cfg.depth)
    replica = 0
    for z in z_blocks:
        M, dM, w = martingale_values(z, table)
        for r in range(z.shape[0]):
            for n in range(z.shape[1]):
                yield replica, n, int(z[r, n]), M[r, n], dM[r, n], w[r, n]
            replica += 1


GW_COLUMNS = ["replica", "n", "z_n", "m_n", "dm_n", "w_hat"]


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default, allow_nan=True) + "\n"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)
