"""Command line entry point: ``gwspine {norming,spine,verify,bursts,gw}``.

Exit codes: 0 success, 1 usage, 2 verification failure, 3 budget exceeded.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import fields

from . import experiment as ex
from .offspring import BudgetExceeded, LawSpecError
from .oracle import run_all
from .pgf import build_norming_table, ratio_diagnostics

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_BUDGET = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--law", default=None, help="e.g. geometric:p=0.5, dyadic:m=2, finite:0.5,0.5")
    common.add_argument("--law2", default=None, help="second law for comparisons")
    common.add_argument("--s", type=float, default=None)
    common.add_argument("--depth", type=int, default=None)
    common.add_argument("--horizon", type=int, default=None)
    common.add_argument("--cap", type=int, default=None)
    common.add_argument("--replicas", type=int, default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--a", type=float, default=None)
    common.add_argument("--b", type=float, default=None)
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--config", default=None, help="JSON file whose keys override flags")

    p = _Parser(prog="gwspine", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("norming", parents=[common], help="Seneta-Heyde norming table")
    sp = sub.add_parser("spine", parents=[common], help="spine trajectories and Hoelder estimates")
    sp.add_argument("--vertex", action="store_true", help="vertex-level trees under --cap")
    sub.add_parser("verify", parents=[common], help="exhaustive change-of-measure checks")
    bp = sub.add_parser("bursts", parents=[common], help="burst partial sums and Monte Carlo counts")
    bp.add_argument("--tail-from", type=int, default=None)
    sub.add_parser("gw", parents=[common], help="plain GW populations and martingales")
    return p


_DEFAULT_DEPTH = {"norming": 40, "spine": 30, "verify": 3, "bursts": 40, "gw": 10}


def config_from_args(args) -> ex.ExperimentConfig:
    values = {}
    names = {f.name for f in fields(ex.ExperimentConfig)}
    for name in names:
        v = getattr(args, name, None)
        if v is not None and v is not False:
            values[name] = v
    if args.config:
        try:
            with open(args.config) as fh:
                override = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config {args.config!r}: {e}") from None
        unknown = set(override) - names
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        values.update(override)
    values.setdefault("depth", _DEFAULT_DEPTH[args.command])
    if args.command == "verify":
        values.setdefault("law", "finite:0.5,0.5")
        values.setdefault("format", "json")
    if args.command == "bursts":
        values.setdefault("format", "json")
        if getattr(args, "tail_from", None) is not None:
            values.setdefault("extra", {})["tail_from"] = args.tail_from
    cfg = ex.ExperimentConfig(**values)
    try:
        cfg.validate()
    except (LawSpecError, ValueError) as e:
        raise UsageError(str(e)) from None
    return cfg


def _csv(columns, rows, cfg) -> str:
    buf = io.StringIO()
    buf.write(f"# gwspine {ex.__version__}\n")
    buf.write("# config: " + json.dumps(cfg.provenance()["config"], sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v) -> str:
    if isinstance(v, float):
        return "" if v != v else "%.17g" % v
    return str(v)


def cmd_norming(cfg, workers):
    law = cfg.offspring()
    table = build_norming_table(law, cfg.s, cfg.depth)
    rows = [
        (n, table.x[n], table.c[n], table.lnD[n], cr, dr)
        for n, cr, dr in ratio_diagnostics(table, pad=True)
    ]
    if cfg.format == "json":
        keys = ["n", "x", "c", "lnD", "c_ratio", "D_ratio"]
        return ex.dumps({**cfg.provenance(), "rows": [dict(zip(keys, map(_num, r))) for r in rows]}), EXIT_OK
    return _csv(["n", "x", "c", "lnD", "c_ratio", "D_ratio"], rows, cfg), EXIT_OK


def _num(v):
    v = float(v) if not isinstance(v, int) else v
    return None if isinstance(v, float) and v != v else v


def cmd_spine(cfg, workers):
    if cfg.horizon < 1 or cfg.horizon > cfg.depth:
        raise UsageError("need 1 <= horizon <= depth")
    parts = ex.map_blocks(ex.spine_block, cfg, workers)
    records = [r for part in parts for r in part]
    if cfg.format == "json":
        return ex.dumps({**cfg.provenance(), "summary": ex.spine_summary(cfg, records)}), EXIT_OK
    return _csv(ex.SPINE_COLUMNS, ex.spine_rows(records), cfg), EXIT_OK


def cmd_verify(cfg, workers):
    law = cfg.offspring()
    if law.max_support is None:
        raise UsageError(f"verify needs a finite-support law, got {law.spec}")
    table = build_norming_table(law, cfg.s, cfg.depth)
    reports = run_all(law, table, cfg.depth)
    code = EXIT_OK if all(r.passed for r in reports) else EXIT_VERIFY
    if cfg.format == "csv":
        rows = [(r.check, r.law, r.depth, r.max_abs_error, int(r.passed)) for r in reports]
        return _csv(["check", "law", "depth", "max_abs_error", "pass"], rows, cfg), code
    return ex.dumps({**cfg.provenance(), "checks": [r.as_dict() for r in reports]}), code


def cmd_bursts(cfg, workers):
    report = ex.burst_report(cfg, workers)
    if cfg.format == "csv":
        rows = [
            (d["family"], n, s)
            for d in report["laws"]
            for n, s in enumerate(d["partial_sums"])
        ]
        return _csv(["family", "n", "S_n"], rows, cfg), EXIT_OK
    return ex.dumps({**cfg.provenance(), **report}), EXIT_OK


def cmd_gw(cfg, workers):
    parts = ex.map_blocks(ex.gw_block, cfg, workers)
    if cfg.format == "json":
        import numpy as np

        z = np.concatenate(parts)
        return ex.dumps({**cfg.provenance(), "z": z.tolist()}), EXIT_OK
    return _csv(ex.GW_COLUMNS, ex.gw_rows(cfg, parts), cfg), EXIT_OK


COMMANDS = {
    "norming": cmd_norming,
    "spine": cmd_spine,
    "verify": cmd_verify,
    "bursts": cmd_bursts,
    "gw": cmd_gw,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        text, code = COMMANDS[args.command](cfg, args.workers)
    except (UsageError, ValueError) as e:
        print(f"gwspine: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceeded as e:
        print(f"gwspine: budget exceeded: {e}", file=sys.stderr)
        return EXIT_BUDGET
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
