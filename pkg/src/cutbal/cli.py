"""Command-line front end.

Exit codes: 0 success, 1 operational error (I/O, schema, blow-up), 2 theory
violation.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import catalog
from .balance import condition_profile, cut_report, verify_cut_balance
from .report import analyze
from .scenario import load_scenario, save_scenario
from .suites import SUITES, run_suite

OK, OPERATIONAL, VIOLATION = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # usage errors are operational, so they must not collide with exit code 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(OPERATIONAL, f"{self.prog}: error: {message}\n")


def _positive_float(text: str) -> float:
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cutbal", description="Cut-balanced consensus dynamics.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="integrate a scenario and write trajectory, S_m, graph and report")
    run.add_argument("--config", required=True, help="scenario JSON file or a catalogue name")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--k", type=float, help="cut-balance constant for S_m (default: sampled maximum)")
    run.add_argument("--stride", type=int, help="override the sampling stride")
    run.add_argument("--tol", type=_positive_float, help="override the integrator tolerance")
    run.add_argument("--seed", type=_nonneg_int, help="override the scenario seed")

    check = sub.add_parser("check", help="cut-balance report for one coefficient matrix")
    check.add_argument("--config", required=True, help="matrix file: JSON nested list or whitespace rows")
    check.add_argument("--k", type=float, help="verify at this K instead of computing the minimum")

    suite = sub.add_parser("suite", help="run a seeded property suite")
    suite.add_argument("name", choices=SUITES)
    suite.add_argument("--trials", type=_nonneg_int)
    suite.add_argument("--seed", type=_nonneg_int, default=0)

    cat = sub.add_parser("catalog", help="list built-in scenarios or print one as JSON")
    cat.add_argument("name", nargs="?")
    return p


def _load_config(ref: str):
    path = Path(ref)
    if path.is_file():
        return load_scenario(path.read_text(encoding="utf-8"))
    if ref in catalog.CATALOG:
        return catalog.get(ref).scenario()
    raise FileNotFoundError(f"no such file or catalogue scenario: {ref}")


def cmd_run(args, out=None) -> int:
    out = out or sys.stdout
    sc = _load_config(args.config)
    changes = {}
    if args.stride is not None:
        changes["stride"] = args.stride
    if args.seed is not None:
        changes["seed"] = args.seed
    if changes:
        sc = sc.with_(**changes)
    if args.k is not None and not (args.k >= 1 and math.isfinite(args.k)):
        raise ValueError("--k must be finite and >= 1")
    result = analyze(sc, K=args.k, tol=args.tol)
    dest = Path(args.out)
    result.write(dest)
    (dest / "scenario.json").write_text(save_scenario(sc))
    out.write(result.summary())
    return VIOLATION if result.theory_violation else OK


def _read_matrix(path: Path) -> np.ndarray:
    text = path.read_text(encoding="utf-8")
    try:
        a = np.array(json.loads(text), dtype=float)
    except (json.JSONDecodeError, ValueError, TypeError):
        rows = [line.split() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
        a = np.array(rows, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.size == 0:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    if np.any(a < 0):
        i, j = np.argwhere(a < 0)[0]
        raise ValueError(f"negative coefficient a_{i + 1}{j + 1} = {a[i, j]}")
    return a


def _subset(mask: int, n: int) -> str:
    return "{" + ",".join(str(i + 1) for i in range(n) if mask >> i & 1) + "}"


def cmd_check(args, out=None) -> int:
    out = out or sys.stdout
    a = _read_matrix(Path(args.config))
    n = a.shape[0]
    rep = cut_report(a)
    if rep.feasible:
        out.write(f"minimal K = {rep.minimal_K:.15g}\n")
    else:
        out.write(f"infeasible: cut {_subset(rep.violating_cut, n)} carries flow one way only\n")
    prof = condition_profile(a)
    out.write(f"symmetric: {prof.symmetric}\n")
    out.write(f"type-symmetric K: {prof.type_symmetric_K}\n")
    out.write(f"average preserving: {prof.average_preserving}\n")
    w = prof.preserving_weights
    out.write("preserving weights: " + ("none" if w is None else " ".join(f"{v:.6g}" for v in w)) + "\n")
    out.write(f"cuts checked: {len(rep.masks)}\n")
    if args.k is not None:
        if not (args.k >= 1 and math.isfinite(args.k)):
            raise ValueError("--k must be finite and >= 1")
        ok, r = verify_cut_balance(a, args.k)
        if ok:
            out.write(f"balanced at K = {args.k:g}\n")
            return OK
        out.write(f"not balanced at K = {args.k:g}: cut {_subset(r.violating_cut, n)}\n")
        return VIOLATION
    return OK if rep.feasible else VIOLATION


def cmd_suite(args, out=None) -> int:
    out = out or sys.stdout
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = run_suite(args.name, args.trials, args.seed)
    out.write("\n".join(result.lines()) + "\n")
    return OK if result.passed else VIOLATION


def cmd_catalog(args, out=None) -> int:
    out = out or sys.stdout
    if args.name:
        out.write(save_scenario(catalog.get(args.name).scenario()))
        return OK
    width = max(len(k) for k in catalog.CATALOG)
    for name, entry in catalog.CATALOG.items():
        out.write(f"{name:<{width}}  {entry.description}\n")
    return OK


COMMANDS = {"run": cmd_run, "check": cmd_check, "suite": cmd_suite, "catalog": cmd_catalog}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except KeyboardInterrupt:
        return OPERATIONAL
    except Exception as exc:  # the exit-code contract forbids tracebacks
        print(f"cutbal: error: {exc}", file=sys.stderr)
        return OPERATIONAL


if __name__ == "__main__":
    sys.exit(main())
