"""Command-line entry point: gen-data, plan, run, select, report.

Exit status: 0 on success (individual failed sets included), 1 on I/O or
dataset validation failure, 2 on invalid flags, spec or policy.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from .core import load_spec, selection_to_dict, validate_selection
from .errors import GenError, SpecError, TradeoffForgeError
from .trademap import build_table, select

SEED_ENV = "TRADEOFF_FORGE_SEED"
POLICY_FILE = "policy.json"


class _Exit(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _seed(flag):
    env = os.environ.get(SEED_ENV)
    if env is not None and env != "":
        try:
            return int(env)
        except ValueError:
            raise _Exit(2, f"{SEED_ENV} must be an integer, got {env!r}") from None
    return flag


def _load_spec(path):
    try:
        return load_spec(path)
    except FileNotFoundError:
        raise _Exit(1, f"spec file not found: {path}") from None
    except SpecError as exc:
        raise _Exit(2, f"invalid spec: {exc}") from None


def cmd_gen_data(args):
    from .data import write_csv
    from .synthgen import GenConfig, generate

    config = GenConfig(n_rows=args.rows, positive_rate=args.positive_rate,
                       disparity_strength=args.disparity, seed=_seed(args.seed))
    try:
        dataset = generate(config)
    except GenError as exc:
        raise _Exit(2, str(exc)) from None
    try:
        write_csv(dataset, args.out, sidecar={"generator": config.to_dict()})
    except OSError as exc:
        raise _Exit(1, f"cannot write {args.out}: {exc}") from None
    print(f"wrote {len(dataset)} rows to {args.out}")


def cmd_plan(args):
    from .setform import enumerate_sets, render_plan

    spec = _load_spec(args.spec)
    rules = () if args.no_rules else None
    sets = enumerate_sets(spec, rules)
    sys.stdout.write(render_plan(spec, sets, args.format))


def cmd_run(args):
    from .data import read_csv
    from .pipeline import execute_run

    spec = _load_spec(args.spec)
    seed = _seed(args.seed)
    if seed is not None:
        spec = dataclasses.replace(spec, seed=int(seed))
    if not Path(args.data).is_file():
        raise _Exit(1, f"data file not found: {args.data}")
    try:
        dataset = read_csv(args.data)
    except (OSError, ValueError) as exc:
        raise _Exit(1, f"cannot read {args.data}: {exc}") from None
    try:
        run = execute_run(spec, dataset, out=args.out, parallel=args.parallel)
    except SpecError as exc:
        raise _Exit(1, f"invalid input: {exc}") from None
    except OSError as exc:
        raise _Exit(1, f"cannot write artifacts: {exc}") from None
    failed = [r.set_id for r in run.records if not r.ok]
    if args.format == "json":
        print(json.dumps({"run_id": run.run_id, "directory": str(run.directory),
                          "sets": len(run.records), "failed": failed}, sort_keys=True))
    else:
        print(f"run {run.run_id}: {len(run.records)} sets, {len(failed)} failed")
        print(f"artifacts: {run.directory}")


def _load_run(path):
    from .pipeline import load_run

    try:
        return load_run(path)
    except FileNotFoundError as exc:
        raise _Exit(1, f"not a run directory: {path} ({exc.filename})") from None


def _policy_for(loaded):
    path = loaded.directory / POLICY_FILE
    if path.exists():
        return validate_selection(json.loads(path.read_text(encoding="utf-8")))
    return loaded.spec.selection


def _write_report(loaded, policy):
    from .report import render_report

    spec = dataclasses.replace(loaded.spec, selection=policy)
    selection = select(loaded.records, policy)
    text = render_report(selection, build_table(loaded.records), spec, loaded.metrics)
    (loaded.directory / "report.md").write_text(text, encoding="utf-8")
    return selection


def cmd_select(args):
    loaded = _load_run(args.run)
    try:
        raw = json.loads(Path(args.policy).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise _Exit(1, f"policy file not found: {args.policy}") from None
    except json.JSONDecodeError as exc:
        raise _Exit(2, f"invalid policy JSON: {exc}") from None
    try:
        policy = validate_selection(raw.get("selection", raw) if isinstance(raw, dict) else raw)
    except SpecError as exc:
        raise _Exit(2, f"invalid policy: {exc}") from None
    (loaded.directory / POLICY_FILE).write_text(
        json.dumps(selection_to_dict(policy), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    selection = _write_report(loaded, policy)
    if args.format == "json":
        print(json.dumps({"chosen": selection.chosen, "feasible": selection.feasible,
                          "binding": selection.binding}, sort_keys=True))
    elif selection.chosen is None:
        print("no set meets the thresholds; binding: " + ", ".join(selection.binding))
    else:
        rec = next(r for r in loaded.records if r.set_id == selection.chosen)
        print(f"chosen: Set {rec.set_id} (recall {rec.recall:.2f}, |CDD| {abs(rec.cdd):.2f}, "
              f"k-anonymous {'Yes' if rec.k_anon else 'No'}); feasible: {selection.feasible}")


def cmd_report(args):
    loaded = _load_run(args.run)
    _write_report(loaded, _policy_for(loaded))
    print(f"report: {loaded.directory / 'report.md'}")


def build_parser():
    parser = argparse.ArgumentParser(prog="tradeoff-forge",
                                     description="Legal-requirement trade-off mapping for ML models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic transaction dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--rows", type=int, default=10000)
    p.add_argument("--positive-rate", type=float, default=0.10)
    p.add_argument("--disparity", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("plan", help="enumerate the operationalization sets")
    p.add_argument("--spec", required=True)
    p.add_argument("--format", choices=("md", "csv", "json"), default="md")
    p.add_argument("--no-rules", action="store_true", help="ignore compatibility rules")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("run", help="train and evaluate every set")
    p.add_argument("--spec", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default="runs")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--format", choices=("md", "json"), default="md")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("select", help="apply a selection policy to a run")
    p.add_argument("--run", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--format", choices=("md", "json"), default="md")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("report", help="re-render report.md from run artifacts")
    p.add_argument("--run", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "parallel", 1) < 1:
        parser.error("--parallel must be ≥ 1")
    try:
        args.func(args)
    except _Exit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except TradeoffForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
