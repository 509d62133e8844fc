"""Command-line interface.

Verbs: ``run`` (train plain/proj pairs over seeds), ``plots`` (emit SVG
charts from a run directory), ``validate`` (Monte Carlo heuristics report),
``compare`` (diff two exported histories).  ``MGPROJ_SEED`` overrides the
config seed list.

Exit codes: 0 success, 2 invalid configuration, 3 non-finite training,
4 missing plot inputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import load_config
from .errors import ConfigError, NonFinite
from .runner import emit_plots, export_datasets, run_experiment, validate_heuristics
from .training import RunHistory, compare_runs


def _seed_override(cfg: dict, flag_value: str | None) -> None:
    raw = flag_value if flag_value is not None else os.environ.get("MGPROJ_SEED")
    if raw is None:
        return
    try:
        seeds = [int(tok) for tok in str(raw).split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad seed list {raw!r}: {exc}") from exc
    if not seeds:
        raise ConfigError(f"empty seed list {raw!r}")
    cfg["seeds"] = seeds


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        _seed_override(cfg, args.seeds)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        cfg["out"] = args.out
    if args.dry_run:
        print(json.dumps(cfg, indent=1, sort_keys=True))
        return 0
    try:
        if cfg["task"] == "subspace-validation":
            out = validate_heuristics(cfg, cfg["out"])
        else:
            out = run_experiment(cfg, cfg["out"], threads=args.threads)
            export_datasets(cfg, out)
        print(f"wrote {out}")
        return 0
    except NonFinite as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return 3


def _cmd_plots(args) -> int:
    try:
        written = emit_plots(args.out)
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return 4
    print("\n".join(written))
    return 0


def _cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
        _seed_override(cfg, args.seeds)
        if cfg["task"] != "subspace-validation":
            raise ConfigError(f"validate needs a subspace-validation config, got {cfg['task']!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        cfg["out"] = args.out
    if args.dry_run:
        print(json.dumps(cfg, indent=1, sort_keys=True))
        return 0
    out = validate_heuristics(cfg, cfg["out"])
    with open(out / "heuristics_report.json") as fh:
        report = json.load(fh)
    print(f"wrote {out} (all_pass={report['all_pass']})")
    return 0


def _cmd_compare(args) -> int:
    try:
        a = RunHistory.from_json(args.history_a)
        b = RunHistory.from_json(args.history_b)
        report = compare_runs(a, b)
    except (OSError, ConfigError, KeyError, ValueError) as exc:
        print(f"compare error: {exc}", file=sys.stderr)
        return 2
    doc = report.to_dict()
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        print(f"wrote {args.out}")
    else:
        print(json.dumps(doc, indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mgproj", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="train plain/proj pairs for every seed")
    p_run.add_argument("--config", required=True, help="experiment config file")
    p_run.add_argument("--out", help="output directory (overrides config)")
    p_run.add_argument("--seeds", help="comma-separated seed list override")
    p_run.add_argument("--dry-run", action="store_true", help="validate and print the resolved config")
    p_run.add_argument("--threads", type=int, default=1, help="seeds trained in parallel")
    p_run.set_defaults(func=_cmd_run)

    p_plots = sub.add_parser("plots", help="emit SVG charts for a run directory")
    p_plots.add_argument("--out", required=True, help="run directory produced by `run`")
    p_plots.set_defaults(func=_cmd_plots)

    p_val = sub.add_parser("validate", help="Monte Carlo heuristics validation")
    p_val.add_argument("--config", required=True, help="subspace-validation config file")
    p_val.add_argument("--out", help="output directory (overrides config)")
    p_val.add_argument("--seeds", help="comma-separated seed list override")
    p_val.add_argument("--dry-run", action="store_true", help="validate and print the resolved config")
    p_val.set_defaults(func=_cmd_validate)

    p_cmp = sub.add_parser("compare", help="compare two exported history.json files")
    p_cmp.add_argument("history_a")
    p_cmp.add_argument("history_b")
    p_cmp.add_argument("--out", help="write the report JSON here instead of stdout")
    p_cmp.set_defaults(func=_cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
