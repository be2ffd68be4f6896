"""Command line: ``ragharness {gen,run,analyze,tools,validate,scripts}``.

Exit codes: 0 success, 1 validation error, 2 some pairs failed, 3 fatal.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .environment import tools_for
from .knowledge import Domain, KnowledgeError
from .runner import (
    ConfigError,
    RunConfig,
    cmd_analyze,
    cmd_gen,
    cmd_run,
    make_synthetic_scripts,
    validate,
)
from .taskgen import TaskGenError

EXIT_OK, EXIT_INVALID, EXIT_PARTIAL, EXIT_FATAL = 0, 1, 2, 3


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {
        "output_dir": getattr(args, "output_dir", None),
        "parallelism": getattr(args, "parallelism", None),
        "seed": getattr(args, "seed", None),
        "cache_dir": getattr(args, "cache_dir", None),
        "cases_per_task": getattr(args, "cases_per_task", None),
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    if getattr(args, "timing_mode", False):
        cfg.timing_mode = True
    return cfg


def _gen(args) -> int:
    manifest = cmd_gen(_config(args))
    for tid, info in manifest["tasks"].items():
        if "skipped" in info:
            print(f"{tid}: skipped ({info['skipped']})")
        else:
            print(f"{tid}: {info['dataset']} pool={info['pool']} test_set={info['test_set']}")
    return EXIT_OK


def _run(args) -> int:
    record = cmd_run(_config(args))
    print(
        f"run {record.run_id}: {record.completed} pairs run, {record.skipped} already done, "
        f"{record.failures} failed, {record.network_calls} network calls"
    )
    return EXIT_PARTIAL if record.failures else EXIT_OK


def _analyze(args) -> int:
    summary = cmd_analyze(args.runs, args.out, args.formats.split(","))
    if summary["no_results"]:
        print("no results")
    else:
        print(f"{summary['results']} results over {summary['systems']} systems -> {args.out}")
    return EXIT_OK


def _tools(args) -> int:
    known = [d.value for d in Domain]
    bad = [d for d in args.domains if d not in known]
    if bad:
        print(f"error: unknown domain(s) {', '.join(bad)}; choose from {', '.join(known)}", file=sys.stderr)
        return EXIT_INVALID
    for dom in args.domains or known:
        for spec in tools_for(dom):
            if args.json:
                print(json.dumps(spec.to_schema(), sort_keys=True))
            else:
                print(f"[{dom}] {spec.signature()}: {spec.description} Returns {spec.returns}")
    return EXIT_OK


def _validate(args) -> int:
    problems = validate(_config(args), for_run=args.run)
    for p in problems:
        print(f"error: {p}", file=sys.stderr)
    if not problems:
        print("config ok")
    return EXIT_INVALID if problems else EXIT_OK


def _scripts(args) -> int:
    paths = make_synthetic_scripts(_config(args), args.out)
    for wf, p in paths.items():
        print(f"{wf.value}: {p}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ragharness", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", "-c", help="run configuration (JSON or YAML)")
        return p

    p = with_config(sub.add_parser("gen", help="generate pools and test sets"))
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_gen)

    p = with_config(sub.add_parser("run", help="evaluate systems over the test sets"))
    p.add_argument("--output-dir")
    p.add_argument("--parallelism", type=int)
    p.add_argument("--cache-dir")
    p.add_argument("--cases-per-task", type=int)
    p.add_argument("--timing-mode", action="store_true", help="time each case; forces parallelism 1")
    p.set_defaults(func=_run)

    p = sub.add_parser("analyze", help="build reports from one or more runs")
    p.add_argument("runs", nargs="+", help="run output directories")
    p.add_argument("--out", required=True)
    p.add_argument("--formats", default="csv,json,svg")
    p.set_defaults(func=_analyze)

    p = sub.add_parser("tools", help="print the tool specifications")
    p.add_argument("domains", nargs="*", help="wiki, aminer (default both)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_tools)

    p = with_config(sub.add_parser("validate", help="check a configuration"))
    p.add_argument("--run", action="store_true", help="also check what a run needs (scripts, case files)")
    p.set_defaults(func=_validate)

    p = with_config(sub.add_parser("scripts", help="write synthetic oracle scripts for the configured cases"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=_scripts)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"error: {p}", file=sys.stderr)
        return EXIT_INVALID
    except (KnowledgeError, TaskGenError, OSError) as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
