#!/usr/bin/env python3
"""
Command-line front end.

    python cli.py norm spaces/cfg_a.toml "1 -1"
    python cli.py norm spaces/cfg_a.toml vec.txt --width 1/1000000 --mode extended
    python cli.py check spaces/cfg_q.toml --suite lemma41 --n 2 --count 200
    python cli.py experiment spaces/cfg_q.toml prop43 --output-dir out
    python cli.py experiment spaces/cfg_a.toml --all
    python cli.py jtree-norm "(1 (3) (4))"

Reports go to stdout as JSON, logs and errors to stderr.
Exit codes: 0 pass, 1 check failure, 2 usage/parse/validation, 3 skipped.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_SKIPPED = 3


def _print_json(doc) -> None:
    sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _error(message: str) -> int:
    sys.stderr.write(f"error: {message}\n")
    return EXIT_USAGE


# ---------------- commands ----------------

def cmd_norm(args) -> int:
    from core.experiments import norm_report
    from core.space_file import load_space_file, load_vector

    defn = load_space_file(args.space_file)
    report = norm_report(defn, load_vector(args.vector), args.width, args.mode)
    _print_json(report)
    return EXIT_OK


def cmd_check(args) -> int:
    from core.checks import run_suite
    from core.space_file import load_space_file

    defn = load_space_file(args.space_file)
    cfg, space = defn.build()
    params = {k: v for k, v in (("n", args.n), ("j0", args.j0)) if v is not None}
    result = run_suite(args.suite, cfg, space, args.count, args.seed, **params)
    _print_json({"space_sha256": defn.digest(), **result.to_dict()})
    if result.status == "skipped":
        sys.stderr.write(f"skipped: {result.reason}\n")
        return EXIT_SKIPPED
    return EXIT_OK if result.status == "pass" else EXIT_FAIL


def cmd_experiment(args) -> int:
    from core.experiments import run_all, run_experiment
    from core.space_file import load_space_file

    defn = load_space_file(args.space_file)
    if args.all:
        reports = run_all(defn, args.output_dir)
        _print_json({"experiments": [{"experiment": r["experiment"], "files": r["files"]} for r in reports]})
        return EXIT_OK
    if not args.name:
        return _error("experiment: give a manifest name or --all")
    try:
        report = run_experiment(defn, args.name, args.output_dir)
    except KeyError:
        return _error(f"{args.space_file}: no experiment named {args.name!r}")
    _print_json({"experiment": report["experiment"], "files": report["files"]})
    return EXIT_OK


def cmd_jtree_norm(args) -> int:
    from core.experiments import jtree_report

    source = args.tree
    path = Path(source)
    try:
        if path.is_file():
            source = path.read_text(encoding="utf-8")
    except OSError:
        pass
    _print_json(jtree_report(source))
    return EXIT_OK


# ---------------- main ----------------

def build_parser() -> argparse.ArgumentParser:
    from core.checks import SUITES

    parser = argparse.ArgumentParser(prog="cli.py", description="Certified norms of mixed-Tsirelson spaces over a ground set")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norm", help="Norm enclosure of one vector")
    p.add_argument("space_file")
    p.add_argument("vector", help="vector file, or the vector itself (\"1 -1\", \"3:1/2\")")
    p.add_argument("--width", default=None, help="target enclosure width as p/q")
    p.add_argument("--mode", choices=("truncated", "extended"), default="truncated")
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("check", help="Run a randomized lemma suite")
    p.add_argument("space_file")
    p.add_argument("--suite", choices=SUITES, required=True)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=None, help="depth parameter of lemma41")
    p.add_argument("--j0", type=int, default=None, help="weight floor of lemma42")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("experiment", help="Run experiment manifests of a space file")
    p.add_argument("space_file")
    p.add_argument("name", nargs="?", default=None)
    p.add_argument("--all", action="store_true", help="run every manifest in file order")
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("jtree-norm", help="Tree norm of a finitely supported tree vector")
    p.add_argument("tree", help="tree file, or the tree itself (\"(1 (3) (4))\" or nested JSON)")
    p.set_defaults(func=cmd_jtree_norm)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        from dotenv import load_dotenv
        load_dotenv()
    except ImportError:
        pass

    from api.config_validator import validate_startup_config
    from api.logger import new_run_id, set_run_id
    from core.errors import EnumerationCapError, UnsupportedError

    validate_startup_config(exit_on_failure=True, exit_code=EXIT_USAGE)

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    set_run_id(new_run_id())
    try:
        return args.func(args)
    except (ValueError, UnsupportedError, EnumerationCapError) as e:
        return _error(str(e))


if __name__ == "__main__":
    sys.exit(main())
