"""Command-line batch driver.

    geoweb check|construct|envelope CONFIG [--report PATH] [--csv PATH] [--seed N] [--tolerance X]
    geoweb corpus list
    geoweb corpus run NAME [same flags]

Exit codes: 0 all enabled checks passed, 1 some check failed, 2 the config
could not be loaded, 3 evaluation or I/O failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .jobs import (SECTIONS, ConfigError, corpus_config, emit_grid, grid_paths, list_corpus,
                   load_config, report_json, run)

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--report", metavar="PATH", help="write the JSON report here (default: stdout)")
    p.add_argument("--csv", metavar="PATH", help="write a sample grid of f and Flex per function")
    p.add_argument("--seed", type=int, metavar="N", help="override the sample plan seed")
    p.add_argument("--tolerance", type=float, metavar="X", help="override the residual tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geoweb",
                                     description="Check and construct geodesic webs of "
                                                 "hypersurfaces.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("check", "residual checks for the web functions"),
                       ("construct", "solve the Euler-type specs and verify them"),
                       ("envelope", "envelopes of the plane families")):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="job config (JSON)")
        _add_run_flags(p)
    corpus = sub.add_parser("corpus", help="bundled example jobs")
    csub = corpus.add_subparsers(dest="corpus_command", required=True)
    csub.add_parser("list", help="list bundled jobs")
    prun = csub.add_parser("run", help="run a bundled job (all sections)")
    prun.add_argument("name")
    _add_run_flags(prun)
    return parser


def _read_config(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def _apply_overrides(data: dict, args) -> dict:
    data = json.loads(json.dumps(data))
    if args.seed is not None:
        data.setdefault("sample_plan", {})["seed"] = args.seed
    if args.tolerance is not None:
        data.setdefault("tolerances", {})["residual"] = args.tolerance
    return data


def _execute(data: dict, sections, args) -> int:
    try:
        cfg = load_config(_apply_overrides(data, args))
    except ConfigError as exc:
        print(f"geoweb: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report_path = args.report or cfg.outputs.get("report")
    csv_path = args.csv or cfg.outputs.get("csv")
    try:
        report = run(cfg, sections)
        text = report_json(report)
        if csv_path:
            if not cfg.functions:
                print("geoweb: no web functions; CSV grid skipped", file=sys.stderr)
            for w, path in grid_paths(cfg, csv_path):
                emit_grid(w.expr, cfg.plan, path)
        if report_path:
            Path(report_path).write_text(text, encoding="utf-8")
            verdict = "PASS" if report["passed"] else "FAIL"
            print(f"{cfg.name}: {verdict} ({report['checks_run']} checks) -> {report_path}")
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"geoweb: I/O error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001  exit-code contract: anything else is a runtime failure
        print(f"geoweb: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_PASS if report["passed"] else EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "corpus":
        if args.corpus_command == "list":
            for name, description in list_corpus():
                print(f"{name:28s} {description}")
            return EXIT_PASS
        try:
            data = corpus_config(args.name)
        except ConfigError as exc:
            print(f"geoweb: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        return _execute(data, SECTIONS, args)
    try:
        data = _read_config(args.config)
    except ConfigError as exc:
        print(f"geoweb: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return _execute(data, (args.command,), args)


if __name__ == "__main__":
    sys.exit(main())
