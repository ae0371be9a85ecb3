"""Command-line entry point: ``visvol compute | sphere | report``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from pathlib import Path

from .config import ConfigError, parse_config
from .pipeline import run_pipeline, run_sphere, summarize_report, with_overrides

log = logging.getLogger("visvol")


def _module_tag(exc: BaseException) -> str:
    """Name of the innermost package module the exception passed through."""
    if isinstance(exc, ConfigError):
        return "config"
    tag = "visvol"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        name = frame.f_globals.get("__name__", "")
        if name.startswith("visvol.") and name != "visvol.cli":
            tag = name.split(".", 1)[1]
    return tag


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="visvol", description="Visibility volumes of convex planar polygons.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compute", help="run the full pipeline")
    c.add_argument("--config", required=True, type=Path)
    c.add_argument("--output-dir", type=Path)
    c.add_argument("--validate", action="store_true", help="recheck the volume against the segment oracle")
    c.add_argument("--seed", type=int)
    c.add_argument("--workers", type=int, help="threads for sphere and oracle evaluation")

    s = sub.add_parser("sphere", help="write one vertex's visibility sphere")
    s.add_argument("--config", required=True, type=Path)
    s.add_argument("--vertex-index", required=True, type=int)
    s.add_argument("--output-dir", type=Path)

    r = sub.add_parser("report", help="summarize a report.json")
    r.add_argument("--input", required=True, type=Path)
    return p


def _compute(args) -> int:
    cfg = parse_config(args.config)
    if args.workers is not None and args.workers < 1:
        raise ConfigError("workers: must be >= 1")
    cfg = with_overrides(cfg, seed=args.seed, workers=args.workers, validate=True if args.validate else None)
    report = run_pipeline(cfg, args.output_dir)
    out = args.output_dir or cfg.output_dir
    print(summarize_report(report))
    print(f"outputs written to {out}")
    return 0


def _sphere(args) -> int:
    cfg = parse_config(args.config)
    path = run_sphere(cfg, args.vertex_index, args.output_dir)
    print(path)
    return 0


def _report(args) -> int:
    if not args.input.is_file():
        raise FileNotFoundError(f"report not found: {args.input}")
    print(summarize_report(json.loads(args.input.read_text())))
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"compute": _compute, "sphere": _sphere, "report": _report}[args.command]
    try:
        return handler(args)
    except Exception as exc:  # report and exit nonzero
        if args.verbose:
            traceback.print_exc()
        print(f"visvol: error [{_module_tag(exc)}]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
