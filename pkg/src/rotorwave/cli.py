"""Command line: ``rotorwave run|validate|bench|export``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_JOBS = 3


def _load(args):
    from .config import config_from_dict, load_config

    cfg = load_config(args.config)
    if args.seed is not None or args.output is not None:
        doc = cfg.echo()
        if args.seed is not None:
            doc["seed"] = args.seed
        if args.output is not None:
            doc["output_dir"] = args.output
        cfg = config_from_dict(doc, args.config)
    return cfg


def _cmd_validate(args) -> int:
    cfg = _load(args)
    echo = cfg.echo()
    echo["planned_jobs"] = len(cfg.plan())
    print(json.dumps(echo, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_run(args, bench_only: bool = False) -> int:
    from .runner import run

    cfg = _load(args)
    if bench_only and cfg.experiment != "bench":
        print(f"error: {args.config} is a {cfg.experiment!r} config, not a bench config", file=sys.stderr)
        return EXIT_CONFIG
    manifest = run(cfg, jobs=args.jobs)
    for job in manifest.doc["jobs"]:
        line = f"job {job['index']:4d} {job['status']:6s} {job['seconds']:8.2f}s {json.dumps(job['key'])}"
        if job["summary"]:
            line += " " + json.dumps(job["summary"])
        print(line)
        if job["status"] != "ok":
            print("    " + job["error"].splitlines()[0], file=sys.stderr)
    print(f"manifest: {manifest.path}")
    return EXIT_OK if manifest.ok else EXIT_JOBS


def _cmd_export(args) -> int:
    from .persist import export_heatmap, read_field

    psi, t = read_field(args.field)
    export_heatmap(psi.to_position(), args.image, args.scale, t=t)
    print(f"wrote {args.image}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rotorwave", description="Wave packets scattering off rotating potentials.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run the experiment described by a config"),
                        ("validate", "check a config and print it with defaults resolved"),
                        ("bench", "run a bench config")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--output", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides the config)")
    p = sub.add_parser("export", help="convert a field snapshot to a 16-bit graymap")
    p.add_argument("field")
    p.add_argument("image")
    p.add_argument("--scale", choices=("linear", "log"), default="linear")
    return ap


def main(argv=None) -> int:
    from .config import ConfigError
    from .persist import FieldFormatError

    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "bench":
            return _cmd_run(args, bench_only=True)
        return _cmd_export(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FieldFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
