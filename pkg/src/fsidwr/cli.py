"""Command-line entry point: ``fsidwr run <config> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .driver import RunConfig, run_adaptive
from .fsi_model import NewtonError


def build_parser():
    p = argparse.ArgumentParser(prog="fsidwr", description="Adaptive FSI solver with PU-DWR error control")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the adaptive loop for a config file or preset (fsi1, flow2d1)")
    r.add_argument("config")
    r.add_argument("--max-loops", type=int)
    r.add_argument("--tol", type=float)
    r.add_argument("--alpha", type=float)
    r.add_argument("--output")
    r.add_argument("--marking", choices=("pu-threshold", "dof-fraction"))
    r.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = RunConfig.from_file(args.config)
    overrides = {k: v for k, v in (("max_loops", args.max_loops), ("tol", args.tol),
                                   ("alpha", args.alpha), ("output", args.output),
                                   ("marking", args.marking)) if v is not None}
    cfg = replace(cfg, **overrides)
    try:
        run_adaptive(cfg)
    except NewtonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
