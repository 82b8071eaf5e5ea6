"""Command-line harness: run named experiments and emit CSV tables."""

from __future__ import annotations

import argparse
import sys

from .experiments import EXPERIMENT_NAMES, parse_config
from .harness import run, summarize


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="splitfem",
        description="Solve a family of convection-diffusion problems with one "
                    "shared factorization and report the paper-style tables as CSV.",
    )
    p.add_argument("--experiment", required=True, choices=EXPERIMENT_NAMES)
    p.add_argument("--config", help="flat key=value settings file")
    p.add_argument("--h", type=float, help="mesh size (omit for the default sweep)")
    p.add_argument("--nx", type=int, help="cells along x (2-D)")
    p.add_argument("--ny", type=int, help="cells along y (2-D)")
    p.add_argument("--degree", type=int, choices=(1, 2))
    p.add_argument("--eps", type=float, help="perturbation amplitude")
    p.add_argument("--delta", type=float, help="diffusion constant of the 2-D wind problem")
    p.add_argument("--samples", type=int, help="number of problems J / n_s")
    p.add_argument("--centers", type=int, help="number of groups n_c")
    p.add_argument("--tol", type=float, help="stopping tolerance (default 1e-4)")
    p.add_argument("--max-iter", type=int, help="iteration cap (default 100)")
    p.add_argument("--iters", type=int, help="fixed iteration count for order studies")
    p.add_argument("--a0", help="shared coefficient strategy: mean, max, or value:<v>")
    p.add_argument("--seed", type=int, help="random draw seed")
    p.add_argument("--out", default=None, help="directory for CSV tables")
    p.add_argument("--compare-individual", action="store_true",
                   help="also factor and solve every sample separately")
    return p


def _overrides_from_args(args) -> dict:
    overrides = {}
    if args.config:
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
        name = cfg.pop("name", None)
        if name is not None and name != args.experiment:
            raise ValueError(
                f"config names experiment {name!r} but --experiment is {args.experiment!r}")
        overrides.update(cfg)
    for key in ("h", "nx", "ny", "degree", "eps", "delta", "samples", "centers",
                "tol", "iters", "a0", "seed"):
        val = getattr(args, key)
        if val is not None:
            overrides[key] = val
    if args.max_iter is not None:
        overrides["max_iter"] = args.max_iter
    if args.compare_individual:
        overrides["compare_individual"] = True
    return overrides


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = _overrides_from_args(args)
        report = run(args.experiment, overrides, out_dir=args.out)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(summarize(report))
    return 0


if __name__ == "__main__":
    sys.exit(main())
