"""Command-line entry point: ``ofs-chaoslab {spectrum,levelstats,ofs,oracle,all}``."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from . import __version__, pipeline
from .config import load_config

log = logging.getLogger("ofs_chaoslab")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _common(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("run configuration")
    g.add_argument("--config", metavar="PATH", help="key = value config file")
    g.add_argument("--profile", choices=["desk", "full"], help="preset (desk: K=60, full: K=120)")
    g.add_argument("--jobs", type=int, metavar="N", help="worker threads (0 = all cores)")
    g.add_argument("--out", dest="output_dir", metavar="DIR", help="output root (env OFS_CHAOSLAB_OUT)")
    g.add_argument("--K", type=int, help="truncation n + m <= K")
    g.add_argument("--K-prime", dest="K_prime", type=int, help="comparison truncation K' > K")
    g.add_argument("--lambda-min", dest="lambda_min", type=float)
    g.add_argument("--lambda-max", dest="lambda_max", type=float)
    g.add_argument("--lambda-count", dest="lambda_count", type=int)
    g.add_argument("--lambda-values", dest="lambda_values", metavar="LIST",
                   help="explicit comma-separated couplings (replaces the generated grid)")
    g.add_argument("--tol", type=str, help="convergence tolerance (float or 'inf')")
    g.add_argument("--dc-policy", dest="dc_policy", help="'auto' or a fixed number of levels")
    g.add_argument("--t", dest="t_list", metavar="LIST", help="evolution times, e.g. 100,200,400")
    g.add_argument("--temps", dest="temperature_list", metavar="LIST", help="temperatures, e.g. 1,4.5,inf")
    g.add_argument("--seed", type=int)
    g.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ofs-chaoslab",
        description="Operator fidelity susceptibility and level statistics of coupled 2D oscillators.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="diagonalize over the coupling grid; find the converged window")
    _common(p)
    p.add_argument("--store-vectors", dest="store_vectors", action="store_const", const="true",
                   help="also store eigenvectors at K (large)")

    p = sub.add_parser("levelstats", help="spacing histograms and KS distances at selected couplings")
    _common(p)
    p.add_argument("--lambdas", dest="levelstats_lambdas", metavar="LIST",
                   help="couplings to analyse (must be on the run grid)")
    p.add_argument("--bins", type=int)
    p.add_argument("--window", dest="unfold_window", type=int, help="unfolding window (spacings)")

    p = sub.add_parser("ofs", help="chi1/chi2 sweep, partial sums and figures")
    _common(p)

    p = sub.add_parser("oracle", help="finite-difference fidelity check of chi1 + chi2")
    _common(p)
    p.add_argument("--oracle-K", dest="oracle_K", metavar="LIST")
    p.add_argument("--delta-lambda", dest="oracle_delta_lambda", type=float)

    p = sub.add_parser("all", help="spectrum, levelstats, ofs and oracle in sequence")
    _common(p)
    return parser


_NON_CONFIG = {"command", "config", "profile", "verbose"}


def _report(name: str, res: pipeline.StepResult) -> bool:
    print(f"[{name}] run dir: {res.run_dir}")
    for key in ("D_c", "dim_K", "reused_files", "worst_extrapolated_mismatch"):
        if key in res.info:
            print(f"[{name}] {key} = {res.info[key]}")
    for lam, msg in res.failures:
        print(f"[{name}] FAILED lambda={lam!r}: {msg}", file=sys.stderr)
    print(f"[{name}] wrote {len(res.files)} files")
    return res.ok


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {k: v for k, v in vars(args).items() if k not in _NON_CONFIG and v is not None}
    try:
        cfg = load_config(args.profile, args.config, overrides)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    steps = {
        "spectrum": [("spectrum", pipeline.run_spectrum)],
        "levelstats": [("levelstats", pipeline.run_levelstats)],
        "ofs": [("ofs", pipeline.run_ofs)],
        "oracle": [("oracle", pipeline.run_oracle)],
    }
    steps["all"] = steps["spectrum"] + steps["levelstats"] + steps["ofs"] + steps["oracle"]
    ok = True
    for name, fn in steps[args.command]:
        try:
            ok &= _report(name, fn(cfg))
        except (pipeline.MissingSpectrumError, ValueError, OSError, RuntimeError) as exc:
            print(f"error [{name}]: {exc}", file=sys.stderr)
            return EXIT_FAIL
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
