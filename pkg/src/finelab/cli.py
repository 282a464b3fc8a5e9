"""
Command line interface.

    finelab certify scenarios/example1.scenario --out run1
    finelab hm-study my.scenario --samples 100000 --seed 7 -v
    finelab selftest

Exit codes: 0 pass, 1 check failed, 2 input error, 3 numerical-reliability flag.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from typing import Callable, List, Optional, Sequence, Tuple

from .config import TOLERANCE_PROFILES, WoSConfig
from .errors import FineLabError
from .geometry import CircArc, Disk
from .harmonic import SlitDomain, hm_disk_arc_exact, hm_wos, propagation_bound, two_constant_bound
from .scenario import EXIT_FAILED, EXIT_INPUT, EXIT_PASS, PIPELINES, run_scenario_file
from .walk import ArcTarget

logger = logging.getLogger("finelab")


def _selftest_checks() -> List[Tuple[str, Callable[[], bool]]]:
    disk = Disk(0j, 1.0)

    def exact_center() -> bool:
        arc = CircArc(0j, 1.0, 0.0, 5.0 * math.pi / 6.0)
        return abs(hm_disk_arc_exact(disk, arc, 0j) - 5.0 / 12.0) < 1e-14

    def half_circle_walk() -> bool:
        est = hm_wos(SlitDomain(disk), ArcTarget(CircArc(0j, 1.0, 0.0, math.pi)), 0j, WoSConfig(samples=4000, seed=1))
        return abs(est.value - 0.5) <= 3.0 * est.std_error + 1e-12

    def closed_forms() -> bool:
        two = two_constant_bound(math.exp(-8), math.e, 0.25)
        return math.isclose(two, -1.25, abs_tol=1e-12) and math.isclose(propagation_bound(100.0, 0.25), -25.0)

    return [("exact disk measure", exact_center), ("walk on spheres", half_circle_walk), ("closed forms", closed_forms)]


def run_selftest() -> int:
    failed = 0
    for name, check in _selftest_checks():
        try:
            ok = check()
        except FineLabError as exc:
            logger.error("selftest %s raised %s", name, exc)
            ok = False
        print(f"{'ok  ' if ok else 'FAIL'} {name}")
        failed += not ok
    return EXIT_PASS if not failed else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="finelab", description="Certificates for fine analytic continuation")
    verbose = {"action": "count", "help": "-v for INFO, -vv for DEBUG"}
    parser.add_argument("-v", "--verbose", default=0, **verbose)
    # Accepted after the subcommand too; SUPPRESS keeps a flag given before it.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", default=argparse.SUPPRESS, **verbose)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in PIPELINES:
        run = sub.add_parser(name, parents=[common], help=f"run the {name} pipeline of a scenario file")
        run.add_argument("scenario", help="scenario file (TOML)")
        run.add_argument("--out", help="output directory (default: <label>-<pipeline>)")
        run.add_argument("--samples", type=int, help="walks per estimate")
        run.add_argument("--seed", type=int, help="64-bit walk seed")
        run.add_argument("--resolution", type=int, help="grid resolution")
        run.add_argument("--tolerance-profile", choices=sorted(TOLERANCE_PROFILES), help="tolerance profile")
    sub.add_parser("selftest", parents=[common], help="quick closed-form and Monte Carlo checks")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_PASS
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "selftest":
        return run_selftest()
    result = run_scenario_file(
        args.scenario,
        args.out,
        pipeline=args.command,
        profile=args.tolerance_profile,
        samples=args.samples,
        seed=args.seed,
        resolution=args.resolution,
    )
    print(f"{args.command}: {result.message or result.verdict}")
    for path in result.artifacts:
        print(f"  wrote {path}")
    return result.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
