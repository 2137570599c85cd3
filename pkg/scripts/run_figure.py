#!/usr/bin/env python3
"""Drive the full experiment behind one figure from the shipped configs.

Examples:
    python scripts/run_figure.py gap --out out/gap --workers 2
    python scripts/run_figure.py efficiency --out out/eff --resume
Render afterwards with the companion plots package, e.g.
    sykbattery-plot --in out/gap --out gap.png --kind gap
"""

import argparse
import os
import sys

from sykbattery.cli import main as cli_main

HERE = os.path.dirname(os.path.abspath(__file__))
CONFIGS = os.path.join(os.path.dirname(HERE), "configs")

FIGURES = {
    "gap": [("gap-ratio", "gap_ratio_N6.cfg"),
            ("gap-ratio", "gap_ratio_N8.cfg"),
            ("gap-ratio", "gap_ratio_N10.cfg")],
    "sff": [("sff", "sff_N8.cfg")],
    "energy": [("charge", "charge_N8.cfg")],
    "population": [("charge", "population_N10.cfg")],
    "efficiency": [("efficiency", "efficiency_N6.cfg"),
                   ("efficiency", "efficiency_N8.cfg"),
                   ("efficiency", "efficiency_N10.cfg")],
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("figure", choices=sorted(FIGURES))
    parser.add_argument("--out", default=None, help="output directory "
                        "(default out/<figure>)")
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--resume", action="store_true")
    args = parser.parse_args()

    out_dir = args.out or os.path.join("out", args.figure)
    for command, config in FIGURES[args.figure]:
        argv = [command, "--config", os.path.join(CONFIGS, config),
                "--out", out_dir]
        if args.workers is not None:
            argv += ["--workers", str(args.workers)]
        if args.seed is not None:
            argv += ["--seed", str(args.seed)]
        if args.resume:
            argv.append("--resume")
        print(f"+ sykbattery {' '.join(argv)}", flush=True)
        code = cli_main(argv)
        if code not in (0, 3):
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
