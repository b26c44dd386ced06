"""Write data files and gnuplot scripts for all four figure sets."""
import argparse
import sys

from pulseforge.cli import FIGURES, main


def run(outdir: str, tmax: float, dt: float) -> int:
    worst = 0
    for fig in sorted(FIGURES):
        code = main(["reproduce", fig, "--outdir", outdir, "--tmax", str(tmax), "--dt", str(dt)])
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--outdir", default="figures")
    ap.add_argument("--tmax", type=float, default=6.0)
    ap.add_argument("--dt", type=float, default=1e-3)
    args = ap.parse_args()
    sys.exit(run(args.outdir, args.tmax, args.dt))
