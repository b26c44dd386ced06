"""Tune the gauss_cos pulse to a set of target gates and print the outcome."""
import argparse
import math
import time

from pulseforge.errors import ConstraintViolation
from pulseforge.rotation import tune_target_rotation

TARGETS = [(0.0, math.pi), (0.0, math.pi / 2), (0.3, math.pi / 2), (-0.2, math.pi), (0.99, math.pi)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nz", type=float, help="single target n_z sin(theta/2)")
    ap.add_argument("--theta", type=float, help="single target angle")
    args = ap.parse_args()
    targets = [(args.nz, args.theta)] if args.theta is not None else TARGETS
    print(f"{'nz sin(th/2)':>12} {'theta':>8} {'b':>12} {'tau_f':>9} {'infidelity':>11} {'spread':>9} {'sec':>5}")
    for nz, theta in targets:
        t0 = time.perf_counter()
        try:
            r = tune_target_rotation(nz or 0.0, theta)
        except ConstraintViolation as exc:
            print(f"{nz:12.4f} {theta:8.4f}  unreachable: {exc}")
            continue
        print(f"{nz:12.4f} {theta:8.4f} {r.b:12.6g} {r.tau_f:9.5f} {r.infidelity_to_target:11.2e} "
              f"{r.saturation_spread:9.2e} {time.perf_counter() - t0:5.2f}")


if __name__ == "__main__":
    main()
