"""Self-convergence of the numerical propagator against the analytic solution."""
import argparse

import numpy as np

from pulseforge import ModelParams, PropagatorConfig, TimeGrid, compare, family_from_spec, synthesize


def study(spec: dict, steps, scheme: int):
    family = family_from_spec(spec)
    rows = []
    for step in steps:
        sol = synthesize(family, ModelParams(), TimeGrid.uniform(-6.0, 6.0, step))
        rep = compare(sol, PropagatorConfig(step=step, scheme=scheme, richardson=False), residual=False)
        rows.append((step, rep.max_distance, rep.max_infidelity))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--family", default="gauss_cos")
    ap.add_argument("--param", type=float, default=0.0, help="value of a or b")
    ap.add_argument("--scheme", type=int, choices=(2, 4), default=4)
    args = ap.parse_args()
    key = "a" if args.family in ("sinh_exp", "tanh", "arctan_trig") else "b"
    spec = {"family": args.family} if args.family == "cos" else {"family": args.family, key: args.param}
    steps = 0.2 / 2.0 ** np.arange(6)
    rows = study(spec, steps, args.scheme)
    print(f"{'step':>10} {'distance':>12} {'infidelity':>12} {'ratio':>7}")
    prev = None
    for step, dist, inf in rows:
        ratio = f"{prev / dist:7.2f}" if prev and dist > 0 else "      -"
        print(f"{step:10.5f} {dist:12.3e} {inf:12.3e} {ratio}")
        prev = dist


if __name__ == "__main__":
    main()
