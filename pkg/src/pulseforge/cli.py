"""Command-line entry point: ``pulseforge {list,synth,verify,wgen,rotate,reproduce}``.

Exit codes: 0 success, 2 bad specification, 3 constraint violation,
4 verification failure.  Grid flags (--tmin, --tmax, --dt) are physical times;
the pipeline works in tau = h t and output is converted back to t and J.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .core import ModelParams, TimeGrid
from .errors import ConstraintViolation, PulseForgeError, VerificationFailure, InvalidParameter
from .qfamilies import FAMILIES, family_from_spec, validity_domain
from .rotation import (TRACE_Z_BOUND, rotation_summary, tail_fit, total_evolution, tune_target_rotation,
                       xz_plane_checks)
from .synth import PulseSolution, synthesize
from .verify import compare
from .wgen import PRESETS, PSpec, build_table, evaluate, generated_family, validate_p

EXIT_OK, EXIT_SPEC, EXIT_CONSTRAINT, EXIT_VERIFY = 0, 2, 3, 4
CSV_HEADER = "t,J,q,qdot,F,K,sin2Phi,cos2Phi,Re_u11,Im_u11,Re_u21,Im_u21"
COMMANDS = ("list", "synth", "verify", "wgen", "rotate", "reproduce")

FIGURES = {
    "fig1": ("sinh_exp", "a", [0.0, 2 / 3, 5 / 3, -1.0, -0.25]),
    "fig2": ("gauss_cos", "b", [-0.25, 0.0, 0.5, 1.0, 2.0]),
    "fig3": ("tanh", "a", [2 * math.sqrt(2), 2.0, math.sqrt(2), 1.0, 1 / math.sqrt(2), 0.6, 0.5, 0.4, 0.3]),
    "fig4": ("arctan_trig", "a", [0.1, 0.5]),
}


@dataclass
class JobSpec:
    """Everything one invocation needs; round-trips through JSON."""

    command: str = "synth"
    family: dict | None = None
    h: float = 1.0
    tau_min: float = -6.0
    tau_max: float = 6.0
    dtau: float = 1e-3
    n: int | None = None
    output: str | None = None
    tol_verify: float = 1e-8
    mode: str = "literal"
    profile: dict | None = None
    target_nz: float | None = None
    theta: float | None = None
    tau_f: float = 5.0
    figure: str | None = None
    outdir: str = "figures"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidParameter(f"unknown command {self.command!r}")
        if not self.h > 0:
            raise InvalidParameter(f"h must be > 0 (got {self.h})")

    def params(self) -> ModelParams:
        return ModelParams(tol_verify=self.tol_verify, mode=self.mode)

    def grid(self) -> TimeGrid:
        if self.n is not None:
            if self.n < 2:
                raise InvalidParameter("n must be >= 2")
            return TimeGrid(np.linspace(self.tau_min, self.tau_max, self.n))
        if not self.dtau > 0:
            raise InvalidParameter("dt must be > 0")
        return TimeGrid.uniform(self.tau_min, self.tau_max, self.dtau)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "JobSpec":
        data = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidParameter(f"unknown JobSpec keys {sorted(unknown)}")
        return cls(**data)


# ---------------------------------------------------------------------------
# output helpers


def atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def solution_table(sol: PulseSolution, h: float) -> np.ndarray:
    """Columns of CSV_HEADER in physical units."""
    fr = sol.frames
    s = sol.family.sample(fr.tau)
    return np.column_stack([fr.tau / h, h * fr.Jh, s.q, h * s.q1, fr.F, fr.K, fr.s2phi, fr.c2phi,
                            sol.u11.real, sol.u11.imag, sol.u21.real, sol.u21.imag])


def format_csv(header: str, table: np.ndarray) -> str:
    lines = [header]
    lines.extend(",".join("%.17g" % v for v in row) for row in table)
    return "\n".join(lines) + "\n"


def _emit(text: str, output: str | None) -> None:
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        atomic_write(output, text)


# ---------------------------------------------------------------------------
# commands


def cmd_list(spec: JobSpec) -> int:
    out = ["families:"]
    for name, (_, names) in FAMILIES.items():
        out.append(f"  {name}" + (f"  params: {', '.join(names)}" if names else ""))
    out.append("profiles (wgen):")
    for name in list(PRESETS) + ["polynomial"]:
        out.append(f"  {name}")
    out.append("figures: " + ", ".join(FIGURES))
    _emit("\n".join(out) + "\n", spec.output)
    return EXIT_OK


def _require_family(spec: JobSpec):
    if not spec.family:
        raise InvalidParameter("no family given (use --family NAME with its parameters)")
    return family_from_spec(spec.family)


def cmd_synth(spec: JobSpec) -> int:
    sol = synthesize(_require_family(spec), spec.params(), spec.grid())
    _emit(format_csv(CSV_HEADER, solution_table(sol, spec.h)), spec.output)
    return EXIT_OK


def cmd_verify(spec: JobSpec) -> int:
    sol = synthesize(_require_family(spec), spec.params(), spec.grid())
    report = compare(sol)
    _emit(report.to_json(indent=2) + "\n", spec.output)
    if not report.passed(spec.tol_verify):
        print(f"verification failed: max infidelity {report.max_infidelity:.3e} >= {spec.tol_verify:.1e}",
              file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_wgen(spec: JobSpec) -> int:
    if not spec.profile:
        raise InvalidParameter("no profile given (use --profile NAME)")
    p = PSpec.from_dict(spec.profile)
    check = validate_p(p)
    if not check.passed:
        raise ConstraintViolation("profile rejected: " + "; ".join(check.messages))
    if spec.extra.get("synth"):
        sol = synthesize(generated_family(p), spec.params(), spec.grid())
        _emit(format_csv(CSV_HEADER, solution_table(sol, spec.h)), spec.output)
        return EXIT_OK
    table = build_table(p)
    tau = spec.grid().tau
    q, q1, _, _ = evaluate(table, tau)
    data = np.column_stack([tau / spec.h, q, spec.h * q1])
    _emit(format_csv("t,q,qdot", data), spec.output)
    return EXIT_OK


def cmd_rotate(spec: JobSpec) -> int:
    if spec.theta is not None:
        result = tune_target_rotation(spec.target_nz or 0.0, spec.theta, spec.params())
        _emit(result.to_json(indent=2) + "\n", spec.output)
        return EXIT_OK
    family = _require_family(spec)
    tf = spec.tau_f
    sol = synthesize(family, spec.params(), TimeGrid.uniform(-tf, tf, min(spec.dtau, tf / 10)))
    U = total_evolution(sol, tf)
    rot = rotation_summary(U)
    xz = xz_plane_checks(U, sol, tf)
    out = {"tau_f": tf, "axis": rot.axis, "angle": rot.angle,
           "u11": [U.u11.real, U.u11.imag], "u21": [U.u21.real, U.u21.imag],
           "trace_y": xz.trace_y, "trace_z": xz.trace_z, "sin2Phi_tf": xz.s2phi,
           "trace_z_bound": TRACE_Z_BOUND * xz.s2phi}
    try:
        fit = tail_fit(family, (tf, tf + 3))
        out["tail"] = {"A": fit.A, "B": fit.B, "residual": fit.residual}
    except ConstraintViolation as exc:
        out["tail"] = {"error": str(exc)}
    _emit(json.dumps(out, indent=2) + "\n", spec.output)
    return EXIT_OK


def _admissible_span(family, lo: float, hi: float, step: float) -> tuple[float, float]:
    """Largest span around 0 inside [lo, hi] where the pipeline is defined."""
    report = validity_domain(family, TimeGrid.uniform(lo, hi, step * 10))
    span = report.interval_containing(0.0)
    if span is None:
        return 0.0, 0.0
    a, b = span
    ts = np.arange(0.0, max(abs(a), abs(b)) + step, step)
    for sgn in (1, -1):
        s = family.sample(sgn * ts)
        dead = np.nonzero(np.abs(s.z) < 1e-140)[0]
        if dead.size:
            edge = ts[max(dead[0] - 1, 0)]
            a, b = (a, min(b, edge)) if sgn > 0 else (max(a, -edge), b)
    return float(math.ceil(a / step) * step), float(math.floor(b / step) * step)


def _curve_name(family: str, key: str, value: float) -> str:
    return f"{family}_{key}={value:.6g}".replace("/", "_")


def _reproduce_curve(job):
    family_name, key, value, spec_dict, outdir = job
    spec = JobSpec(**spec_dict)
    name = _curve_name(family_name, key, value)
    family = family_from_spec({"family": family_name, key: value})
    try:
        lo, hi = _admissible_span(family, spec.tau_min, spec.tau_max, spec.dtau)
        if hi - lo < 10 * spec.dtau:
            raise ConstraintViolation("admissible interval around t = 0 is empty")
        sol = synthesize(family, spec.params(), TimeGrid.uniform(lo, hi, spec.dtau))
    except PulseForgeError as exc:
        return {"curve": name, "status": "failed", "error": f"{type(exc).__name__}: {exc}"}
    path = os.path.join(outdir, name + ".csv")
    atomic_write(path, format_csv(CSV_HEADER, solution_table(sol, spec.h)))
    clipped = lo > spec.tau_min + 1e-12 or hi < spec.tau_max - 1e-12
    return {"curve": name, "status": "clipped" if clipped else "ok", "file": os.path.basename(path),
            "t_range": [lo / spec.h, hi / spec.h], key: value}


def gnuplot_script(figure: str, results: list[dict]) -> str:
    ok = [r for r in results if r["status"] != "failed"]
    lines = ["set datafile separator ','", "set key outside", "set xlabel 't'",
             "set terminal pngcairo size 900,600", f"set output '{figure}_J.png'", "set ylabel 'J'"]
    plots = [f"'{r['file']}' using 1:2 with lines title '{r['curve']}'" for r in ok]
    if plots:
        lines.append("plot " + ", \\\n     ".join(plots))
    lines += [f"set output '{figure}_U.png'", "set ylabel 'U components'"]
    comps = []
    for r in ok:
        for col, lab in ((9, "Re u11"), (10, "Im u11"), (11, "Re u21"), (12, "Im u21")):
            comps.append(f"'{r['file']}' using 1:{col} with lines title '{r['curve']} {lab}'")
    if comps:
        lines.append("plot " + ", \\\n     ".join(comps))
    return "\n".join(lines) + "\n"


def worker_count(n_jobs: int) -> int:
    env = os.environ.get("PULSEFORGE_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise InvalidParameter(f"PULSEFORGE_THREADS must be an integer (got {env!r})")
    return max(1, min(cap, n_jobs))


def cmd_reproduce(spec: JobSpec) -> int:
    if spec.figure not in FIGURES:
        raise InvalidParameter(f"unknown figure {spec.figure!r}; choose from {sorted(FIGURES)}")
    family_name, key, values = FIGURES[spec.figure]
    outdir = os.path.join(spec.outdir, spec.figure)
    base = asdict(spec)
    jobs = [(family_name, key, v, base, outdir) for v in values]
    workers = worker_count(len(jobs))
    if workers == 1:
        results = [_reproduce_curve(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_reproduce_curve, jobs))
    atomic_write(os.path.join(outdir, f"{spec.figure}.gp"), gnuplot_script(spec.figure, results))
    atomic_write(os.path.join(outdir, "manifest.json"), json.dumps(results, indent=2) + "\n")
    for r in results:
        msg = f"{r['curve']}: {r['status']}"
        if r["status"] == "clipped":
            msg += f" to t in [{r['t_range'][0]:.6g}, {r['t_range'][1]:.6g}]"
        if r["status"] == "failed":
            msg += f" ({r['error']})"
        print(msg, file=sys.stderr)
    return EXIT_OK


HANDLERS = {"list": cmd_list, "synth": cmd_synth, "verify": cmd_verify, "wgen": cmd_wgen,
            "rotate": cmd_rotate, "reproduce": cmd_reproduce}


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JobSpec JSON file; flags given explicitly override it")
    common.add_argument("--family", choices=sorted(FAMILIES))
    common.add_argument("--a", type=float)
    common.add_argument("--b", type=float)
    common.add_argument("--h", type=float, help="physical splitting (default 1)")
    common.add_argument("--tmin", type=float, help="start time (default -tmax)")
    common.add_argument("--tmax", type=float, help="end time (default 6/h)")
    common.add_argument("--dt", type=float, help="time step (default 1e-3/h)")
    common.add_argument("-n", type=int, help="number of grid points (overrides --dt)")
    common.add_argument("--tol-verify", type=float)
    common.add_argument("--mode", choices=("literal", "signed"))
    common.add_argument("-o", "--output", help="output file (default stdout)")

    parser = argparse.ArgumentParser(prog="pulseforge", description=__doc__.splitlines()[0],
                                     parents=[common])
    sub = parser.add_subparsers(dest="command")
    sub.add_parser("list", parents=[common], help="list families, profiles and figures")
    sub.add_parser("synth", parents=[common], help="synthesize a pulse and write CSV")
    sub.add_parser("verify", parents=[common], help="compare against the numerical propagator")
    w = sub.add_parser("wgen", parents=[common], help="generate q from a profile P(q)")
    w.add_argument("--profile", choices=sorted(PRESETS) + ["polynomial"])
    w.add_argument("--coeffs", help="polynomial coefficients, increasing powers, comma separated")
    w.add_argument("--q-min", type=float)
    w.add_argument("--synth", action="store_true", default=False, help="run the full pipeline on the generated q")
    r = sub.add_parser("rotate", parents=[common], help="net gate analysis or gate tuning")
    r.add_argument("--tau-f", type=float, help="half duration in units of 1/h (default 5)")
    r.add_argument("--target-nz", type=float, help="target n_z sin(theta/2)")
    r.add_argument("--theta", type=float, help="target angle; switches to tuning mode")
    p = sub.add_parser("reproduce", parents=[common], help="write figure data and gnuplot scripts")
    p.add_argument("figure", nargs="?", choices=sorted(FIGURES))
    p.add_argument("--outdir")
    return parser


_ARG_NAMES = ("config", "family", "a", "b", "h", "tmin", "tmax", "dt", "n", "tol_verify", "mode", "output",
              "profile", "coeffs", "q_min", "synth", "tau_f", "target_nz", "theta", "figure", "outdir")


def spec_from_args(args) -> JobSpec:
    merged = dict.fromkeys(_ARG_NAMES)
    merged.update(vars(args))
    args = argparse.Namespace(**merged)
    base = {}
    if args.config:
        with open(args.config) as fh:
            base = asdict(JobSpec.from_json(fh.read()))
    if args.command:
        base["command"] = args.command
    if "command" not in base:
        raise InvalidParameter(f"no command given; choose from {', '.join(COMMANDS)}")
    h = args.h if args.h is not None else base.get("h", 1.0)
    base["h"] = h
    if args.family:
        names = FAMILIES[args.family][1]
        fam = {"family": args.family}
        for pname in names:
            val = getattr(args, pname, None)
            if val is None:
                raise InvalidParameter(f"family {args.family} needs --{pname}")
            fam[pname] = val
        base["family"] = fam
    if args.tmax is not None:
        base["tau_max"] = h * args.tmax
        base["tau_min"] = -h * args.tmax
    if args.tmin is not None:
        base["tau_min"] = h * args.tmin
    if args.dt is not None:
        base["dtau"] = h * args.dt
    if args.n is not None:
        base["n"] = args.n
    for key, attr in (("tol_verify", "tol_verify"), ("mode", "mode"), ("output", "output")):
        if getattr(args, attr, None) is not None:
            base[key] = getattr(args, attr)
    if getattr(args, "profile", None):
        prof = {"profile": args.profile}
        if args.profile == "polynomial":
            if not args.coeffs:
                raise InvalidParameter("polynomial profile needs --coeffs")
            prof["coeffs"] = [float(c) for c in args.coeffs.split(",")]
            if args.q_min is not None:
                prof["q_min"] = args.q_min
        elif args.profile in ("tanh_sq", "arctan_trig"):
            if args.a is None:
                raise InvalidParameter(f"profile {args.profile} needs --a")
            prof["a"] = args.a
        base["profile"] = prof
    if getattr(args, "synth", False):
        base.setdefault("extra", {})["synth"] = True
    for key in ("tau_f", "target_nz", "theta", "figure", "outdir"):
        val = getattr(args, key, None)
        if val is not None:
            base[key] = val
    return JobSpec(**base)


def run(spec: JobSpec) -> int:
    return HANDLERS[spec.command](spec)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = spec_from_args(args)
        return run(spec)
    except BrokenPipeError:
        # downstream closed the pipe (e.g. `| head`); not an error of ours
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except VerificationFailure as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except ConstraintViolation as exc:
        print(f"constraint violated ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except (PulseForgeError, ValueError, OSError) as exc:
        print(f"invalid specification: {exc}", file=sys.stderr)
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
