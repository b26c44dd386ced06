"""Net gates of even pulses and tuning them to a target rotation.

For an even q the pulse runs from -tau_f to tau_f and the implemented gate is
U_tot = U(tau_f) U(-tau_f)^dagger.  Evenness gives U(-tau) = conj(U(tau))
entrywise, which forces Re u21_tot = 0: the rotation axis lies in the x-z
plane.  Writing out the product also gives
Im u11_tot = sin 2Phi sin(tau - 2K + F) at tau_f, so |tr(U_tot sigma_z)| is
bounded by 2 sin 2Phi(tau_f) = 2 |z(tau_f)|.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from .core import (ModelParams, RotationSpec, Unitary2, axis_angle, compose, dagger,
                   infidelity, pauli_traces, rotation)
from .errors import ConstraintViolation, IndeterminateAxis, NoSaturation, NotEven, Unreachable, WindowInsidePulse
from .qfamilies import QFamily, family_gauss_cos
from .synth import PulseSolution, evolution_at

TRACE_Z_BOUND = 2.0          # |tr(U_tot sigma_z)| <= TRACE_Z_BOUND * sin 2Phi(tau_f)
TAIL_RESIDUAL_MAX = 0.01
SATURATION_TOL = 1e-3
B_BRACKET = (-0.9, 10.0)
TAU_F_SAT = 5.0
TAU_F_RANGE = (3.0, 10.0)


def _require_even(family: QFamily | None):
    if family is None or family.parity != "even":
        name = family.name if family is not None else "zero-splitting solution"
        raise NotEven(f"{name} is not an even pulse; U(tau_f) alone describes half the evolution only for even q")


def total_evolution(sol: PulseSolution, tau_f: float) -> Unitary2:
    """U(tau_f) U(-tau_f)^dagger for an even pulse."""
    _require_even(sol.family)
    tau_f = float(tau_f)
    if tau_f == 0.0:
        return Unitary2.identity()
    return compose(sol.at(tau_f), dagger(sol.at(-tau_f)))


def total_evolution_family(family: QFamily, tau_f, params: ModelParams | None = None):
    """Vectorised U_tot at one or many tau_f without a full synthesis."""
    _require_even(family)
    tau_f = np.atleast_1d(np.asarray(tau_f, dtype=float))
    u11, u21 = evolution_at(family, np.concatenate([tau_f, -tau_f]), params)
    a, b = u11[:tau_f.size], u21[:tau_f.size]
    c, d = np.conj(u11[tau_f.size:]), -u21[tau_f.size:]          # dagger of U(-tau_f)
    return a * c - np.conj(b) * d, b * c + np.conj(a) * d


# ---------------------------------------------------------------------------
# tail fit


@dataclass(frozen=True)
class TailFit:
    A: float
    B: float
    window: tuple[float, float]
    residual: float

    def is_x_rotation(self, tol: float = 1e-6) -> bool:
        return abs(self.A) < tol and abs(self.B) < tol


def tail_fit(f: QFamily, window: tuple[float, float], n: int = 201) -> TailFit:
    """Fit q -> A cos tau + B sin tau on ``window`` using the exact invariants."""
    lo, hi = map(float, window)
    t = np.linspace(lo, hi, n)
    s = f.sample(t)
    c, sn = np.cos(t), np.sin(t)
    A = s.q * c - s.q1 * sn
    B = s.q * sn + s.q1 * c
    A_mean, B_mean = float(A.mean()), float(B.mean())
    residual = float(max(np.max(np.abs(A - A_mean)), np.max(np.abs(B - B_mean))))
    if residual > TAIL_RESIDUAL_MAX:
        raise WindowInsidePulse(
            f"q is not yet sinusoidal on [{lo:g}, {hi:g}] (A, B vary by {residual:.3g}); move the window out")
    return TailFit(A_mean, B_mean, (lo, hi), residual)


# ---------------------------------------------------------------------------
# x-z plane report


@dataclass(frozen=True)
class XZReport:
    tau_f: float
    trace_y: float
    trace_z: float
    s2phi: float
    bound_z: float
    y_ok: bool
    z_within_bound: bool


def xz_plane_checks(U_tot: Unitary2, sol: PulseSolution, tau_f: float, tol_y: float = 1e-8) -> XZReport:
    """Measure |tr(U_tot sigma_y)| and compare |tr(U_tot sigma_z)| with sin 2Phi(tau_f)."""
    _require_even(sol.family)
    tr = pauli_traces(U_tot)
    s = sol.family.sample(np.array([float(tau_f)]))
    s2 = float(min(1.0, abs(complex(s.q[0], s.q1[0]))))
    ty, tz = abs(tr["y"]), abs(tr["z"])
    bound = TRACE_Z_BOUND * s2
    return XZReport(float(tau_f), ty, tz, s2, bound, ty < tol_y, tz <= bound + 1e-12)


# ---------------------------------------------------------------------------
# tuner


@dataclass
class TuneResult:
    b: float
    tau_f: float
    achieved_axis: tuple | None
    achieved_angle: float
    infidelity_to_target: float
    saturation_spread: float

    def to_json(self, **kw) -> str:
        return json.dumps(asdict(self), **kw)


def target_rotation(target_nz_sin_half: float, theta: float) -> Unitary2:
    """exp(-i theta (n . sigma)/2) with n in the x-z plane and n_x >= 0."""
    sh = math.sin(theta / 2)
    if abs(sh) < 1e-15:
        return Unitary2.identity()
    nz = target_nz_sin_half / sh
    if abs(nz) > 1 + 1e-12:
        raise Unreachable(f"n_z sin(theta/2) = {target_nz_sin_half} impossible for theta = {theta}")
    nz = max(-1.0, min(1.0, nz))
    return rotation((math.sqrt(1 - nz * nz), 0.0, nz), theta)


def _im_u11(b: float, tau_f, params) -> np.ndarray:
    u11, _ = total_evolution_family(family_gauss_cos(b), tau_f, params)
    return u11.imag


def _scan_value(b: float, params) -> float:
    """Im u11_tot at the saturation time, NaN where b leaves the unit disk."""
    try:
        return float(_im_u11(b, TAU_F_SAT, params)[0])
    except ConstraintViolation:
        return float("nan")


def tune_target_rotation(target_nz_sin_half: float, theta: float, params: ModelParams | None = None,
                         b_bracket: tuple[float, float] = B_BRACKET, n_scan: int = 45,
                         tau_f_range: tuple[float, float] = TAU_F_RANGE) -> TuneResult:
    """Choose (b, tau_f) of the gauss_cos family to implement a target gate.

    b fixes the saturated value of Im u11_tot = -n_z sin(theta/2) (read at
    tau_f = 5); tau_f then sets the angle through the free x-precession that
    follows the pulse.  The smallest tau_f in ``tau_f_range`` with
    Re u11_tot = cos(theta/2) and n_x >= 0 is returned.
    """
    params = params or ModelParams()
    target = float(target_nz_sin_half)
    lo, hi = b_bracket
    bs = np.linspace(lo, hi, n_scan)
    vals = np.array([_scan_value(b, params) for b in bs]) + target
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]:
        if vals[i] == 0:
            roots.append(bs[i])
        elif vals[i + 1] != 0:
            roots.append(brentq(lambda b: _im_u11(b, TAU_F_SAT, params)[0] + target, bs[i], bs[i + 1],
                                xtol=1e-13, rtol=1e-13))
    if not roots:
        reach = (float(np.nanmin(vals - target)), float(np.nanmax(vals - target)))
        raise Unreachable(f"Im U_tot,11 at tau_f = {TAU_F_SAT} spans [{reach[0]:.4g}, {reach[1]:.4g}] for b in "
                          f"({lo}, {hi}]; target {-target:.4g} is outside")
    b = float(min(roots, key=abs))

    family = family_gauss_cos(b)
    spread_pts = _im_u11(b, np.linspace(4.0, 6.0, 9), params)
    spread = float(np.ptp(spread_pts))
    if spread > SATURATION_TOL:
        raise NoSaturation(f"Im U_tot,11 varies by {spread:.3g} over tau_f in [4, 6] for b = {b:.6g}")

    # angle: Re u11_tot(tau_f) = cos(theta/2), scanning for the first admissible root
    goal = math.cos(theta / 2)
    ts = np.linspace(*tau_f_range, 1401)
    u11, u21 = total_evolution_family(family, ts, params)
    r = u11.real - goal
    tau_f = None
    for i in np.nonzero(np.sign(r[:-1]) * np.sign(r[1:]) <= 0)[0]:
        fn = lambda t: total_evolution_family(family, t, params)[0].real[0] - goal
        t_star = ts[i] if r[i] == 0 else brentq(fn, ts[i], ts[i + 1], xtol=1e-13, rtol=1e-13)
        if total_evolution_family(family, t_star, params)[1].imag[0] <= 1e-12:   # n_x >= 0
            tau_f = float(t_star)
            break
    if tau_f is None:
        raise Unreachable(f"no tau_f in {tau_f_range} gives angle {theta:.6g} with this axis")

    a11, a21 = total_evolution_family(family, tau_f, params)
    U = Unitary2(a11[0], a21[0])
    try:
        spec = axis_angle(U)
    except IndeterminateAxis as exc:
        spec = exc.args[1]
    inf = infidelity(U, target_rotation(target, theta))
    return TuneResult(b, tau_f, spec.axis, spec.angle, inf, spread)


def rotation_summary(U: Unitary2) -> RotationSpec:
    try:
        return axis_angle(U)
    except IndeterminateAxis as exc:
        return exc.args[1]
