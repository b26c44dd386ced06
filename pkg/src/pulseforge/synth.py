"""Control field and exact evolution operator from a generator q(tau).

With z = q + i q' (dimensionless time, ' = d/dtau) the pipeline is::

    F        = unwrapped arg z,          F(0) = 0
    sin 2Phi = |z|
    cos 2Phi = sigma * sqrt(1 - |z|^2)    (sigma = +1 unless signed mode)
    J / h    = (q + q'') / cos 2Phi
    dK/dtau  = q (q + q'' + J/h) / (2 |z|^2)
    u11      = e^{i(tau/2 - K)} (e^{iF} cos Phi + sin Phi) / sqrt 2
    u21      = e^{i(tau/2 - K)} (e^{iF} cos Phi - sin Phi) / sqrt 2

The dK/dtau form is the usual q(q''+q)/(2|z|^2) * (1 + 1/cos 2Phi) with the
1/cos 2Phi factor traded for J, which removes the 0/0 at saturation events.
Inside a window of half-width ``eps_singular`` around each event J itself is
taken from its series limit and interpolated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import BarycentricInterpolator

from .core import ModelParams, TimeGrid, Unitary2, infidelity_arrays
from .errors import (BranchSingular, InequalityViolated, InitialConditionError, InvalidParameter,
                     OriginCrossing, OutsideDomain)
from .qfamilies import (QFamily, QSample, SaturationEvent, ValidityReport, gap,
                        validate_initial_conditions, validity_domain)
from .quadrature import adaptive_simpson

Z_FLOOR = 1e-150


@dataclass
class SynthFrame:
    """Per-node synthesized quantities (arrays aligned with the grid)."""

    tau: np.ndarray
    F: np.ndarray
    s2phi: np.ndarray
    c2phi: np.ndarray
    K: np.ndarray
    Jh: np.ndarray


@dataclass
class PulseSolution:
    grid: TimeGrid
    frames: SynthFrame
    u11: np.ndarray
    u21: np.ndarray
    family: QFamily | None
    params: ModelParams
    report: ValidityReport | None
    control: Callable = field(repr=False)
    windows: list = field(default_factory=list)
    engine: "Pipeline | None" = field(default=None, repr=False)

    def unitary(self, i: int) -> Unitary2:
        return Unitary2(self.u11[i], self.u21[i])

    def index_of(self, tau: float, tol: float = 1e-9) -> int | None:
        i = int(np.argmin(np.abs(self.grid.tau - tau)))
        return i if abs(self.grid.tau[i] - tau) <= tol else None

    def at(self, tau: float) -> Unitary2:
        """U at ``tau``: a grid node if present, otherwise evaluated directly."""
        i = self.index_of(tau)
        if i is not None:
            return self.unitary(i)
        if self.engine is None:
            raise InvalidParameter(f"tau = {tau} is not a grid node")
        u11, u21 = self.engine.unitary(np.array([tau]))
        return Unitary2(u11[0], u21[0])


# ---------------------------------------------------------------------------
# per-stage formulas


def envelope(sample: QSample) -> np.ndarray:
    s = np.abs(sample.z)
    worst = float(np.max(s)) if s.size else 0.0
    if worst > 1.0 + 1e-10:
        i = int(np.argmax(s))
        raise InequalityViolated(
            f"|q + i q'| = {worst:.12g} > 1 at tau = {float(sample.tau.flat[i]):.6g} "
            "(q'^2 <= 1 - q^2 violated)")
    return np.minimum(s, 1.0)


def phase_F(family: QFamily, tau: np.ndarray) -> np.ndarray:
    """Continuously unwrapped arg(q + i q') on ``tau`` with F(0) = 0.

    Neighbouring samples whose phase increment exceeds pi/4 are resampled
    more finely before unwrapping.
    """
    tau = np.asarray(tau, dtype=float)
    nodes = np.union1d(tau, [0.0])
    z = family.sample(nodes).z
    if np.any(np.abs(z) < Z_FLOOR):
        i = int(np.argmin(np.abs(z)))
        raise OriginCrossing(f"q and q' vanish together near tau = {nodes[i]:.6g}; F is undefined")
    inc = np.angle(z[1:] * np.conj(z[:-1]))
    for i in np.nonzero(np.abs(inc) > math.pi / 4)[0]:
        inc[i] = _fine_increment(family, nodes[i], nodes[i + 1])
    F = np.concatenate([[0.0], np.cumsum(inc)])
    F -= F[np.searchsorted(nodes, 0.0)]
    return F[np.searchsorted(nodes, tau)]


def _fine_increment(family: QFamily, a: float, b: float, depth: int = 0) -> float:
    pts = np.linspace(a, b, 65)
    z = family.sample(pts).z
    if np.any(np.abs(z) < Z_FLOOR):
        raise OriginCrossing(f"q and q' vanish together in [{a:.6g}, {b:.6g}]")
    inc = np.angle(z[1:] * np.conj(z[:-1]))
    if np.any(np.abs(inc) > math.pi / 2):
        if depth > 6:
            raise OriginCrossing(f"phase of q + i q' cannot be tracked in [{a:.6g}, {b:.6g}]")
        return sum(_fine_increment(family, pts[k], pts[k + 1], depth + 1)
                   if abs(inc[k]) > math.pi / 2 else inc[k] for k in range(inc.size))
    return float(np.sum(inc))


def control_J(sample: QSample, c2phi: np.ndarray) -> np.ndarray:
    """Direct J/h = (q + q'') / cos 2Phi (no singular-window handling)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return sample.q_plus_q2 / c2phi


def kdot(sample: QSample, Jh: np.ndarray) -> np.ndarray:
    z2 = sample.q ** 2 + sample.q1 ** 2
    if np.any(z2 < Z_FLOOR ** 2):
        raise OriginCrossing("|q + i q'| underflows; dK/dtau is undefined")
    return sample.q * (sample.q_plus_q2 + Jh) / (2.0 * z2)


def evolution_operator(tau, z, s2phi, c2phi, K):
    """(u11, u21) from the phase-plane signal and the accumulated phase K."""
    c = np.asarray(c2phi, dtype=float)
    s = np.asarray(s2phi, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        cp = np.where(c >= 0, np.sqrt((1.0 + c) / 2.0), 0.0)
        sp = np.where(c >= 0, 0.0, np.sqrt((1.0 - c) / 2.0))
        # the smaller of cos Phi / sin Phi via sin 2Phi = 2 sin Phi cos Phi
        sp = np.where(c >= 0, s / (2.0 * cp), sp)
        cp = np.where(c >= 0, cp, s / (2.0 * sp))
        phase = z / np.abs(z)
    tau = np.asarray(tau)
    pre = np.exp(1j * (tau / 2.0 - K)) / math.sqrt(2.0)
    u11, u21 = pre * (phase * cp + sp), pre * (phase * cp - sp)
    # U(0) = I holds exactly; the formula only reaches it to rounding
    return np.where(tau == 0, 1.0 + 0j, u11), np.where(tau == 0, 0j, u21)


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class _Window:
    center: float
    eps: float
    J_center: float
    interp: Callable
    order: int


class Pipeline:
    """Evaluates every synthesized quantity of one family at arbitrary tau."""

    def __init__(self, family: QFamily, params: ModelParams, report: ValidityReport):
        self.family = family
        self.params = params
        self.report = report
        self.events: list[SaturationEvent] = list(report.saturation_events)
        self.anchors = [e.tau for e in self.events]
        self.flips: list[float] = []
        self.windows: list[_Window] = []
        if family.saturated:
            return
        if params.mode == "signed":
            self.flips = [e.tau for e in self.events if e.order == 2 and e.tau != 0.0]
        for e in self.events:
            self.windows.append(self._make_window(e))

    # -- branch --------------------------------------------------------------
    def sigma(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        sig = np.ones_like(tau)
        for t in self.flips:
            if t > 0:
                sig = np.where(tau > t, -sig, sig)
            else:
                sig = np.where(tau < t, -sig, sig)
        return sig

    def c2phi(self, tau) -> np.ndarray:
        g = gap(self.family, tau, self.anchors)
        return self.sigma(tau) * np.sqrt(np.clip(g, 0.0, None))

    # -- control -------------------------------------------------------------
    def _direct_J(self, tau) -> np.ndarray:
        s = self.family.sample(tau)
        return control_J(s, self.c2phi(tau))

    def _limit_J(self, e: SaturationEvent, eps: float) -> float:
        """Series limit of J/h at an order-4 event.

        Writing q + q'' ~ L0 s^2, the local expansion q ~ q* (1 - s^2/2 + c4 s^4)
        gives L0 = q* (12 c4 - 1/2) and J -> (12 c4 - 1/2) / sqrt(6 c4 - 1/4).
        L0 is obtained by Richardson extrapolation of the symmetrised
        (q + q'')(t* +- s) / (2 s^2) in powers of s^2.
        """
        t0 = e.tau
        q_star = float(self.family.sample(np.array([t0])).q[0])
        hs = 16 * eps * 0.5 ** np.arange(5)
        s = self.family.sample(np.concatenate([t0 + hs, t0 - hs]))
        m = (s.q_plus_q2[:5] + s.q_plus_q2[5:]) / (2 * hs ** 2)
        table = [m]
        for k in range(1, 5):
            prev = table[-1]
            table.append((4 ** k * prev[1:] - prev[:-1]) / (4 ** k - 1))
        sign_q = 1.0 if q_star >= 0 else -1.0
        c4 = (float(table[-1][0]) * sign_q + 0.5) / 12.0
        rad = 6 * c4 - 0.25
        if rad <= 0:
            return 0.0
        sigma = float(self.sigma(np.array([t0 + eps]))[0])
        return sign_q * sigma * (12 * c4 - 0.5) / math.sqrt(rad)

    def _make_window(self, e: SaturationEvent) -> _Window:
        eps = self.params.eps_singular
        offs = eps * np.array([1.0, 1.5, 2.0, 2.5, 3.0])
        s_pts = np.concatenate([-offs[::-1], offs])
        J_out = self._direct_J(e.tau + s_pts)
        if e.order == 4:
            J0 = self._limit_J(e, eps)
            xs = np.concatenate([s_pts[:5], [0.0], s_pts[5:]])
            ys = np.concatenate([J_out[:5], [J0], J_out[5:]])
        else:
            xs, ys = s_pts, J_out
        interp = BarycentricInterpolator(xs, ys)
        if e.order != 4:
            J0 = float(interp(0.0))
        return _Window(e.tau, eps, J0, interp, e.order)

    def control(self, tau) -> np.ndarray:
        """J/h with removable singularities filled in."""
        tau = np.asarray(tau, dtype=float)
        if self.family.saturated:
            return np.zeros_like(tau)
        out = self._direct_J(tau)
        for w in self.windows:
            inside = np.abs(tau - w.center) < w.eps
            if np.any(inside):
                out = np.where(inside, w.interp(tau - w.center), out)
        bad = ~np.isfinite(out)
        if np.any(bad):
            t = float(tau[bad].flat[0])
            raise BranchSingular(f"cos 2Phi vanishes with q + q'' != 0 at tau = {t:.6g}; J diverges")
        return out

    def kdot(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        if self.family.saturated:
            return np.zeros_like(tau)
        return kdot(self.family.sample(tau), self.control(tau))

    # -- accumulated quantities ---------------------------------------------
    def K(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        if self.family.saturated:
            return np.zeros_like(tau)
        nodes = np.union1d(tau, [0.0])
        pieces = adaptive_simpson(self.kdot, nodes, self.params.tol_quad)
        K = np.concatenate([[0.0], np.cumsum(pieces)])
        K -= K[np.searchsorted(nodes, 0.0)]
        return K[np.searchsorted(nodes, tau)]

    def unitary(self, tau, K=None):
        tau = np.asarray(tau, dtype=float)
        if self.family.saturated:
            return np.cos(tau / 2).astype(complex), -1j * np.sin(tau / 2)
        s = self.family.sample(tau)
        s2 = envelope(s)
        c2 = self.c2phi(tau)
        if K is None:
            K = self.K(tau)
        return evolution_operator(tau, s.z, s2, c2, K)


def synthesize(family: QFamily, params: ModelParams | None = None,
               grid: TimeGrid | None = None) -> PulseSolution:
    """Run the full pipeline for ``family`` on ``grid``."""
    params = params or ModelParams()
    grid = grid or TimeGrid.uniform(-6.0, 6.0, 1e-3)
    if params.zero_splitting:
        raise InvalidParameter("the q pipeline needs h > 0; use synthesize_zero_splitting")
    ic = validate_initial_conditions(family)
    if not ic.passed:
        raise InitialConditionError(
            "initial conditions q(0) = 1, q'(0) = 0, q''(0) = -1 violated "
            f"(residuals {', '.join(f'{r:.3e}' for r in ic.residuals)})")
    report = validity_domain(family, grid)
    eng = Pipeline(family, params, report)
    tau = grid.tau

    if not family.saturated:
        g = gap(family, tau, eng.anchors)
        if np.any(g < -1e-10):
            bad = tau[g < -1e-10]
            raise OutsideDomain(
                f"grid leaves the admissible domain (q'^2 > 1 - q^2 at tau = {bad[0]:.6g}); "
                f"detected validity intervals: {report.describe()}")

    s = family.sample(tau)
    s2 = envelope(s)
    F = phase_F(family, tau)
    if family.saturated:
        c2 = np.zeros_like(tau)
        Jh = np.zeros_like(tau)
        K = np.zeros_like(tau)
    else:
        c2 = eng.c2phi(tau)
        Jh = eng.control(tau)
        K = eng.K(tau)
    u11, u21 = eng.unitary(tau, K=K)
    frames = SynthFrame(tau, F, s2, c2, K, Jh)
    windows = [(w.center, w.eps) for w in eng.windows]
    return PulseSolution(grid, frames, u11, u21, family, params, report, eng.control, windows, eng)


def evolution_at(family: QFamily, taus, params: ModelParams | None = None):
    """(u11, u21) at arbitrary ``taus`` without building a full solution."""
    params = params or ModelParams()
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    span = (min(float(taus.min()), 0.0), max(float(taus.max()), 0.0))
    if span[1] - span[0] < 1e-6:
        span = (span[0] - 1e-3, span[1] + 1e-3)
    report = validity_domain(family, TimeGrid(np.array(span)))
    eng = Pipeline(family, params, report)
    order = np.argsort(taus)
    u11, u21 = eng.unitary(taus[order])
    inv = np.empty_like(order)
    inv[order] = np.arange(order.size)
    return u11[inv], u21[inv]


def synthesize_zero_splitting(J: Callable, t_grid, params: ModelParams | None = None) -> PulseSolution:
    """h = 0: H = J(t) sigma_z / 2 is a pure z-rotation by K = (1/2) int_0^t J.

    Time and J are physical here (no h to scale by).
    """
    params = params or ModelParams(h=0.0, zero_splitting=True)
    grid = t_grid if isinstance(t_grid, TimeGrid) else TimeGrid(np.asarray(t_grid, dtype=float))
    t = grid.tau
    nodes = np.union1d(t, [0.0])
    pieces = adaptive_simpson(lambda x: 0.5 * np.asarray(J(x), dtype=float), nodes, params.tol_quad)
    K = np.concatenate([[0.0], np.cumsum(pieces)])
    K = (K - K[np.searchsorted(nodes, 0.0)])[np.searchsorted(nodes, t)]
    u11 = np.exp(-1j * K)
    u21 = np.zeros_like(u11)
    Jt = np.asarray(J(t), dtype=float) * np.ones_like(t)
    frames = SynthFrame(t, np.zeros_like(t), np.ones_like(t), np.zeros_like(t), K, Jt)
    return PulseSolution(grid, frames, u11, u21, None, params, None, J)


# ---------------------------------------------------------------------------
# two-axis relabelling


@dataclass(frozen=True)
class TwoAxisControl:
    """H = (J/2)(cos(w tau) sigma_z + sin(w tau) sigma_y) + (x_field/2) sigma_x.

    All fields in units of the single-axis splitting h; ``omega`` is w / h and
    ``x_field = 1 - omega``.  The evolution is ``exp(i omega tau sigma_x / 2)``
    applied to the single-axis solution.
    """

    omega: float
    x_field: float
    control: Callable = field(repr=False)

    def fields(self, tau):
        tau = np.asarray(tau, dtype=float)
        J = self.control(tau)
        return (np.full_like(tau, self.x_field), J * np.sin(self.omega * tau),
                J * np.cos(self.omega * tau))

    def evolution(self, sol: PulseSolution):
        tau = sol.grid.tau
        c, s = np.cos(self.omega * tau / 2), np.sin(self.omega * tau / 2)
        # exp(i w tau sigma_x / 2) = [[c, i s], [i s, c]]
        a, b = sol.u11, sol.u21
        return c * a + 1j * s * b, 1j * s * a + c * b


def two_axis_lift(sol: PulseSolution, omega: float) -> TwoAxisControl:
    """Relabel a single-axis solution as a rotating two-axis drive.

    ``omega`` is in units of the splitting the solution was synthesized with.
    No recomputation: the same q yields the same J and, after the frame change,
    the same U.
    """
    return TwoAxisControl(float(omega), 1.0 - float(omega), sol.control)


def solution_distance(sol: PulseSolution, u11, u21) -> np.ndarray:
    return infidelity_arrays(sol.u11, sol.u21, u11, u21)
