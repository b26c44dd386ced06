"""Independent numerical oracle for synthesized solutions.

The propagator never looks at q, F, K or Phi: it only sees the control J(tau)
and advances U by exact SU(2) exponentials of (combinations of) the
Hamiltonian sampled at quadrature nodes, so every step is unitary by
construction and disagreement with the analytic U isolates formula errors.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .core import TimeGrid, infidelity_arrays, unitarity_defect
from .errors import GridTooCoarse, InvalidParameter, StepTooLarge

_R3 = math.sqrt(3.0)
# two-node Gauss-Legendre sampling points and commutator-free mixing weights
_C1, _C2 = 0.5 - _R3 / 6, 0.5 + _R3 / 6
_A1, _A2 = 0.25 - _R3 / 6, 0.25 + _R3 / 6


@dataclass(frozen=True)
class PropagatorConfig:
    step: float = 1e-3
    scheme: int = 4            # 2: exponential midpoint, 4: commutator-free
    substeps: int = 1
    richardson: bool = True
    tol: float = 1e-8

    def __post_init__(self):
        if not self.step > 0:
            raise InvalidParameter("step must be > 0")
        if self.scheme not in (2, 4):
            raise InvalidParameter("scheme must be 2 or 4")
        if self.substeps < 1:
            raise InvalidParameter("substeps must be >= 1")


@dataclass
class VerificationReport:
    max_infidelity: float
    max_distance: float
    max_unitarity_defect: float
    max_numeric_unitarity_defect: float
    max_ode_residual: float
    step_error_estimate: float
    worst_tau: float
    worst_nodes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def passed(self, tol: float) -> bool:
        return self.max_infidelity < tol


def _su2_exp(bx, by, bz, dt):
    """exp(-i dt (b . sigma) / 2) as (u11, u21) arrays."""
    norm = np.sqrt(bx * bx + by * by + bz * bz)
    phi = 0.5 * dt * norm
    c = np.cos(phi)
    # sin(phi) / |b| stays finite as |b| -> 0
    sinc = 0.5 * dt * np.sinc(phi / np.pi)
    return c - 1j * sinc * bz, sinc * (by - 1j * bx)


def _chain(step_u11, step_u21):
    """Cumulative left-multiplication of per-step unitaries starting at I."""
    n = step_u11.size
    out11 = np.empty(n + 1, dtype=complex)
    out21 = np.empty(n + 1, dtype=complex)
    a, b = 1.0 + 0j, 0j
    out11[0], out21[0] = a, b
    s11 = step_u11.tolist()
    s21 = step_u21.tolist()
    for k in range(n):
        c, d = s11[k], s21[k]
        a, b = c * a - d.conjugate() * b, d * a + c.conjugate() * b
        out11[k + 1], out21[k + 1] = a, b
    return out11, out21


def _distance(a11, a21, b11, b21):
    """Column-norm distance between (u11, u21) stacks, up to the SU(2) sign."""
    sign = np.where((np.conj(a11) * b11 + np.conj(a21) * b21).real >= 0, 1.0, -1.0)
    return np.sqrt(np.abs(a11 - sign * b11) ** 2 + np.abs(a21 - sign * b21) ** 2)


def _as_fields(J):
    """Wrap a single-axis control J(tau) as the field map (1, 0, J)."""
    def fields(t):
        t = np.asarray(t, dtype=float)
        return np.ones_like(t), np.zeros_like(t), np.asarray(J(t), dtype=float) * np.ones_like(t)
    return fields


def _steps(fields, t0, t1, scheme):
    dt = t1 - t0
    if scheme == 2:
        bx, by, bz = fields(t0 + 0.5 * dt)
        return _su2_exp(bx, by, bz, dt)
    b1 = fields(t0 + _C1 * dt)
    b2 = fields(t0 + _C2 * dt)
    # U_{n+1} = exp(dt(a1 A1 + a2 A2)) exp(dt(a2 A1 + a1 A2)) U_n
    first = _su2_exp(*(_A2 * x + _A1 * y for x, y in zip(b1, b2)), dt)
    second = _su2_exp(*(_A1 * x + _A2 * y for x, y in zip(b1, b2)), dt)
    c, d = second
    e, f = first
    return c * e - np.conj(d) * f, d * e + np.conj(c) * f


def _propagate_from_zero(fields, nodes, scheme, substeps):
    """U at ``nodes`` (sorted, all on one side of 0, |.| increasing) from U(0) = I."""
    pts = np.concatenate([[0.0], nodes])
    if substeps > 1:
        frac = np.arange(substeps) / substeps
        fine = (pts[:-1, None] + np.diff(pts)[:, None] * frac).ravel()
        fine = np.concatenate([fine, pts[-1:]])
    else:
        fine = pts
    s11, s21 = _steps(fields, fine[:-1], fine[1:], scheme)
    u11, u21 = _chain(s11, s21)
    return u11[substeps::substeps], u21[substeps::substeps]


def propagate_fields(fields: Callable, tau, scheme: int = 4, substeps: int = 1):
    """Propagate H = (bx sx + by sy + bz sz)/2 with U(0) = I onto ``tau``."""
    tau = np.asarray(tau, dtype=float)
    u11 = np.empty(tau.size, dtype=complex)
    u21 = np.empty(tau.size, dtype=complex)
    pos = tau >= 0
    neg = ~pos
    if np.any(pos):
        u11[pos], u21[pos] = _propagate_from_zero(fields, tau[pos], scheme, substeps)
    if np.any(neg):
        back = tau[neg][::-1]
        a, b = _propagate_from_zero(fields, back, scheme, substeps)
        u11[neg], u21[neg] = a[::-1], b[::-1]
    # exactly tau = 0 nodes
    zero = tau == 0
    u11[zero], u21[zero] = 1.0, 0.0
    return u11, u21


def propagate_numeric(J, grid: TimeGrid, cfg: PropagatorConfig | None = None, with_estimate: bool = False):
    """Numerically propagate the single-axis problem with control J/h.

    ``J`` is either a callable of tau or an array of samples on ``grid``
    (cubic-spline interpolated between nodes).  With ``cfg.richardson`` the
    run is repeated at doubled substeps; if the implied error of the coarse
    run (operator distance) exceeds ``cfg.tol`` StepTooLarge is raised.
    """
    cfg = cfg or PropagatorConfig()
    tau = grid.tau
    if not callable(J):
        samples = np.asarray(J, dtype=float)
        if samples.shape != tau.shape:
            raise InvalidParameter("J samples must match the grid")
        J = CubicSpline(tau, samples)
    fields = _as_fields(J)
    u11, u21 = propagate_fields(fields, tau, cfg.scheme, cfg.substeps)
    estimate = 0.0
    if cfg.richardson:
        f11, f21 = propagate_fields(fields, tau, cfg.scheme, 2 * cfg.substeps)
        scale = 2 ** cfg.scheme
        # operator distance, not infidelity: the latter is quadratic in the
        # error and would let visibly under-resolved steps through
        estimate = float(np.max(_distance(u11, u21, f11, f21))) * scale / (scale - 1)
        if estimate > cfg.tol:
            raise StepTooLarge(
                f"step {tau[1] - tau[0] if tau.size > 1 else cfg.step:.3g} too large: Richardson "
                f"error estimate {estimate:.3e} exceeds {cfg.tol:.1e}")
    if with_estimate:
        return (u11, u21), estimate
    return u11, u21


def _uniform_step(tau) -> float:
    if tau.size < 5:
        raise GridTooCoarse("need at least 5 nodes for 4th-order differentiation")
    d = np.diff(tau)
    if not np.allclose(d, d[0], rtol=1e-9, atol=1e-12):
        raise GridTooCoarse("ODE residual needs a uniform grid")
    if d[0] > 0.05:
        raise GridTooCoarse(f"grid spacing {d[0]:.3g} too coarse for the residual check (max 0.05)")
    return float(d[0])


def rotating_frame(tau, u11, u21):
    """D_plus, D_minus = e^{+-i tau/2} (u11 +- u21) / sqrt 2."""
    r = 1.0 / math.sqrt(2.0)
    return (r * np.exp(0.5j * tau) * (u11 + u21), r * np.exp(-0.5j * tau) * (u11 - u21))


def ode_residual(sol, u11=None, u21=None) -> float:
    """max |D+-' + i (J/2) e^{+-i tau} D-+| over interior nodes.

    Derivatives are fourth-order central differences, so the floor is set by
    the grid spacing.
    """
    tau = sol.grid.tau
    h = _uniform_step(tau)
    u11 = sol.u11 if u11 is None else u11
    u21 = sol.u21 if u21 is None else u21
    Dp, Dm = rotating_frame(tau, u11, u21)
    J = sol.frames.Jh

    def d4(y):
        return (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * h)

    t = tau[2:-2]
    Jc = J[2:-2]
    rp = d4(Dp) + 0.5j * Jc * np.exp(1j * t) * Dm[2:-2]
    rm = d4(Dm) + 0.5j * Jc * np.exp(-1j * t) * Dp[2:-2]
    return float(max(np.max(np.abs(rp)), np.max(np.abs(rm))))


def compare(sol, cfg: PropagatorConfig | None = None, residual: bool = True) -> VerificationReport:
    """Propagate the solution's J numerically and measure the disagreement."""
    cfg = cfg or PropagatorConfig(tol=sol.params.tol_verify)
    (n11, n21), estimate = propagate_numeric(sol.control, sol.grid, cfg, with_estimate=True)
    inf = infidelity_arrays(sol.u11, sol.u21, n11, n21)
    dist = _distance(sol.u11, sol.u21, n11, n21)
    worst = np.argsort(inf)[::-1][:5]
    try:
        res = ode_residual(sol) if residual else 0.0
    except GridTooCoarse:
        res = float("nan")
    return VerificationReport(
        max_infidelity=float(inf.max()),
        max_distance=float(dist.max()),
        max_unitarity_defect=float(unitarity_defect(sol.u11, sol.u21).max()),
        max_numeric_unitarity_defect=float(unitarity_defect(n11, n21).max()),
        max_ode_residual=res,
        step_error_estimate=estimate,
        worst_tau=float(sol.grid.tau[worst[0]]),
        worst_nodes=[(float(sol.grid.tau[i]), float(inf[i])) for i in worst],
    )
