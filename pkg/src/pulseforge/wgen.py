"""Profile generator: P(q) -> W(q) -> q(tau).

A profile P with 0 <= P <= 1 - q^2, P(1) = 0 and P'(1) = -2 defines q through
q'^2 = P(q), descending from q = 1.  Time is W(q) = int_q^1 dq'/sqrt(P(q')),
which has an inverse-square-root endpoint at q = 1 (and at a simple lower
turning point).  Both ends are removed by substitution: q = 1 - u^2 near the
top and q = q_min + v^2 near the bottom, so the integrands are smooth and the
table is inverted in u or v rather than in q.

Profiles may supply ``P_top(d) = P(1 - d)`` and ``P_bottom(d) = P(q_min + d)``
in forms that avoid cancellation for small d; the defaults just call P.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import minimize_scalar

from .errors import InvalidParameter, NonIntegrable, OutOfRange, StuckAtZero
from .qfamilies import QFamily, family_arctan_trig
from .quadrature import bracketed_solve, gauss_legendre

N_NODES = 2048
SERIES_TAU = 1e-4
DOUBLE_ZERO_SLOPE = 1e-8
_GL = 20


@dataclass(frozen=True)
class PSpec:
    """A profile P on [q_min, 1] with its derivative and shifted evaluators."""

    P: Callable
    P1: Callable
    q_min: float
    name: str = "custom"
    params: dict = field(default_factory=dict)
    P_top: Callable | None = None
    P_bottom: Callable | None = None

    def __post_init__(self):
        if not -1.0 <= self.q_min < 1.0:
            raise InvalidParameter(f"q_min must lie in [-1, 1) (got {self.q_min})")
        if self.P_top is None:
            object.__setattr__(self, "P_top", lambda d: self.P(1.0 - d))
        if self.P_bottom is None:
            object.__setattr__(self, "P_bottom", lambda d: self.P(self.q_min + d))

    # presets -------------------------------------------------------------
    @classmethod
    def circle(cls) -> "PSpec":
        """P = 1 - q^2, the saturating profile (q = cos tau)."""
        return cls(lambda q: (1 - q) * (1 + q), lambda q: -2.0 * np.asarray(q, dtype=float), -1.0,
                   "circle", {}, lambda d: d * (2 - d), lambda d: d * (2 - d))

    @classmethod
    def tanh_sq(cls, a: float) -> "PSpec":
        """P = 2(1-q)(1 - 2a^2(1-q))^2, generating q = 1 - tanh^2(a tau)/(2a^2)."""
        a = float(a)
        if not a > 0:
            raise InvalidParameter(f"tanh_sq requires a > 0 (got a = {a})")
        k = 2 * a * a
        q_min = max(1.0 - 1.0 / k, -1.0)
        span = 1.0 / k

        def P(q):
            d = 1.0 - np.asarray(q, dtype=float)
            return 2 * d * (1 - k * d) ** 2

        def P1(q):
            d = 1.0 - np.asarray(q, dtype=float)
            return -2 * (1 - k * d) * (1 - 3 * k * d)

        def top(d):
            return 2 * d * (1 - k * d) ** 2

        bottom = None
        if q_min > -1.0:
            def bottom(e):
                return 2 * (span - e) * (k * e) ** 2
        return cls(P, P1, q_min, "tanh_sq", {"a": a}, top, bottom)

    @classmethod
    def arctan_trig(cls, a: float) -> "PSpec":
        """Implied profile of q = tan(arctan a - (2a/(1+a^2)) sin^2(tau/2)) / a."""
        a = float(a)
        if not a > 0:
            raise InvalidParameter(f"arctan_trig requires a > 0 (got a = {a})")
        a2, n, c = a * a, 1 + a * a, a + 1 / a
        alpha = math.atan(a)
        q_min = family_arctan_trig(a).metadata["q_min"]

        def P(q):
            q = np.asarray(q, dtype=float)
            v = 1 + c * (np.arctan(a * q) - alpha)
            return (1 - v) * (1 + v) * (1 + a2 * q * q) ** 2 / n ** 2

        def P1(q):
            q = np.asarray(q, dtype=float)
            v = 1 + c * (np.arctan(a * q) - alpha)
            w = 1 + a2 * q * q
            return (-2 * v * c * a * w + 4 * a2 * q * w * (1 - v) * (1 + v)) / n ** 2

        def top(d):
            q = 1.0 - d
            th = c * np.arctan(a * d / (1 + a2 * q))
            return th * (2 - th) * (1 + a2 * q * q) ** 2 / n ** 2

        def bottom(d):
            q = q_min + d
            ph = c * np.arctan(a * d / (1 + a2 * q * q_min))
            return ph * (2 - ph) * (1 + a2 * q * q) ** 2 / n ** 2

        return cls(P, P1, q_min, "arctan_trig", {"a": a}, top, bottom)

    @classmethod
    def polynomial(cls, coeffs, q_min: float | None = None) -> "PSpec":
        """P from coefficients in increasing powers of q.

        Without ``q_min`` the domain ends at the largest real root below 1
        (or at -1 when there is none).
        """
        coeffs = np.asarray(coeffs, dtype=float)
        scale = float(np.sum(np.abs(coeffs)))
        # negligible leading terms only produce spurious huge or misplaced roots
        poly = Polynomial(coeffs).trim(1e-14 * scale)
        if q_min is None:
            q_min = -1.0
            for r in poly.roots():
                real = float(r.real)
                if (abs(r.imag) < 1e-7 and -1.0 <= real < 1.0 - 1e-9
                        and abs(float(poly(real))) <= 1e-10 * scale):
                    q_min = max(q_min, real)
        dpoly = poly.deriv()
        top = poly(Polynomial([1.0, -1.0]))
        bottom = poly(Polynomial([float(q_min), 1.0]))
        # the endpoint zeros must be exact, or sqrt(P) sees rounding residue near them
        for shifted in (top, bottom):
            if abs(shifted.coef[0]) <= 1e-10 * scale:
                shifted.coef[0] = 0.0
        return cls(poly, dpoly, float(q_min), "polynomial",
                   {"coeffs": [float(x) for x in poly.coef]}, top, bottom)

    # serialization ----------------------------------------------------------
    def to_dict(self) -> dict:
        if self.name not in PRESETS and self.name != "polynomial":
            raise InvalidParameter(f"profile {self.name!r} has no serial form")
        out = {"profile": self.name, **self.params}
        if self.name == "polynomial":
            out["q_min"] = self.q_min
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "PSpec":
        d = dict(d)
        name = d.pop("profile", None)
        if name == "polynomial":
            return cls.polynomial(d["coeffs"], d.get("q_min"))
        if name not in PRESETS:
            raise InvalidParameter(f"unknown profile {name!r}; choose from {sorted(PRESETS) + ['polynomial']}")
        return PRESETS[name](**{k: float(v) for k, v in d.items()})

    def slope_at_min(self) -> float:
        return float(self.P1(self.q_min))


PRESETS = {"circle": PSpec.circle, "tanh_sq": PSpec.tanh_sq, "arctan_trig": PSpec.arctan_trig}


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class PValidation:
    passed: bool
    violations: list
    p_at_one: float
    slope_at_one: float
    messages: list = field(default_factory=list)


def validate_p(p: PSpec, n_check: int = 257, slack: float = 1e-12) -> PValidation:
    """Check 0 <= P <= 1 - q^2 at Chebyshev points, P(1) = 0 and P'(1) = -2."""
    k = np.arange(n_check)
    q = p.q_min + (1 - p.q_min) * 0.5 * (1 - np.cos(np.pi * (k + 0.5) / n_check))
    vals = np.asarray(p.P(q), dtype=float)
    bad = (vals < -slack) | (vals > (1 - q) * (1 + q) + slack) | ~np.isfinite(vals)
    violations = [float(x) for x in q[bad]]
    messages = []
    if violations:
        messages.append(f"bound 0 <= P <= 1 - q^2 fails at {len(violations)} of {n_check} points")
    p1 = float(p.P(1.0))
    if abs(p1) > 1e-10:
        messages.append(f"P(1) = {p1:.3e}, expected 0")
    delta = 1e-5
    # second-order backward difference at the endpoint
    slope = (3 * p1 - 4 * float(p.P(1 - delta)) + float(p.P(1 - 2 * delta))) / (2 * delta)
    if abs(slope + 2) > 1e-6:
        messages.append(f"P'(1) = {slope:.9g}, expected -2")
    return PValidation(not messages, violations, p1, slope, messages)


# ---------------------------------------------------------------------------
# W integral


def _f_top(p: PSpec):
    """dW/du for q = 1 - u^2."""
    def f(u):
        u = np.asarray(u, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            val = 2 * u / np.sqrt(p.P_top(u * u))
        return np.where(u == 0, math.sqrt(2.0), val)
    return f


def _f_bottom(p: PSpec):
    """-dW/dv for q = q_min + v^2."""
    slope = abs(float(p.P1(p.q_min)))
    limit = 2 / math.sqrt(slope) if slope > 0 else np.inf

    def f(v):
        v = np.asarray(v, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            val = 2 * v / np.sqrt(p.P_bottom(v * v))
        return np.where(v == 0, limit, val)
    return f


def _interior_zero(p: PSpec, lo: float, hi: float, n: int = 4097) -> float | None:
    """Largest q in (lo, hi) where P touches zero, if any."""
    if hi - lo < 1e-12:
        return None
    q = np.linspace(lo, hi, n)[1:-1]
    vals = np.asarray(p.P(q), dtype=float)
    scale = max(float(np.max(np.abs(vals))), 1e-300)
    if np.any(vals < 0):
        return float(q[vals < 0].max())
    idx = np.nonzero((vals[1:-1] <= vals[:-2]) & (vals[1:-1] <= vals[2:]) & (vals[1:-1] < 1e-6 * scale))[0] + 1
    best = None
    for i in idx[::-1]:
        res = minimize_scalar(lambda x: float(p.P(x)), bounds=(q[i - 1], q[i + 1]), method="bounded",
                              options={"xatol": 1e-14})
        if abs(res.fun) < 1e-14 * scale:
            best = float(res.x)
            break
    return best


def _is_double_zero(p: PSpec, q_star: float) -> bool:
    return abs(float(p.P1(q_star))) < DOUBLE_ZERO_SLOPE


def w_integral(p: PSpec, q: float, tol: float = 1e-12) -> float:
    """W(q) = int_q^1 dq'/sqrt(P(q')) for q in [q_min, 1]."""
    q = float(q)
    if q > 1.0 or q < p.q_min:
        raise OutOfRange(f"q = {q} outside the profile domain [{p.q_min}, 1]")
    if q == 1.0:
        return 0.0
    z = _interior_zero(p, max(q, p.q_min), 1.0)
    if z is not None and z > q:
        if _is_double_zero(p, z):
            raise NonIntegrable(f"P has a zero of order >= 2 at q = {z:.12g}; W diverges there")
        raise NonIntegrable(f"P changes sign at q = {z:.12g}; q never passes it")
    q_split = 0.5 * (1.0 + p.q_min)
    if q >= q_split or _is_double_zero(p, p.q_min):
        # top substitution reaches all the way (a double zero is never reached)
        return _integrate(_f_top(p), 0.0, math.sqrt(1.0 - q), tol)
    upper = _integrate(_f_top(p), 0.0, math.sqrt(1.0 - q_split), tol)
    lower = _integrate(_f_bottom(p), math.sqrt(q - p.q_min), math.sqrt(q_split - p.q_min), tol)
    return upper + lower


def _integrate(f, a: float, b: float, tol: float, pieces: int = 16) -> float:
    """Composite Gauss-Legendre with doubling until two levels agree to tol."""
    prev = None
    for _ in range(12):
        edges = np.linspace(a, b, pieces + 1)
        val = float(np.sum(gauss_legendre(f, edges[:-1], edges[1:], _GL)))
        if prev is not None and abs(val - prev) <= tol:
            return val
        prev, pieces = val, pieces * 2
    return val


# ---------------------------------------------------------------------------
# tables


@dataclass(frozen=True)
class WTable:
    """Tabulated W on one monotone branch plus the continuation state.

    ``q_nodes`` decrease from 1 and ``W_nodes`` increase from 0.  The top part
    is parametrized by u (q = 1 - u^2), the bottom part by v
    (q = q_min + v^2).  ``branch_state`` is the sign of dq/dtau on the current
    branch, which starts at ``tau_offset``.
    """

    spec: PSpec
    q_nodes: np.ndarray
    W_nodes: np.ndarray
    u_nodes: np.ndarray
    Wu: np.ndarray
    v_nodes: np.ndarray
    Wv: np.ndarray
    q_end: float
    W_end: float
    end_order: int            # 1: simple turning point, 2: asymptotic approach, 0: plain edge
    branch_state: int = -1
    tau_offset: float = 0.0
    turns: int = 0

    @property
    def half_period(self) -> float:
        return self.W_end

    @property
    def period(self) -> float | None:
        return 2.0 * self.W_end if self.end_order == 1 else None


def _cumulative(f, nodes, tol):
    """Integrals of f between consecutive nodes, refined where GL orders disagree."""
    a, b = nodes[:-1], nodes[1:]
    fine = gauss_legendre(f, a, b, _GL)
    coarse = gauss_legendre(f, a, b, _GL // 2)
    share = tol * np.abs(b - a) / max(abs(nodes[-1] - nodes[0]), 1e-300)
    bad = np.nonzero(np.abs(fine - coarse) > share)[0]
    for i in bad:
        sub = np.linspace(a[i], b[i], 17)
        fine[i] = float(np.sum(gauss_legendre(f, sub[:-1], sub[1:], _GL)))
    return np.concatenate([[0.0], np.cumsum(fine)])


def build_table(p: PSpec, n_nodes: int = N_NODES, tol: float = 1e-12) -> WTable:
    """Tabulate W on [q_end, 1], where q_end is q_min or an interior zero of P."""
    z = _interior_zero(p, p.q_min, 1.0)
    q_end = p.q_min if z is None else z
    if z is not None and not _is_double_zero(p, z):
        raise NonIntegrable(f"P changes sign at q = {z:.12g} inside the domain")
    p_end = float(p.P(q_end)) if z is None else 0.0
    if z is not None:
        order = 2
    elif abs(p_end) > 1e-12:
        order = 0
    else:
        order = 2 if _is_double_zero(p, q_end) else 1
    if z is not None:
        # re-anchor the bottom substitution on the interior zero
        p = replace(p, q_min=q_end, P_bottom=None)

    half = n_nodes // 2
    q_split = 0.5 * (1.0 + q_end)
    u_s = math.sqrt(1.0 - q_split)
    v_s = math.sqrt(q_split - q_end)
    u_nodes = np.linspace(0.0, u_s, half + 1)
    Wu = _cumulative(_f_top(p), u_nodes, tol)
    if order == 2:
        # W ~ -log v: geometric spacing down to where the table stops
        v_nodes = np.geomspace(v_s, v_s * 1e-7, half + 1)
    else:
        v_nodes = np.linspace(v_s, 0.0, half + 1)
    Wv = Wu[-1] + _cumulative(lambda v: -_f_bottom(p)(v), v_nodes, tol)
    q_nodes = np.concatenate([1.0 - u_nodes ** 2, (q_end + v_nodes ** 2)[1:]])
    W_nodes = np.concatenate([Wu, Wv[1:]])
    return WTable(p, q_nodes, W_nodes, u_nodes, Wu, v_nodes, Wv,
                  float(q_nodes[-1]), float(W_nodes[-1]), order)


_CHUNK = 8192


def _solve_branch(table: WTable, w):
    """q, 1 - q and q - q_end with W(q) = w on the descending branch.

    The two offsets are exact squares of the substitution variable where that
    part of the table was used and NaN elsewhere.
    """
    w = np.asarray(w, dtype=float)
    if w.size > _CHUNK:
        flat = w.ravel()
        parts = [_solve_chunk(table, flat[i:i + _CHUNK]) for i in range(0, flat.size, _CHUNK)]
        return tuple(np.concatenate(c).reshape(w.shape) for c in zip(*parts))
    return _solve_chunk(table, w)


def _solve_chunk(table: WTable, w):
    q = np.empty_like(w)
    d_top = np.full_like(w, np.nan)      # 1 - q where known precisely
    d_bot = np.full_like(w, np.nan)      # q - q_end where known precisely
    p = table.spec
    series = w < SERIES_TAU
    u = w[series] / math.sqrt(2.0)
    q[series] = 1.0 - u * u
    d_top[series] = u * u

    top = ~series & (w <= table.Wu[-1])
    if np.any(top):
        f = _f_top(p)
        i = np.clip(np.searchsorted(table.Wu, w[top]) - 1, 0, table.u_nodes.size - 2)
        lo, hi, w0 = table.u_nodes[i], table.u_nodes[i + 1], table.Wu[i]
        target = w[top]
        u = bracketed_solve(lambda x: w0 + gauss_legendre(f, lo, x, _GL) - target, f, lo, hi, xtol=1e-15)
        q[top] = 1.0 - u * u
        d_top[top] = u * u

    bot = ~series & ~top
    if np.any(bot):
        f = _f_bottom(p)
        i = np.clip(np.searchsorted(table.Wv, w[bot]) - 1, 0, table.v_nodes.size - 2)
        hi, lo, w0 = table.v_nodes[i], table.v_nodes[i + 1], table.Wv[i]
        target = w[bot]
        v = bracketed_solve(lambda x: w0 + gauss_legendre(f, x, hi, _GL) - target,
                            lambda x: -f(x), lo, hi, xtol=1e-15)
        q[bot] = table.q_end + v * v
        d_bot[bot] = v * v
    return q, d_top, d_bot


def invert_w(table: WTable, tau) -> np.ndarray:
    """q on the table's current branch at time ``tau`` (scalar or array)."""
    tau = np.asarray(tau, dtype=float)
    local = tau - table.tau_offset
    if np.any(local < -1e-14) or np.any(local > table.W_end * (1 + 1e-14)):
        raise OutOfRange(
            f"tau outside the current branch [{table.tau_offset:.12g}, {table.tau_offset + table.W_end:.12g}]; "
            "continue through the turning point first")
    local = np.clip(local, 0.0, table.W_end)
    w = local if table.branch_state < 0 else table.W_end - local
    q, _, _ = _solve_branch(table, w)
    return q if q.ndim else float(q)


def q_derivatives_from_p(p: PSpec, q, branch: int = -1):
    """(q', q'') from q'^2 = P(q): q' = branch sqrt(P), q'' = P'(q)/2."""
    q = np.asarray(q, dtype=float)
    q1 = branch * np.sqrt(np.maximum(np.asarray(p.P(q), dtype=float), 0.0))
    q2 = 0.5 * np.asarray(p.P1(q), dtype=float)
    return q1, q2


def continue_through_turning_point(table: WTable, q_star: float) -> WTable:
    """Reflect q at a simple zero of P and start the next monotone branch."""
    end = table.q_end if table.branch_state < 0 else 1.0
    if abs(q_star - end) > 1e-9 * max(1.0, abs(end)):
        raise OutOfRange(f"q_star = {q_star} is not the end of the current branch (q = {end})")
    p = table.spec
    if abs(float(p.P(q_star))) > 1e-10:
        raise OutOfRange(f"P(q_star) = {float(p.P(q_star)):.3e} is not a zero; q cannot turn there")
    if table.branch_state < 0 and table.end_order != 1 or _is_double_zero(p, q_star):
        raise StuckAtZero(f"zero of P at q = {q_star:.12g} has order >= 2; q only approaches it asymptotically")
    return replace(table, branch_state=-table.branch_state,
                   tau_offset=table.tau_offset + table.W_end, turns=table.turns + 1)


def evaluate(table: WTable, tau):
    """(q, q', q'', q + q'') for any tau, continuing periodically where allowed.

    Equivalent to repeated ``continue_through_turning_point`` from the start
    table, but vectorised.  q is even in tau.
    """
    tau = np.asarray(tau, dtype=float)
    s = np.abs(tau)
    sgn = np.where(tau < 0, -1.0, 1.0)
    half = table.W_end
    if table.end_order == 1:
        r = np.mod(s, 2 * half)
        rising = r > half
        w = np.where(rising, 2 * half - r, r)
    else:
        if np.any(s > half * (1 + 1e-14)):
            kind = "approaches a double zero of P" if table.end_order == 2 else "reaches the edge of the profile domain"
            raise OutOfRange(f"|tau| > {half:.6g}: q {kind} and cannot be continued")
        rising = np.zeros(s.shape, dtype=bool)
        w = s
    q, d_top, d_bot = _solve_branch(table, w)
    p = table.spec
    Pq = np.where(np.isfinite(d_top), p.P_top(np.nan_to_num(d_top)),
                  np.where(np.isfinite(d_bot), p.P_bottom(np.nan_to_num(d_bot)), p.P(q)))
    branch = np.where(rising, 1.0, -1.0) * sgn
    q1 = branch * np.sqrt(np.maximum(Pq, 0.0))
    q2 = 0.5 * np.asarray(p.P1(q), dtype=float)
    return q, q1, q2, q + q2


def generated_family(p: PSpec, table: WTable | None = None) -> QFamily:
    """A QFamily whose q comes from numerically inverting W."""
    check = validate_p(p)
    if not check.passed:
        raise InvalidParameter("profile fails validation: " + "; ".join(check.messages))
    table = table or build_table(p)
    # P = 1 - q^2 gives q = cos tau, the saturated case with J = 0
    q = np.linspace(-1.0, 1.0, 257)
    saturated = p.q_min == -1.0 and bool(np.all(np.abs(p.P(q) - (1 - q) * (1 + q)) < 1e-14))
    return QFamily(f"wgen:{p.name}", dict(p.params), lambda t: evaluate(table, t),
                   saturated=saturated, period=table.period, metadata={"table": table})
