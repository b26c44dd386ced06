"""Generator families q(tau) with analytic derivatives and their checks.

Every family evaluator returns ``(q, q', q'', q + q'')`` in dimensionless time.
The last entry is redundant but families compute it without cancellation; it
is the numerator of the control and the factor in ``g' = -2 q' (q + q'')``,
which is how the gap ``g = 1 - q^2 - q'^2`` is rebuilt near saturation events
where direct evaluation loses every significant digit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import mpmath as mp
import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import bisect, brentq

from .core import TimeGrid
from .errors import DomainEmpty, InvalidParameter, NoClosedForm, SingularPoint
from .quadrature import legendre_rule

IC_TOL = 1e-9
SCAN_DENSITY = 200          # scan points per unit tau
GAP_RADIUS = 0.5            # rebuild g by integration this close to an event
_TOUCH_TOL = 1e-11


@dataclass(frozen=True)
class QSample:
    tau: np.ndarray
    q: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    q_plus_q2: np.ndarray

    @property
    def z(self) -> np.ndarray:
        """Phase-plane signal q + i q'."""
        return self.q + 1j * self.q1


@dataclass(frozen=True)
class QFamily:
    name: str
    params: dict
    evaluator: Callable
    closed_form: Callable | None = None
    parity: str = "even"
    saturated: bool = False
    period: float | None = None
    metadata: dict = field(default_factory=dict)

    def sample(self, tau) -> QSample:
        tau = np.asarray(tau, dtype=float)
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            q, q1, q2, lift = self.evaluator(tau)
        return QSample(tau, *(np.broadcast_to(np.asarray(v, dtype=float), tau.shape)
                              for v in (q, q1, q2, lift)))

    def spec(self) -> dict:
        return {"family": self.name, **self.params}


# ---------------------------------------------------------------------------
# built-in families


def family_sinh_exp(a: float) -> QFamily:
    """q = exp(-(2/a) sinh^2(sqrt(a) tau / 2)), any real a <= 2."""
    a = float(a)
    if not a <= 2.0:
        raise InvalidParameter(f"sinh_exp requires a <= 2 (got a = {a})")

    if a > 0:
        r = math.sqrt(a)

        def ev(t):
            y = r * t
            sh_half = np.sinh(0.5 * y)
            u = (2.0 / a) * sh_half ** 2
            du = np.sinh(y) / r
            q = np.exp(-u)
            return q, -du * q, (du ** 2 - np.cosh(y)) * q, q * (du ** 2 - 2.0 * sh_half ** 2)
    elif a == 0:
        def ev(t):
            q = np.exp(-0.5 * t * t)
            return q, -t * q, (t * t - 1.0) * q, t * t * q
    else:
        b = -a
        r = math.sqrt(b)

        def ev(t):
            y = r * t
            s_half = np.sin(0.5 * y)
            u = (2.0 / b) * s_half ** 2
            du = np.sin(y) / r
            q = np.exp(-u)
            return q, -du * q, (du ** 2 - np.cos(y)) * q, q * (du ** 2 + 2.0 * s_half ** 2)

    def closed(t):
        if a == 0:
            # a -> 0 limit of the printed expression
            return t ** 2 / mp.sqrt(mp.exp(t ** 2) - t ** 2 - 1)
        ra = mp.sqrt(mp.mpf(a))
        num = mp.sinh(ra * t) ** 2 / a - 2 * mp.sinh(ra * t / 2) ** 2
        den = mp.sqrt(mp.exp((4 / mp.mpf(a)) * mp.sinh(ra * t / 2) ** 2) - mp.sinh(ra * t) ** 2 / a - 1)
        return mp.re(num / den)

    period = 2 * math.pi / math.sqrt(-a) if a < 0 else None
    return QFamily("sinh_exp", {"a": a}, ev, closed, period=period,
                   metadata={"J0": math.sqrt(2.0 - a)})


def family_gauss_cos(b: float) -> QFamily:
    """q = (exp(-tau^2/2) + b cos tau) / (1 + b), b > -1."""
    b = float(b)
    if not b > -1.0:
        raise InvalidParameter(f"gauss_cos requires b > -1 (got b = {b})")
    norm = 1.0 + b

    def ev(t):
        e = np.exp(-0.5 * t * t)
        c, s = np.cos(t), np.sin(t)
        return ((e + b * c) / norm, (-t * e - b * s) / norm,
                ((t * t - 1.0) * e - b * c) / norm, t * t * e / norm)

    def closed(t):
        chi = 1 - mp.exp(-t ** 2 / 2) * (mp.cos(t) + t * mp.sin(t))
        return t ** 2 * mp.exp(-t ** 2 / 2) / mp.sqrt(1 - (1 + t ** 2) * mp.exp(-t ** 2) + 2 * b * chi)

    return QFamily("gauss_cos", {"b": b}, ev, closed,
                   metadata={"J0": math.sqrt(2.0 / norm), "tail_A": b / norm})


def _sech2(x):
    e = np.exp(-2.0 * np.abs(x))
    return 4.0 * e / (1.0 + e) ** 2


def family_tanh(a: float) -> QFamily:
    """q = 1 - tanh^2(a tau) / (2 a^2), a > 0."""
    a = float(a)
    if not a > 0:
        raise InvalidParameter(f"tanh requires a > 0 (got a = {a})")

    def ev(t):
        x = a * t
        T = np.tanh(x)
        S2 = _sech2(x)
        T2 = T * T
        return (1.0 - T2 / (2 * a * a), -T * S2 / a, S2 * (3.0 * T2 - 1.0),
                T2 * (1.0 + 3.0 * S2 - 1.0 / (2 * a * a)))

    def closed(t):
        x = a * t
        return ((14 * a ** 2 - 1 + (2 * a ** 2 - 1) * mp.cosh(2 * x)) * mp.sech(x) ** 2
                / (2 * mp.coth(x) * mp.sqrt(4 * a ** 2 * (1 - mp.sech(x) ** 4) - mp.tanh(x) ** 2)))

    meta = {}
    if 8 * a * a >= 1:
        meta["J0"] = math.sqrt(8 * a * a - 1)
    if a > 1 / math.sqrt(2):
        meta["asymptote"] = (2 * a * a - 1) / math.sqrt(4 * a * a - 1)
    return QFamily("tanh", {"a": a}, ev, closed, metadata=meta)


def _tan_minus_x(x):
    """tan(x) - x without cancellation for small x."""
    x = np.asarray(x, dtype=float)
    x2 = x * x
    series = x * x2 * (1 / 3 + x2 * (2 / 15 + x2 * (17 / 315 + x2 * (62 / 2835 + x2 * 1382 / 155925))))
    return np.where(np.abs(x) < 0.05, series, np.tan(x) - x)


def family_arctan_trig(a: float) -> QFamily:
    """q = (1/a) tan(arctan a - (2a/(1+a^2)) sin^2(tau/2)), a > 0; period 2 pi."""
    a = float(a)
    if not a > 0:
        raise InvalidParameter(f"arctan_trig requires a > 0 (got a = {a})")
    alpha = math.atan(a)
    kappa = 2 * a / (1 + a * a)
    a2 = a * a
    n = 1 + a2

    def ev(t):
        sig = np.sin(0.5 * t) ** 2
        eps = kappa * sig
        tn = np.tan(eps)
        q = np.tan(alpha - eps) / a
        d = tn * n / (a * (1 + a * tn))          # 1 - q
        e = 2.0 * sig                            # 1 - cos tau
        e_minus_d = (n / a) * (a * eps * tn - _tan_minus_x(eps)) / (1 + a * tn)
        st, ct = np.sin(t), np.cos(t)
        w = 1 + a2 * q * q
        q1 = -st * w / n
        q2 = -ct * w / n - 2 * a2 * q * q1 * st / n
        lift = (e_minus_d + a2 * q * (d + e * q)) / n + 2 * a2 * q * st * st * w / n ** 2
        return q, q1, q2, lift

    return QFamily("arctan_trig", {"a": a}, ev, period=2 * math.pi,
                   metadata={"q_min": math.tan(alpha - kappa) / a})


def family_cos() -> QFamily:
    """q = cos tau: saturates the inequality everywhere and gives J = 0."""
    def ev(t):
        c, s = np.cos(t), np.sin(t)
        return c, -s, -c, np.zeros_like(t)

    return QFamily("cos", {}, ev, saturated=True, period=2 * math.pi)


def custom_family(name: str, fn: Callable, parity: str = "none", lift: Callable | None = None) -> QFamily:
    """Wrap ``fn(tau) -> (q, q', q'')``; q + q'' is formed directly unless given."""
    def ev(t):
        q, q1, q2 = fn(t)
        return q, q1, q2, (lift(t) if lift is not None else q + q2)

    return QFamily(name, {}, ev, parity=parity)


def family_from_samples(tau, q, name: str = "samples") -> QFamily:
    """Cubic-interpolation adapter for a q known only at sample points.

    Derivatives come from the spline and are best-effort: expect O(h^2) error
    in q' and O(h) in q'' for sample spacing h.
    """
    tau = np.asarray(tau, dtype=float)
    spline = CubicSpline(tau, np.asarray(q, dtype=float))
    d1, d2 = spline.derivative(1), spline.derivative(2)

    def ev(t):
        v = spline(t)
        c = d2(t)
        return v, d1(t), c, v + c

    parity = "even" if np.allclose(spline(-tau[tau > 0]), spline(tau[tau > 0]), atol=1e-12) and tau.min() < 0 else "none"
    return QFamily(name, {}, ev, parity=parity)


FAMILIES = {
    "sinh_exp": (family_sinh_exp, ("a",)),
    "gauss_cos": (family_gauss_cos, ("b",)),
    "tanh": (family_tanh, ("a",)),
    "arctan_trig": (family_arctan_trig, ("a",)),
    "cos": (family_cos, ()),
}


def family_from_spec(spec: dict) -> QFamily:
    """Build a family from ``{"family": name, <param>: value, ...}``."""
    spec = dict(spec)
    name = spec.pop("family", None)
    if name not in FAMILIES:
        raise InvalidParameter(f"unknown family {name!r}; choose from {sorted(FAMILIES)}")
    factory, names = FAMILIES[name]
    missing = [p for p in names if p not in spec]
    extra = [k for k in spec if k not in names]
    if missing or extra:
        raise InvalidParameter(f"family {name} takes parameters {list(names)} (missing {missing}, unexpected {extra})")
    return factory(*(float(spec[p]) for p in names))


# ---------------------------------------------------------------------------
# constraints


@dataclass(frozen=True)
class ICReport:
    passed: bool
    residuals: tuple[float, float, float]


def validate_initial_conditions(f: QFamily) -> ICReport:
    s = f.sample(np.array([0.0]))
    res = (abs(s.q[0] - 1.0), abs(s.q1[0]), abs(s.q2[0] + 1.0))
    return ICReport(all(r < IC_TOL for r in res), res)


def direct_gap(s: QSample) -> np.ndarray:
    return (1.0 - s.q) * (1.0 + s.q) - s.q1 ** 2


def gap(f: QFamily, tau, anchors=(), radius: float = GAP_RADIUS) -> np.ndarray:
    """g = 1 - q^2 - q'^2, integrated from the nearest anchor where g = 0."""
    tau = np.asarray(tau, dtype=float)
    g = direct_gap(f.sample(tau))
    if len(anchors) == 0 or f.saturated:
        return g
    anchors = np.asarray(sorted(anchors), dtype=float)
    idx = np.clip(np.searchsorted(anchors, tau), 1, max(anchors.size - 1, 1))
    lo = anchors[idx - 1]
    hi = anchors[np.minimum(idx, anchors.size - 1)]
    nearest = np.where(np.abs(tau - lo) <= np.abs(tau - hi), lo, hi)
    near = np.abs(tau - nearest) < radius
    if np.any(near):
        x, w = legendre_rule(40)
        t0, t1 = nearest[near], tau[near]
        pts = t0[:, None] + (t1 - t0)[:, None] * x
        s = f.sample(pts)
        g[near] = np.sum(-2.0 * s.q1 * s.q_plus_q2 * w, axis=-1) * (t1 - t0)
    return g


def gap_derivative(f: QFamily, tau) -> np.ndarray:
    s = f.sample(tau)
    return -2.0 * s.q1 * s.q_plus_q2


@dataclass(frozen=True)
class SaturationEvent:
    tau: float
    order: int          # 2 when q' != 0 at the event (g ~ s^2), else 4


@dataclass
class ValidityReport:
    intervals: list[tuple[float, float]]
    saturation_events: list[SaturationEvent]
    boundaries: list[float]
    localized: bool
    positive: bool
    bounded: bool
    identically_saturated: bool = False

    @property
    def event_taus(self) -> list[float]:
        return [e.tau for e in self.saturation_events]

    def interval_containing(self, tau: float) -> tuple[float, float] | None:
        for lo, hi in self.intervals:
            if lo - 1e-12 <= tau <= hi + 1e-12:
                return lo, hi
        return None

    def describe(self) -> str:
        if not self.intervals:
            return "no admissible interval"
        return ", ".join(f"[{lo:.6g}, {hi:.6g}]" for lo, hi in self.intervals)


def _refine_touch(f: QFamily, lo: float, hi: float, guess: float) -> float:
    dg = lambda t: float(gap_derivative(f, np.array([t]))[0])
    a, b = dg(lo), dg(hi)
    if a == 0:
        return lo
    if b == 0:
        return hi
    if a * b < 0:
        try:
            return brentq(dg, lo, hi, xtol=1e-15, rtol=1e-12)
        except RuntimeError:
            # g' ~ s^3 at order-4 touches is flat enough to stall brentq
            return bisect(dg, lo, hi, xtol=1e-15, rtol=1e-12)
    return guess


def validity_domain(f: QFamily, grid: TimeGrid) -> ValidityReport:
    """Locate where 1 - q^2 - q'^2 >= 0 on the span of ``grid``."""
    t_lo, t_hi = grid.span
    if f.saturated:
        return ValidityReport([(t_lo, t_hi)], [SaturationEvent(0.0, 4)], [], False, True, False,
                              identically_saturated=True)
    n = max(int(math.ceil((t_hi - t_lo) * SCAN_DENSITY)) + 1, 3)
    ts = np.linspace(t_lo, t_hi, n)
    if t_lo < 0 < t_hi:
        ts = np.union1d(ts, [0.0])
    s = f.sample(ts)
    g = direct_gap(s)
    gfun = lambda t: float(direct_gap(f.sample(np.array([t])))[0])

    # touch events: near-zero local minima of g, refined on g'
    events: list[float] = []
    if t_lo <= 0.0 <= t_hi:
        events.append(0.0)
    dt = ts[1] - ts[0]
    for i in range(ts.size):
        # endpoints count too: a grid may stop exactly on an event
        left = g[i - 1] if i > 0 else float(gfun(ts[0] - dt))
        right = g[i + 1] if i < ts.size - 1 else float(gfun(ts[-1] + dt))
        if g[i] <= left and g[i] <= right and -1e-12 <= g[i] < 1e-7:
            t_star = _refine_touch(f, ts[i] - dt, ts[i] + dt, ts[i])
            if abs(gfun(t_star)) < _TOUCH_TOL and all(abs(t_star - e) > 1e-6 for e in events):
                events.append(t_star)
    events.sort()

    # boundaries: sign changes of g
    neg = g < -1e-13
    boundaries = []
    for i in np.nonzero(neg[1:] != neg[:-1])[0]:
        a, b = ts[i], ts[i + 1]
        if any(a - 1e-9 <= e <= b + 1e-9 for e in events):
            continue
        try:
            boundaries.append(brentq(gfun, a, b, xtol=1e-15, rtol=1e-12))
        except ValueError:
            boundaries.append(a if neg[i + 1] else b)

    intervals = []
    start = None
    for i, t in enumerate(ts):
        if not neg[i] and start is None:
            start = t
            for bnd in boundaries:
                if i > 0 and ts[i - 1] <= bnd <= t:
                    start = bnd
        if neg[i] and start is not None:
            end = ts[i - 1]
            for bnd in boundaries:
                if ts[i - 1] <= bnd <= t:
                    end = bnd
            intervals.append((float(start), float(end)))
            start = None
    if start is not None:
        intervals.append((float(start), float(t_hi)))
    # an isolated valid sample (e.g. only tau = 0) is not an interval
    intervals = [(lo, hi) for lo, hi in intervals if hi > lo]

    side = ts > 0 if t_hi > 0 else ts < 0
    if np.any(side) and np.all(neg[side]):
        raise DomainEmpty(f"1 - q^2 - q'^2 < 0 for every sampled tau {'> 0' if t_hi > 0 else '< 0'} "
                          f"(family {f.name} {f.params})")

    orders = []
    for e in events:
        q1 = abs(float(f.sample(np.array([e])).q1[0]))
        orders.append(2 if q1 > 1e-6 else 4)

    valid = ~neg
    tail = min(1.0, 0.1 * (t_hi - t_lo))
    cond1 = (np.abs(s.q) < 1e-3) & (np.abs(s.q2) < 1e-3)
    cond2 = np.abs(s.q_plus_q2) < 1e-3
    left, right = ts <= t_lo + tail, ts >= t_hi - tail
    localized = bool(all(np.all(cond1[m]) or np.all(cond2[m]) for m in (left, right)))
    positive = bool(np.all(s.q_plus_q2[valid] >= -1e-12))
    interior_events = [e for e in events if e > 0] + [b for b in boundaries if b > 0]
    pos = ts > 1e-9
    bounded = bool(not interior_events and np.all(g[pos] > 0))
    return ValidityReport(intervals, [SaturationEvent(e, o) for e, o in zip(events, orders)],
                          boundaries, localized, positive, bounded)


# ---------------------------------------------------------------------------
# closed-form oracle


def closed_form_J(f: QFamily, tau, eps_singular: float = 1e-3, dps: int = 40):
    """Evaluate the family's printed J/h expression in extended precision.

    Raises SingularPoint within ``eps_singular`` of a saturation point, where
    the expression is 0/0 and the caller must use the limit path instead.
    """
    if f.closed_form is None:
        raise NoClosedForm(f"family {f.name} has no printed closed form")
    scalar = np.ndim(tau) == 0
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    period = f.period
    for t in taus:
        d = abs(t) if period is None else abs(t - period * round(t / period))
        if d < eps_singular:
            raise SingularPoint(f"tau = {t} is within {eps_singular} of a saturation point")
    with mp.workdps(dps):
        out = np.array([float(f.closed_form(mp.mpf(float(t)))) for t in taus])
    return float(out[0]) if scalar else out
