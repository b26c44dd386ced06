"""Vectorised quadrature and bracketed inversion helpers."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

_NOISE = 64 * np.finfo(float).eps


@lru_cache(maxsize=None)
def legendre_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_legendre(f, a, b, n: int = 20) -> np.ndarray:
    """Fixed-order rule for many intervals at once.

    ``a`` and ``b`` broadcast together; ``f`` must accept an array of shape
    ``a.shape + (n,)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x, w = legendre_rule(n)
    width = (b - a)[..., None]
    pts = a[..., None] + width * x
    return np.sum(f(pts) * w, axis=-1) * (b - a)


def adaptive_simpson(f, edges, tol: float = 1e-12, max_depth: int = 40) -> np.ndarray:
    """Integrals of ``f`` over each ``[edges[i], edges[i+1]]``.

    Simpson's rule with Richardson correction, bisecting every interval whose
    two-level estimate disagrees by more than its share of ``tol`` (shares are
    proportional to interval width).  Refinement also stops once the estimate
    stalls at the integrand's noise level.  ``f`` is called on 1-d arrays.
    """
    edges = np.asarray(edges, dtype=float)
    n = edges.size - 1
    out = np.zeros(n)
    if n <= 0:
        return out
    a, b = edges[:-1], edges[1:]
    span = max(float(np.sum(np.abs(b - a))), np.finfo(float).tiny)
    owner = np.arange(n)
    m = 0.5 * (a + b)
    fa, fm, fb = np.split(f(np.concatenate([a, m, b])), 3)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    local_tol = tol * np.abs(b - a) / span
    parent = np.full(n, np.inf)

    for depth in range(max_depth):
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = np.split(f(np.concatenate([lm, rm])), 2)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        # accept at the rounding-noise floor too, or noisy integrands never converge
        noise = _NOISE * (b - a) * (np.abs(fa) + 4.0 * np.abs(fm) + np.abs(fb)) / 6.0
        done = (np.abs(delta) <= 15.0 * local_tol) | (np.abs(delta) <= noise)
        # smooth integrands shrink delta ~16x per level; stalling means noise
        done |= (depth >= 8) & (np.abs(delta) > 0.25 * parent)
        np.add.at(out, owner[done], (left + right + delta / 15.0)[done])
        todo = ~done
        if not np.any(todo):
            return out
        a, m, b = a[todo], m[todo], b[todo]
        fa, fm, fb = fa[todo], fm[todo], fb[todo]
        lm, rm, flm, frm = lm[todo], rm[todo], flm[todo], frm[todo]
        left, right = left[todo], right[todo]
        owner = owner[todo]
        local_tol = local_tol[todo] / 2.0
        parent = np.abs(delta[todo]) / 2.0
        a, m, b, fa, fm, fb, whole, owner, local_tol, parent = (
            np.concatenate([a, m]), np.concatenate([lm, rm]), np.concatenate([m, b]),
            np.concatenate([fa, fm]), np.concatenate([flm, frm]), np.concatenate([fm, fb]),
            np.concatenate([left, right]), np.concatenate([owner, owner]),
            np.concatenate([local_tol, local_tol]), np.concatenate([parent, parent]),
        )
    # depth exhausted: keep the best available estimate
    np.add.at(out, owner, whole)
    return out


def bracketed_solve(g, dg, lo, hi, xtol: float = 1e-14, max_iter: int = 200) -> np.ndarray:
    """Solve ``g(x) = 0`` elementwise for monotone ``g`` bracketed by [lo, hi].

    Newton steps that leave the current bracket are replaced by bisection, so
    convergence is guaranteed whenever ``g(lo)`` and ``g(hi)`` differ in sign.
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    glo = g(lo)
    sign_lo = np.where(np.isfinite(glo) & (glo != 0), np.sign(glo), -np.sign(g(hi)))
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        gx = g(x)
        same = np.sign(gx) == sign_lo
        lo = np.where(same, x, lo)
        hi = np.where(same, hi, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = gx / dg(x)
        newton = x - step
        ok = np.isfinite(newton) & (newton > np.minimum(lo, hi)) & (newton < np.maximum(lo, hi))
        x_new = np.where(ok, newton, 0.5 * (lo + hi))
        x_new = np.where(gx == 0, x, x_new)
        if np.all(np.abs(x_new - x) <= xtol * np.maximum(1.0, np.abs(x))):
            return x_new
        x = x_new
    return x
