"""Shared conventions: parameters, time grids and SU(2) algebra.

Time is dimensionless throughout (``tau = h * t``) and the control amplitude is
carried as ``J / h``.  A 2x2 special unitary is stored as the pair
``(u11, u21)`` standing for::

    [[u11, -conj(u21)],
     [u21,  conj(u11)]]
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IndeterminateAxis, InvalidParameter

ANGLE_FLOOR = 1e-9
UNITARITY_TOL = 1e-12

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class ModelParams:
    """Physical splitting and numerical tolerances.

    ``mode`` selects how the sign of cos(2 Phi) is chosen: ``"literal"`` keeps
    the positive square root everywhere, ``"signed"`` lets it flip at interior
    saturation events so that it stays differentiable.
    """

    h: float = 1.0
    tol_quad: float = 1e-12
    tol_verify: float = 1e-8
    eps_singular: float = 1e-3
    mode: str = "literal"
    zero_splitting: bool = False

    def __post_init__(self):
        if self.zero_splitting:
            if self.h != 0.0:
                raise InvalidParameter("zero-splitting mode requires h = 0")
        elif not self.h > 0:
            raise InvalidParameter(f"h must be > 0 (got {self.h}); use zero_splitting=True for h = 0")
        for name in ("tol_quad", "tol_verify", "eps_singular"):
            if not getattr(self, name) > 0:
                raise InvalidParameter(f"{name} must be > 0")
        if self.mode not in ("literal", "signed"):
            raise InvalidParameter(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing dimensionless sample times (may include tau < 0)."""

    tau: np.ndarray

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float).ravel()
        if tau.size == 0:
            raise InvalidParameter("empty time grid")
        if tau.size > 1 and not np.all(np.diff(tau) > 0):
            raise InvalidParameter("time grid must be strictly increasing")
        if not np.all(np.isfinite(tau)):
            raise InvalidParameter("time grid contains non-finite values")
        object.__setattr__(self, "tau", tau)

    @classmethod
    def uniform(cls, tau_min: float, tau_max: float, step: float) -> "TimeGrid":
        n = int(round((tau_max - tau_min) / step))
        if n < 1:
            raise InvalidParameter("grid needs tau_max > tau_min and step <= span")
        return cls(np.linspace(tau_min, tau_max, n + 1))

    def __len__(self):
        return self.tau.size

    @property
    def span(self) -> tuple[float, float]:
        return float(self.tau[0]), float(self.tau[-1])


@dataclass(frozen=True)
class Unitary2:
    u11: complex
    u21: complex

    def __post_init__(self):
        u11, u21 = complex(self.u11), complex(self.u21)
        defect = abs(abs(u11) ** 2 + abs(u21) ** 2 - 1.0)
        if defect > UNITARITY_TOL:
            raise InvalidParameter(f"|u11|^2 + |u21|^2 deviates from 1 by {defect:.3e}")
        object.__setattr__(self, "u11", u11)
        object.__setattr__(self, "u21", u21)

    @classmethod
    def identity(cls) -> "Unitary2":
        return cls(1.0, 0.0)

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Unitary2":
        m = np.asarray(m, dtype=complex)
        det = np.linalg.det(m)
        m = m / np.sqrt(det)
        return cls(m[0, 0], m[1, 0])

    def matrix(self) -> np.ndarray:
        return np.array([[self.u11, -self.u21.conjugate()],
                         [self.u21, self.u11.conjugate()]])

    def __matmul__(self, other: "Unitary2") -> "Unitary2":
        return compose(self, other)


@dataclass(frozen=True)
class RotationSpec:
    """Axis and angle of ``exp(-i angle (n . sigma) / 2)``.

    ``axis`` is ``None`` when the angle is below ``ANGLE_FLOOR``.
    """

    axis: tuple[float, float, float] | None
    angle: float
    raw: tuple[float, float, float] = field(default=(0.0, 0.0, 0.0), compare=False)


def as_matrix(u) -> np.ndarray:
    if isinstance(u, Unitary2):
        return u.matrix()
    return np.asarray(u, dtype=complex)


def compose(U: Unitary2, V: Unitary2) -> Unitary2:
    a, b = U.u11, U.u21
    c, d = V.u11, V.u21
    u11 = a * c - b.conjugate() * d
    u21 = b * c + a.conjugate() * d
    # renormalise the O(eps) drift so long products stay inside the invariant
    norm = math.sqrt(abs(u11) ** 2 + abs(u21) ** 2)
    return Unitary2(u11 / norm, u21 / norm)


def dagger(U: Unitary2) -> Unitary2:
    return Unitary2(U.u11.conjugate(), -U.u21)


def infidelity(U, V) -> float:
    """``1 - |tr(U^dagger V)| / 2``; accepts ``Unitary2`` or 2x2 arrays."""
    if isinstance(U, Unitary2) and isinstance(V, Unitary2):
        overlap = abs((U.u11.conjugate() * V.u11 + U.u21.conjugate() * V.u21).real)
    else:
        overlap = abs(np.trace(as_matrix(U).conj().T @ as_matrix(V))) / 2.0
    return float(min(1.0, max(0.0, 1.0 - overlap)))


def infidelity_arrays(u11a, u21a, u11b, u21b) -> np.ndarray:
    """Vectorised ``infidelity`` for stacks of (u11, u21) pairs."""
    overlap = np.abs((np.conj(u11a) * u11b + np.conj(u21a) * u21b).real)
    return np.clip(1.0 - overlap, 0.0, 1.0)


def rotation(axis, angle: float) -> Unitary2:
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    return Unitary2(complex(c, -s * n[2]), complex(s * n[1], -s * n[0]))


def rx(angle: float) -> Unitary2:
    return rotation((1.0, 0.0, 0.0), angle)


def rz(angle: float) -> Unitary2:
    return rotation((0.0, 0.0, 1.0), angle)


def axis_angle(U: Unitary2) -> RotationSpec:
    """Decompose ``U = exp(-i theta (n . sigma) / 2)`` with theta in [0, 2 pi).

    Raises IndeterminateAxis for angles below ``ANGLE_FLOOR``; the exception
    carries the ``RotationSpec`` with ``axis=None`` as ``args[1]``.
    """
    # u11 = cos(theta/2) - i nz sin(theta/2);  u21 = sin(theta/2) (ny - i nx)
    v = (-U.u21.imag, U.u21.real, -U.u11.imag)
    s = math.sqrt(v[0] ** 2 + v[1] ** 2 + v[2] ** 2)
    half = math.atan2(s, U.u11.real)
    angle = 2.0 * half
    if angle < ANGLE_FLOOR:
        spec = RotationSpec(None, angle, v)
        raise IndeterminateAxis(f"rotation angle {angle:.3e} below floor {ANGLE_FLOOR}", spec)
    return RotationSpec((v[0] / s, v[1] / s, v[2] / s), angle, v)


def unitarity_defect(u11, u21) -> np.ndarray:
    return np.abs(np.abs(u11) ** 2 + np.abs(u21) ** 2 - 1.0)


def pauli_traces(U: Unitary2) -> dict[str, complex]:
    """``tr(U sigma_k)`` for k = x, y, z."""
    return {
        "x": 2j * U.u21.imag,
        "y": -2j * U.u21.real,
        "z": 2j * U.u11.imag,
    }
