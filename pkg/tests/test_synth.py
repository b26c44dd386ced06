import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pulseforge.core import ModelParams, TimeGrid, infidelity_arrays, unitarity_defect
from pulseforge.errors import InitialConditionError, InvalidParameter, OriginCrossing, OutsideDomain
from pulseforge.qfamilies import (custom_family, family_arctan_trig, family_cos, family_gauss_cos, family_sinh_exp,
                                  family_tanh)
from pulseforge.synth import envelope, evolution_at, phase_F, synthesize, synthesize_zero_splitting, two_axis_lift
from pulseforge.verify import propagate_fields


def at(sol, tau):
    return int(np.argmin(np.abs(sol.grid.tau - tau)))


def test_gauss_frames_spot_values(gauss0):
    i = at(gauss0, 1.0)
    f = gauss0.frames
    assert f.F[i] == pytest.approx(-math.pi / 4, abs=1e-12)
    assert f.s2phi[i] == pytest.approx(math.sqrt(2 / math.e), abs=1e-15)
    assert f.c2phi[i] == pytest.approx(math.sqrt(1 - 2 / math.e), abs=1e-12)
    j0 = at(gauss0, 0.0)
    assert abs(f.F[j0]) < 1e-15 and f.s2phi[j0] == 1.0 and abs(f.c2phi[j0]) < 1e-12
    assert f.Jh[j0] == pytest.approx(math.sqrt(2), abs=1e-12)
    assert gauss0.u11[j0] == 1.0 and gauss0.u21[j0] == 0.0


def test_gauss_K_against_mpmath_quadrature(gauss0):
    """K(1) = int_0^1 q (q + q'' + J) / (2 |z|^2) with J from the printed closed form."""
    def kdot(t):
        e = mp.exp(-t * t / 2)
        J = t * t * e / mp.sqrt(1 - (1 + t * t) * mp.exp(-t * t))
        return e * (t * t * e + J) / (2 * (e * e * (1 + t * t)))

    with mp.workdps(40):
        eps = mp.mpf("1e-4")
        K1 = float(mp.quad(kdot, [eps, 0.5, 1]) + eps * mp.sqrt(2) / 2)
    assert gauss0.frames.K[at(gauss0, 1.0)] == pytest.approx(K1, abs=1e-10)


def test_K_is_independent_of_the_query_set():
    f = family_gauss_cos(0.5)
    a = synthesize(f, ModelParams(), TimeGrid.uniform(-6, 6, 1e-2))
    b = synthesize(f, ModelParams(), TimeGrid.uniform(-6, 6, 5e-3))
    np.testing.assert_allclose(a.frames.K, b.frames.K[::2], atol=1e-11)
    u11, u21 = evolution_at(f, np.array([-3.3, 1.7, 5.0]))
    for t, x, y in zip((-3.3, 1.7, 5.0), u11, u21):
        U = b.at(t)
        assert abs(U.u11 - x) < 1e-11 and abs(U.u21 - y) < 1e-11


def test_cos_is_free_x_precession():
    sol = synthesize(family_cos(), ModelParams(), TimeGrid.uniform(-5, 5, 0.05))
    t = sol.grid.tau
    assert np.all(sol.frames.Jh == 0) and np.all(sol.frames.K == 0)
    np.testing.assert_allclose(sol.frames.F, -t, atol=1e-12)
    np.testing.assert_allclose(sol.frames.s2phi, 1.0)
    np.testing.assert_allclose(sol.u11, np.cos(t / 2), atol=1e-15)
    np.testing.assert_allclose(sol.u21, -1j * np.sin(t / 2), atol=1e-15)


def test_zero_splitting_constant_J_is_linear():
    t = np.linspace(-2, 3, 51)
    sol = synthesize_zero_splitting(lambda x: 0.8 + 0 * x, t)
    np.testing.assert_allclose(sol.frames.K, 0.4 * t, atol=1e-14)
    np.testing.assert_allclose(sol.u11, np.exp(-0.4j * t), atol=1e-14)
    assert np.all(sol.u21 == 0)


@pytest.mark.parametrize("f", [family_gauss_cos(0.0), family_gauss_cos(2.0), family_sinh_exp(2 / 3),
                               family_tanh(1.0), family_arctan_trig(0.5)], ids=lambda f: f"{f.name}-{f.params}")
def test_solution_invariants(f):
    sol = synthesize(f, ModelParams(), TimeGrid.uniform(-6, 6, 1e-2))
    fr = sol.frames
    assert np.max(unitarity_defect(sol.u11, sol.u21)) < 1e-10
    assert np.max(np.abs(fr.s2phi ** 2 + fr.c2phi ** 2 - 1)) < 1e-10
    np.testing.assert_allclose(fr.Jh, fr.Jh[::-1], atol=1e-9)           # even q -> even J
    assert np.max(np.abs(np.diff(fr.F))) < math.pi / 2
    assert np.max(np.abs(np.diff(fr.K))) < math.pi / 2
    # U(-tau) is the entrywise conjugate of U(tau) for even pulses
    np.testing.assert_allclose(sol.u11[::-1], np.conj(sol.u11), atol=1e-12)
    np.testing.assert_allclose(sol.u21[::-1], np.conj(sol.u21), atol=1e-12)


def test_periodic_control():
    sol = synthesize(family_sinh_exp(-1.0), ModelParams(), TimeGrid.uniform(0, 4 * math.pi, 2 * math.pi / 400))
    J = sol.frames.Jh
    np.testing.assert_allclose(J[:401], J[400:], atol=1e-9)


def test_modes_agree_without_sign_changes():
    grid = TimeGrid.uniform(-1, 4 * math.pi + 1, 1e-2)
    lit = synthesize(family_sinh_exp(-1.0), ModelParams(mode="literal"), grid)
    sig = synthesize(family_sinh_exp(-1.0), ModelParams(mode="signed"), grid)
    np.testing.assert_allclose(lit.frames.Jh, sig.frames.Jh, atol=1e-12)


def test_deterministic():
    a = synthesize(family_tanh(2.0), ModelParams(), TimeGrid.uniform(-3, 3, 1e-2))
    b = synthesize(family_tanh(2.0), ModelParams(), TimeGrid.uniform(-3, 3, 1e-2))
    assert np.array_equal(a.u11, b.u11) and np.array_equal(a.frames.K, b.frames.K)


def test_synthesis_errors():
    with pytest.raises(InitialConditionError):
        synthesize(custom_family("bad", lambda t: (1 - t * t, -2 * t, -2 + 0 * t)))
    with pytest.raises(OutsideDomain):
        synthesize(family_tanh(0.4), ModelParams(), TimeGrid.uniform(-3, 3, 1e-2))
    with pytest.raises(InvalidParameter):
        synthesize(family_cos(), ModelParams(h=0.0, zero_splitting=True))
    with pytest.raises(OriginCrossing):
        phase_F(family_sinh_exp(5 / 3), np.linspace(0, 30, 301))


def test_envelope_bound():
    s = family_gauss_cos(0.0).sample(np.array([0.0, 1.0]))
    np.testing.assert_allclose(envelope(s), [1.0, math.sqrt(2 / math.e)])


@given(st.floats(-0.9, 3.0))
def test_gauss_J0_limit(b):
    sol = synthesize(family_gauss_cos(b), ModelParams(), TimeGrid.uniform(-0.01, 0.01, 1e-3))
    assert float(sol.control(np.array([0.0]))[0]) == pytest.approx(math.sqrt(2 / (1 + b)), abs=1e-6)


def test_sinh_exp_a2_has_zero_J0():
    sol = synthesize(family_sinh_exp(2.0), ModelParams(), TimeGrid.uniform(-0.01, 0.01, 1e-3))
    assert abs(float(sol.control(np.array([0.0]))[0])) < 1e-6


# ---------------------------------------------------------------- two-axis lift

def test_two_axis_lift(gauss0):
    lift = two_axis_lift(gauss0, 0.0)
    np.testing.assert_array_equal(lift.evolution(gauss0)[0], gauss0.u11)
    bx, by, bz = lift.fields(gauss0.grid.tau)
    assert np.all(bx == 1.0) and np.all(by == 0.0)
    lift = two_axis_lift(gauss0, 0.5)
    a, b = lift.evolution(gauss0)
    n11, n21 = propagate_fields(lift.fields, gauss0.grid.tau)
    assert np.max(infidelity_arrays(a, b, n11, n21)) < 1e-9


def test_two_axis_lift_free_precession():
    sol = synthesize(family_cos(), ModelParams(), TimeGrid.uniform(-4, 4, 0.05))
    a, b = two_axis_lift(sol, 0.3).evolution(sol)
    t = sol.grid.tau
    # only a 0.7 x-field remains
    np.testing.assert_allclose(a, np.cos(0.35 * t), atol=1e-14)
    np.testing.assert_allclose(b, -1j * np.sin(0.35 * t), atol=1e-14)
