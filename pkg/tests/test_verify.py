import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from pulseforge.core import SIGMA_X, SIGMA_Z, ModelParams, TimeGrid
from pulseforge.errors import GridTooCoarse, InvalidParameter, StepTooLarge
from pulseforge.qfamilies import family_cos, family_gauss_cos, family_sinh_exp
from pulseforge.synth import synthesize
from pulseforge.verify import PropagatorConfig, compare, ode_residual, propagate_fields, propagate_numeric


def test_config_validation():
    for kw in ({"step": 0.0}, {"scheme": 3}, {"substeps": 0}):
        with pytest.raises(InvalidParameter):
            PropagatorConfig(**kw)


def test_zero_J_is_exact_precession():
    grid = TimeGrid.uniform(-5, 5, 0.1)
    u11, u21 = propagate_numeric(lambda t: 0 * t, grid)
    t = grid.tau
    assert np.max(np.abs(u11 - np.cos(t / 2))) < 1e-13
    assert np.max(np.abs(u21 + 1j * np.sin(t / 2))) < 1e-13


@given(st.floats(-3, 3), st.sampled_from([2, 4]))
def test_constant_J_matches_rabi_exponential(J0, scheme):
    grid = TimeGrid.uniform(-2, 4, 0.05)
    u11, u21 = propagate_fields(lambda t: (np.ones_like(t), np.zeros_like(t), np.full_like(t, J0)), grid.tau,
                                scheme=scheme)
    for i in (0, 17, 60, grid.tau.size - 1):
        m = expm(-0.5j * grid.tau[i] * (SIGMA_X + J0 * SIGMA_Z))
        assert abs(u11[i] - m[0, 0]) < 1e-12 and abs(u21[i] - m[1, 0]) < 1e-12


def test_spline_samples_accepted():
    sol = synthesize(family_gauss_cos(0.0), ModelParams(), TimeGrid.uniform(-6, 6, 1e-3))
    u11, u21 = propagate_numeric(sol.frames.Jh, sol.grid, PropagatorConfig(richardson=False))
    assert np.max(np.abs(u11 - sol.u11)) < 1e-6
    with pytest.raises(InvalidParameter):
        propagate_numeric(sol.frames.Jh[:-1], sol.grid)


def test_self_convergence_order_four():
    f = family_gauss_cos(0.0)
    errs = []
    for step in (0.1, 0.05, 0.025):
        sol = synthesize(f, ModelParams(), TimeGrid.uniform(-6, 6, step))
        errs.append(compare(sol, PropagatorConfig(step=step, richardson=False), residual=False).max_distance)
    assert 14 < errs[0] / errs[1] < 18 and 14 < errs[1] / errs[2] < 18
    sol = synthesize(f, ModelParams(), TimeGrid.uniform(-6, 6, 0.05))
    e2 = compare(sol, PropagatorConfig(scheme=2, richardson=False), residual=False).max_distance
    assert e2 > 10 * errs[1]


def test_step_too_large_is_flagged():
    sol = synthesize(family_gauss_cos(0.0), ModelParams(), TimeGrid.uniform(-6, 6, 0.5))
    with pytest.raises(StepTooLarge):
        compare(sol)
    rep = compare(sol, PropagatorConfig(substeps=64))
    assert rep.max_infidelity < 1e-12


def test_ode_residual():
    sol = synthesize(family_cos(), ModelParams(), TimeGrid.uniform(-5, 5, 1e-3))
    assert ode_residual(sol) < 1e-8
    sol = synthesize(family_gauss_cos(0.0), ModelParams(), TimeGrid.uniform(-6, 6, 1e-3))
    assert ode_residual(sol) < 1e-7
    assert ode_residual(sol, sol.u11, sol.u21 + 1e-3) > 1e-4
    with pytest.raises(GridTooCoarse):
        ode_residual(synthesize(family_cos(), ModelParams(), TimeGrid.uniform(-5, 5, 0.1)))
    with pytest.raises(GridTooCoarse):
        ode_residual(synthesize(family_cos(), ModelParams(), TimeGrid(np.array([0.0, 0.01, 0.02]))))


def test_compare_reports():
    rep = compare(synthesize(family_cos(), ModelParams(), TimeGrid.uniform(-6, 6, 1e-3)))
    assert rep.max_infidelity < 1e-12 and rep.passed(1e-8)
    for b in (-0.25, 0.0, 0.5, 1.0, 2.0):
        rep = compare(synthesize(family_gauss_cos(b), ModelParams(), TimeGrid.uniform(-6, 6, 1e-3)))
        assert rep.max_infidelity < 1e-8 and rep.step_error_estimate < 1e-8
    rep = compare(synthesize(family_sinh_exp(5 / 3), ModelParams(), TimeGrid.uniform(-4, 4, 1e-3)))
    assert rep.max_infidelity < 1e-8 and rep.max_ode_residual < 1e-7
    assert len(rep.worst_nodes) == 5 and -4 <= rep.worst_tau <= 4


def test_report_json_has_no_nan():
    sol = synthesize(family_gauss_cos(0.0), ModelParams(), TimeGrid.uniform(-6, 6, 0.1))
    rep = compare(sol, PropagatorConfig(substeps=16))
    assert math.isnan(rep.max_ode_residual)
    data = json.loads(rep.to_json())
    assert data["max_ode_residual"] is None and data["max_infidelity"] < 1e-10
