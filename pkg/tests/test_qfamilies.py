import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pulseforge.core import TimeGrid
from pulseforge.errors import DomainEmpty, InvalidParameter, NoClosedForm, SingularPoint
from pulseforge.qfamilies import (closed_form_J, custom_family, family_arctan_trig, family_cos, family_from_samples,
                                  family_from_spec, family_gauss_cos, family_sinh_exp, family_tanh, gap,
                                  validate_initial_conditions, validity_domain)

SQ2 = math.sqrt(2.0)

# independent mpmath expressions for q(tau)
MP_Q = {
    ("sinh_exp", 2 / 3): lambda t: mp.exp(-(2 / mp.mpf(2 / 3)) * mp.sinh(mp.sqrt(mp.mpf(2 / 3)) * t / 2) ** 2),
    ("sinh_exp", -1.0): lambda t: mp.exp(-2 * mp.sin(t / 2) ** 2),
    ("gauss_cos", 0.5): lambda t: (mp.exp(-t ** 2 / 2) + 0.5 * mp.cos(t)) / 1.5,
    ("tanh", SQ2): lambda t: 1 - mp.tanh(SQ2 * t) ** 2 / 4,
    ("arctan_trig", 0.5): lambda t: 2 * mp.tan(mp.atan(0.5) - (1 / mp.mpf(1.25)) * mp.sin(t / 2) ** 2),
}
FACTORY = {"sinh_exp": family_sinh_exp, "gauss_cos": family_gauss_cos, "tanh": family_tanh,
           "arctan_trig": family_arctan_trig}

ALL = [family_sinh_exp(a) for a in (0.0, 2 / 3, 5 / 3, 2.0, -1.0, -0.25)] + \
      [family_gauss_cos(b) for b in (-0.25, 0.0, 0.5, 1.0, 2.0)] + \
      [family_tanh(a) for a in (0.4, 1.0, SQ2, 2.0)] + \
      [family_arctan_trig(a) for a in (0.1, 0.5, 3.0)] + [family_cos()]


@pytest.mark.parametrize("key", list(MP_Q))
def test_derivatives_against_mpmath(key):
    f = FACTORY[key[0]](key[1])
    taus = np.linspace(-3.0, 3.0, 13)
    s = f.sample(taus)
    with mp.workdps(30):
        for i, t in enumerate(taus):
            q = MP_Q[key]
            assert s.q[i] == pytest.approx(float(q(mp.mpf(t))), abs=1e-14)
            assert s.q1[i] == pytest.approx(float(mp.diff(q, mp.mpf(t))), abs=1e-13)
            assert s.q2[i] == pytest.approx(float(mp.diff(q, mp.mpf(t), 2)), abs=1e-12)
            lift = float(q(mp.mpf(t)) + mp.diff(q, mp.mpf(t), 2))
            assert s.q_plus_q2[i] == pytest.approx(lift, abs=1e-12)


@pytest.mark.parametrize("f", ALL, ids=lambda f: f"{f.name}-{f.params}")
def test_initial_conditions_and_parity(f):
    rep = validate_initial_conditions(f)
    assert rep.passed and max(rep.residuals) < 1e-9
    t = np.linspace(0.1, 4.0, 40)
    a, b = f.sample(t), f.sample(-t)
    np.testing.assert_allclose(a.q, b.q, atol=1e-12)
    np.testing.assert_allclose(a.q1, -b.q1, atol=1e-12)


@pytest.mark.parametrize("f", ALL, ids=lambda f: f"{f.name}-{f.params}")
def test_derivatives_against_finite_differences(f):
    t, d = np.linspace(-3.0, 3.0, 61), 1e-4
    s, sp, sm = f.sample(t), f.sample(t + d), f.sample(t - d)
    assert np.max(np.abs((sp.q - sm.q) / (2 * d) - s.q1)) < 1e-6
    assert np.max(np.abs((sp.q1 - sm.q1) / (2 * d) - s.q2)) < 1e-6


def test_spot_values():
    s = family_gauss_cos(0.0).sample(np.array([1.0]))
    assert s.q[0] == pytest.approx(0.60653066, abs=1e-8) and s.q1[0] == pytest.approx(-0.60653066, abs=1e-8)
    assert family_gauss_cos(1.0).sample(np.array([math.pi])).q[0] == pytest.approx(-0.49640, abs=1e-5)
    assert family_tanh(1.0).sample(np.array([1.0])).q[0] == pytest.approx(0.70999, abs=1e-5)
    s = family_sinh_exp(-1.0).sample(np.array([2 * math.pi]))
    assert s.q[0] == pytest.approx(1.0, abs=1e-15) and s.q1[0] == pytest.approx(0.0, abs=1e-15)
    assert family_arctan_trig(0.5).sample(np.array([2 * math.pi])).q[0] == pytest.approx(1.0, abs=1e-14)
    expected = 10 * math.tan(math.atan(0.1) - 0.2 / 1.01)
    assert family_arctan_trig(0.1).sample(np.array([math.pi])).q[0] == pytest.approx(expected, rel=1e-14)
    s = family_cos().sample(np.array([math.pi / 2]))
    assert (s.q[0], s.q1[0], s.q2[0]) == pytest.approx((0.0, -1.0, 0.0), abs=1e-15)


def test_sinh_exp_small_a_limit():
    q_small = family_sinh_exp(1e-6).sample(np.array([1.0])).q[0]
    assert q_small == pytest.approx(math.exp(-0.5), abs=1e-5)
    t = np.linspace(-4, 4, 81)
    assert np.max(np.abs(family_sinh_exp(1e-6).sample(t).q - family_gauss_cos(0.0).sample(t).q)) < 1e-5


def test_parameter_errors():
    with pytest.raises(InvalidParameter):
        family_sinh_exp(2.5)
    with pytest.raises(InvalidParameter):
        family_gauss_cos(-1.0)
    with pytest.raises(InvalidParameter):
        family_tanh(0.0)
    with pytest.raises(InvalidParameter):
        family_arctan_trig(-1.0)


def test_initial_condition_failures():
    bad = custom_family("parabola", lambda t: (1 - t ** 2, -2 * t, -2 + 0 * t))
    rep = validate_initial_conditions(bad)
    assert not rep.passed and rep.residuals[2] == pytest.approx(1.0)
    good = custom_family("gauss", lambda t: (np.exp(-t * t / 2), -t * np.exp(-t * t / 2),
                                             (t * t - 1) * np.exp(-t * t / 2)))
    assert validate_initial_conditions(good).passed


def test_family_from_spec():
    f = family_from_spec({"family": "gauss_cos", "b": 0.5})
    assert f.name == "gauss_cos" and f.params == {"b": 0.5} and f.spec() == {"family": "gauss_cos", "b": 0.5}
    assert family_from_spec({"family": "cos"}).saturated
    for bad in ({"family": "nope"}, {"family": "tanh"}, {"family": "tanh", "a": 1, "b": 2}):
        with pytest.raises(InvalidParameter):
            family_from_spec(bad)


def test_family_from_samples_is_best_effort():
    t = np.linspace(-5, 5, 2001)
    f = family_from_samples(t, np.exp(-t * t / 2))
    assert f.parity == "even"
    s = f.sample(np.array([0.0, 1.0]))
    assert s.q[1] == pytest.approx(math.exp(-0.5), abs=1e-9)
    assert s.q1[1] == pytest.approx(-math.exp(-0.5), abs=1e-5)
    assert s.q2[0] == pytest.approx(-1.0, abs=1e-3)


# ---------------------------------------------------------------- validity domains

def test_validity_gauss_single_positive_bounded_pulse():
    rep = validity_domain(family_gauss_cos(0.0), TimeGrid.uniform(-6, 6, 0.01))
    assert rep.intervals == [(-6.0, 6.0)]
    assert rep.event_taus == [0.0]
    assert rep.localized and rep.positive and rep.bounded


def test_validity_periodic_saturation_events():
    rep = validity_domain(family_sinh_exp(-1.0), TimeGrid.uniform(-7, 13, 0.01))
    np.testing.assert_allclose(rep.event_taus, [-2 * math.pi, 0.0, 2 * math.pi, 4 * math.pi], atol=1e-9)
    assert not rep.bounded


def test_validity_cos_identically_saturated():
    rep = validity_domain(family_cos(), TimeGrid.uniform(-3, 3, 0.01))
    assert rep.identically_saturated
    g = gap(family_cos(), np.linspace(-3, 3, 31))
    assert np.max(np.abs(g)) < 1e-15


def test_tanh_threshold_structure():
    """Finite domain only for 1/(2 sqrt 2) < a < 1/2, at tanh^2(a tau) = 2 - 1/(4 a^2)."""
    for a in (0.36, 0.4, 0.45, 0.49):
        rep = validity_domain(family_tanh(a), TimeGrid.uniform(-8, 8, 0.01))
        edge = math.atanh(math.sqrt(2 - 1 / (4 * a * a))) / a
        assert len(rep.intervals) == 1
        lo, hi = rep.intervals[0]
        assert hi == pytest.approx(edge, abs=1e-10) and lo == pytest.approx(-edge, abs=1e-10)
    for a in (0.5, 0.6, 1 / SQ2, 1.0):
        rep = validity_domain(family_tanh(a), TimeGrid.uniform(-8, 8, 0.01))
        assert rep.intervals == [(-8.0, 8.0)]
    with pytest.raises(DomainEmpty):
        validity_domain(family_tanh(0.3), TimeGrid.uniform(-4, 4, 0.01))


@given(st.floats(0.51, 4.0))
def test_tanh_gap_positive_beyond_threshold(a):
    g = gap(family_tanh(a), np.linspace(0.01, 10, 500))
    assert np.all(g > 0)


def test_tanh_asymptote_metadata():
    assert family_tanh(SQ2).metadata["asymptote"] == pytest.approx(3 / math.sqrt(7), abs=1e-12)
    assert "asymptote" not in family_tanh(0.6).metadata


# ---------------------------------------------------------------- closed forms

def test_closed_form_oracles():
    f = family_gauss_cos(0.0)
    t = np.array([0.5, 1.0, 2.0])
    J = closed_form_J(f, t)
    # direct hand evaluation for b = 0
    oracle = t ** 2 * np.exp(-t ** 2 / 2) / np.sqrt(1 - (1 + t ** 2) * np.exp(-t ** 2))
    np.testing.assert_allclose(J, oracle, rtol=1e-13)
    assert closed_form_J(family_gauss_cos(0.0), 1e-2) == pytest.approx(SQ2, abs=1e-4)
    assert closed_form_J(family_sinh_exp(5 / 3), 1e-2) == pytest.approx(math.sqrt(1 / 3), abs=1e-4)
    with pytest.raises(SingularPoint):
        closed_form_J(f, 1e-4)
    with pytest.raises(SingularPoint):
        closed_form_J(family_sinh_exp(-1.0), 2 * math.pi + 1e-5)
    with pytest.raises(NoClosedForm):
        closed_form_J(family_arctan_trig(0.5), 1.0)
    with pytest.raises(NoClosedForm):
        closed_form_J(family_cos(), 1.0)


def test_tanh_closed_form_is_odd():
    f = family_tanh(1.0)
    assert closed_form_J(f, -1.3) == pytest.approx(-closed_form_J(f, 1.3), rel=1e-14)
