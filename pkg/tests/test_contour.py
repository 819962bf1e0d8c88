from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sint

from fokas_ibvp.contour import (
    PROFILES,
    AccuracyProfile,
    fourier_term,
    gaussian_truncation,
    get_profile,
    integrate,
    integrate_real_line,
    make_contour,
    with_profile,
)
from fokas_ibvp.errors import NotConverged, PoleOnContour, ZeroTimeUnbounded
from fokas_ibvp.spectral import ProblemParams, RootReport, find_roots, omega
from fokas_ibvp.transforms import FullSine, PiecewiseStep, Tabulated


def _gauss_integral(p, t):
    # int_R exp(-(D lam^2 + i K lam) t) dlam
    return math.sqrt(math.pi / (p.D0 * t)) * math.exp(-p.K0 ** 2 * t / (4 * p.D0))


@pytest.mark.parametrize("D0,K0,L,t", [
    (1.0, 0.5, 1.0, 0.01), (1.0, 0.5, 1.0, 0.5), (1.0, 0.5, 1.0, 3.0),
    (0.1, 0.5, 1.0, 0.01), (0.1, 0.5, 1.0, 2.0), (1.0, 0.0, 2.0, 0.2),
    (0.0208, 0.003, 60.0, 60.0), (0.0208, 0.003, 60.0, 1800.0), (0.0208, 0.003, 60.0, 7200.0),
])
def test_contour_integral_of_gaussian(D0, K0, L, t):
    p = ProblemParams(D0, K0, L)
    c = make_contour(p, None, t)
    got = integrate(c, lambda lam: np.exp(-omega(lam, p) * t))
    assert abs(got - _gauss_integral(p, t)) < 1e-12 * _gauss_integral(p, t)
    real = integrate_real_line(lambda lam: np.exp(-omega(lam, p) * t), p, t)
    assert abs(real - _gauss_integral(p, t)) < 1e-12 * _gauss_integral(p, t)


def test_pole_below_contour_is_contour_independent():
    p = ProblemParams(1.0, 0.5, 1.0)
    pole = 0.3 - 2.0j
    f = lambda lam: np.exp(-omega(lam, p) * 0.2) / (lam - pole)
    vals = []
    for h, ang in [(0.5, math.pi / 8), (1.5, math.pi / 6), (0.8, math.pi / 12)]:
        prof = with_profile("default", offset_h=h, ray_angle=ang)
        vals.append(integrate(make_contour(p, None, 0.2, prof, singular_points=[pole]), f))
    assert max(abs(v - vals[0]) for v in vals) < 1e-10


@settings(max_examples=20, deadline=None)
@given(h=st.floats(0.3, 3.0), ang=st.floats(0.05, 0.7))
def test_gaussian_moment_independent_of_geometry(h, ang):
    p = ProblemParams(0.5, 1.0, 1.0)
    prof = with_profile("default", offset_h=h, ray_angle=ang)
    c = make_contour(p, None, 0.3, prof)
    got = integrate(c, lambda lam: lam ** 2 * np.exp(-omega(lam, p) * 0.3))
    expect = integrate_real_line(lambda lam: lam ** 2 * np.exp(-omega(lam, p) * 0.3), p, 0.3)
    assert abs(got - expect) < 1e-10 * (1 + abs(expect))


def test_dirichlet_heat_contour_clears_real_axis():
    p = ProblemParams(1.0, 0.0, 1.0, 0.0, 0.0)
    c = make_contour(p, find_roots(p), 0.1)
    assert c.offset_h >= 0.5
    assert np.all(c.nodes.imag > 0)


def test_philip_roots_accept_default_offset():
    p = ProblemParams(0.5, 1.0, 1.0, 0.5, 0.5)
    c = make_contour(p, find_roots(p), 0.1)
    assert c.offset_h == pytest.approx(0.5)


def test_upper_roots_are_cleared():
    p = ProblemParams(1.0, 0.0, 1.0)
    rep = RootReport(sigma=0, rho=0, predicted_count=2, roots=[2j, -2j], max_upper_imag=2.0)
    c = make_contour(p, rep, 0.5)
    assert c.offset_h >= 3.0
    assert not c.is_above(2j)
    assert c.distance(2j) >= 0.25


def test_pole_above_contour_is_rejected():
    p = ProblemParams(1.0, 0.0, 1.0)
    # a root far above the wedge that the report fails to advertise
    rep = RootReport(sigma=0, rho=0, predicted_count=1, roots=[40j], max_upper_imag=None)
    with pytest.raises(PoleOnContour):
        make_contour(p, rep, 0.5)


def test_zero_time_needs_opt_in():
    p = ProblemParams(1.0, 0.5, 1.0)
    with pytest.raises(ZeroTimeUnbounded):
        make_contour(p, None, 0.0)
    c = make_contour(p, None, 0.0, allow_unbounded=True)
    assert c.truncation_S * p.L == pytest.approx(PROFILES["default"].truncation_cap)


def test_tiny_scaled_time_is_refused():
    p = ProblemParams(0.0208, 0.003, 60.0)
    with pytest.raises(NotConverged):
        make_contour(p, None, 0.01)
    with pytest.raises(NotConverged):
        integrate_real_line(lambda lam: lam, p, 0.01)


def test_gaussian_truncation_formula():
    S = gaussian_truncation(1.0, 1.0)
    assert math.exp(-S * S * math.cos(math.pi / 4)) == pytest.approx(1e-16, rel=1e-9)
    assert S == pytest.approx(7.218, abs=1e-3)
    with pytest.raises(ZeroTimeUnbounded):
        gaussian_truncation(1.0, 0.0)


def test_panel_doubling_flags_nearby_pole():
    p = ProblemParams(1.0, 0.5, 1.0)
    c = make_contour(p, None, 0.5)
    near = c.vertex + 0.6 + 1e-4j + 0.6 * math.tan(c.ray_angle) * 1j
    with pytest.raises(NotConverged):
        integrate(c, lambda lam: np.exp(-omega(lam, p) * 0.5) / (lam - near), check=True)


def test_profiles_and_validation():
    assert get_profile(None).name == "default"
    assert set(PROFILES) >= {"fast", "default", "paper"}
    with pytest.raises(ValueError):
        get_profile("nope")
    with pytest.raises(ValueError):
        AccuracyProfile(ray_angle=1.0)


def _whole_line_oracle(f, p, x, t, L, points=()):
    # free-space advection-diffusion of theta0 extended by zero
    k = lambda y: np.exp(-(x - y - p.K0 * t) ** 2 / (4 * p.D0 * t)) / math.sqrt(4 * math.pi * p.D0 * t)
    return sint.quad(lambda y: f(y) * k(y), 0, L, points=list(points) or None, limit=200)[0]


@pytest.mark.parametrize("data,points", [(FullSine(), ()), (PiecewiseStep(), (0.5,))])
def test_fourier_term_is_free_space_evolution(data, points):
    p = ProblemParams(0.7, 0.4, 1.0)
    for x, t in [(0.2, 0.05), (0.9, 0.3), (1.4, 0.1)]:
        got = fourier_term(data, p, np.array([x]), t)[0]
        assert abs(got.imag) < 1e-13
        assert got.real == pytest.approx(_whole_line_oracle(lambda y: data(y, 1.0), p, x, t, 1.0, points), abs=1e-12)


def test_fourier_term_at_zero_time():
    p = ProblemParams(1.0, 0.5, 1.0)
    vals = fourier_term(PiecewiseStep(), p, np.array([0.0, 0.25, 0.75, 1.0]), 0.0)
    assert vals.real.tolist() == [0.5, 1.0, 0.0, 0.0]
    xs = np.linspace(0, 1, 11)
    tab = Tabulated(tuple(xs), tuple(np.ones_like(xs)))
    v = fourier_term(tab, p, np.array([0.5]), 0.0)[0]
    assert abs(v - 1.0) < 1e-2
