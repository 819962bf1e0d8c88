from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from fokas_ibvp.spectral import ProblemParams, omega
from fokas_ibvp.transforms import (
    Constant,
    ConstantSignal,
    ExpSine,
    FullSine,
    HalfCosine,
    PiecewiseStep,
    SineSeries,
    Tabulated,
    Zero,
    constant_signal,
    phi_n,
    sine_series_ttransform,
    ttransform_constant,
    varphi_n,
)

P = ProblemParams(1.0, 0.5, 1.0, 1.0, 0.0)


def quad_hat(f, lam, L, points=None):
    re = integrate.quad(lambda x: (f(x) * np.exp(-1j * lam * x)).real, 0, L, points=points, limit=200)[0]
    im = integrate.quad(lambda x: (f(x) * np.exp(-1j * lam * x)).imag, 0, L, points=points, limit=200)[0]
    return complex(re, im)


CATALOG = [
    (PiecewiseStep(), [0.5]),
    (PiecewiseStep(height=2.0, split=0.3), [0.3]),
    (HalfCosine(1.5), None),
    (FullSine(), None),
    (Constant(0.7), None),
    (ExpSine(rate=0.5, mode=2), None),
]


@pytest.mark.parametrize("data,points", CATALOG)
@pytest.mark.parametrize("lam", [0.0, 0.37 - 0.2j, 2.1 + 0.8j, -4.0 - 1.1j, math.pi, math.pi / 2])
def test_closed_form_hat_matches_quadrature(data, points, lam):
    L = 1.0
    expect = quad_hat(lambda x: data(x, L), lam, L, points)
    assert abs(data.hat(lam, L) - expect) < 1e-10 * (1 + abs(expect))


@pytest.mark.parametrize("data", [HalfCosine(), FullSine(), ExpSine(rate=0.3)])
def test_removable_points_are_finite_and_continuous(data):
    L = 2.0
    centers = {HalfCosine: math.pi / (2 * L), FullSine: math.pi / L}.get(type(data))
    if centers is None:
        centers = math.pi / L - 0.3j
    at = data.hat(np.array([centers]), L)[0]
    near = data.hat(np.array([centers + 1e-2]), L)[0]
    assert np.isfinite(at)
    assert abs(at - near) < 0.05 * (1 + abs(at))


def test_tabulated_reproduces_piecewise_linear_transform():
    xs = np.linspace(0, 1, 41)
    tab = Tabulated(tuple(xs), tuple(np.sin(np.pi * xs)))
    for lam in (0.0, 1.3 + 0.4j, -3.0):
        expect = quad_hat(lambda x: np.interp(x, xs, np.sin(np.pi * xs)), lam, 1.0, list(xs[1:-1]))
        assert abs(tab.hat(lam, 1.0) - expect) < 1e-12
    # close to the smooth transform for a fine table
    assert abs(tab.hat(1.0, 1.0) - FullSine().hat(1.0, 1.0)) < 1e-3


def test_tabulated_validation():
    with pytest.raises(ValueError):
        Tabulated((0.0, 0.5, 0.4), (1.0, 2.0, 3.0))
    with pytest.raises(ValueError):
        Tabulated((0.0,), (1.0,))
    with pytest.raises(ValueError):
        Tabulated((0.0, 0.5), (1.0, 2.0)).hat(1.0, 1.0)


def test_step_midpoint_value_and_breakpoint():
    step = PiecewiseStep()
    assert step(np.array([0.25, 0.5, 0.75]), 1.0).tolist() == [1.0, 0.5, 0.0]
    assert step.breakpoints(2.0) == (1.0,)


@settings(max_examples=50, deadline=None)
@given(re=st.floats(-3, 3), im=st.floats(-3, 3), t=st.floats(0.0, 2.0))
def test_ttransform_constant_matches_integral(re, im, t):
    w = complex(re, im)
    f = lambda s, k: (np.exp(w * s)).real if k == 0 else (np.exp(w * s)).imag
    expect = complex(integrate.quad(f, 0, t, args=(0,))[0], integrate.quad(f, 0, t, args=(1,))[0])
    got = ttransform_constant(2.0, np.array([w]), t)[0]
    assert abs(got - 2 * expect) < 1e-10 * (1 + abs(expect))


def test_ttransform_constant_small_w_branch_is_continuous():
    t = 1.3
    ws = np.array([1e-9, 9e-7 / t, 1.1e-6 / t, 1e-3j])
    exact = np.array([(np.expm1(complex(w) * t) / w) for w in ws])
    assert np.allclose(ttransform_constant(1.0, ws, t), exact, rtol=1e-12)
    assert ttransform_constant(1.0, np.array([0j]), t)[0] == pytest.approx(t)
    with pytest.raises(ValueError):
        ttransform_constant(1.0, 1.0, -1.0)


def test_phi_n_support_and_values():
    t = np.array([-0.1, 0.0, 0.25, 0.5, 1.0, 1.2])
    v = phi_n(t, 2, 0.0, 1.0)
    assert v[0] == 0 and v[-1] == 0
    assert v[2] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        phi_n(t, 0, 0.0, 1.0)
    with pytest.raises(ValueError):
        phi_n(t, 1, 1.0, 1.0)


def _varphi_oracle(lam, t, n, tau, T):
    w = complex(omega(lam, P))
    up = min(t, T)
    if up <= tau:
        return 0j
    f = lambda s, k: (np.exp(w * s) * math.sin(n * math.pi * (s - tau) / (T - tau)))
    re = integrate.quad(lambda s: f(s, 0).real, tau, up, limit=200)[0]
    im = integrate.quad(lambda s: f(s, 0).imag, tau, up, limit=200)[0]
    return complex(re, im)


@pytest.mark.parametrize("t", [0.1, 0.35, 0.8, 1.0, 1.6])
@pytest.mark.parametrize("n", [1, 3])
def test_varphi_n_matches_quadrature(t, n):
    tau, T = 0.2, 1.0
    for lam in (0.4 + 0.3j, -1.5 + 0.9j, 2.0 + 0.5j):
        got = varphi_n(np.array([lam]), t, n, tau, T, P)[0]
        expect = _varphi_oracle(lam, t, n, tau, T)
        assert abs(got - expect) < 1e-10 * (1 + abs(expect))


def test_varphi_n_near_resonance_uses_fallback():
    # omega(lam) = i n pi / (T - tau): closed form is 0/0 there
    tau, T, n = 0.0, 1.0, 2
    target = 1j * n * math.pi / (T - tau)
    lam = np.roots([P.D0, 1j * P.K0, -target])[0]
    got = varphi_n(np.array([lam]), 0.7, n, tau, T, P)[0]
    assert abs(got - _varphi_oracle(lam, 0.7, n, tau, T)) < 1e-10


def test_varphi_n_fundamental_theorem():
    tau, T, n, h = 0.1, 1.0, 2, 1e-5
    lam = np.array([0.6 + 0.4j])
    for t in (0.3, 0.42, 0.8):
        d = (varphi_n(lam, t + h, n, tau, T, P) - varphi_n(lam, t - h, n, tau, T, P)) / (2 * h)
        expect = np.exp(omega(lam, P) * t) * phi_n(t, n, tau, T)
        assert abs(d[0] - expect[0]) < 1e-4 * abs(expect[0])


def test_sine_series_transform_is_linear_sum():
    sig = SineSeries((0.3, -1.2, 0.5), tau=0.1, T=0.9)
    lam = np.array([0.3 + 0.2j, 1.7 + 1.0j])
    for t in (0.05, 0.5, 0.9, 1.4):
        w = omega(lam, P)
        assert np.allclose(sig.ttransform(w, t), sine_series_ttransform(sig, lam, t, P), atol=1e-13)


@pytest.mark.parametrize("t", [0.05, 0.4, 0.9, 1.5])
def test_damped_split_reassembles(t):
    lam = np.array([0.5 + 0.3j, -2.0 + 1.0j, 3.0 + 0.6j])
    w = omega(lam, P)
    for sig in (SineSeries((1.0, -0.4), 0.1, 0.9), ConstantSignal(0.8), Zero()):
        dec, poles = sig.damped(lam, t, P)
        total = dec + sum(r / (w - wj) for wj, r in poles)
        expect = np.exp(-w * t) * sig.ttransform(w, t)
        assert np.allclose(total, expect, rtol=1e-12, atol=1e-14)


def test_damping_times():
    sig = SineSeries((1.0,), 0.2, 1.0)
    assert sig.damping_time(0.1) == math.inf
    assert sig.damping_time(0.7) == pytest.approx(0.5)
    assert sig.damping_time(1.5) == pytest.approx(0.5)
    assert Zero().damping_time(1.0) == math.inf
    assert ConstantSignal(1.0).damping_time(0.3) == 0.3


def test_constant_signal_canonical_zero():
    assert isinstance(constant_signal(0.0), Zero)
    assert constant_signal(2.0).value(np.array([0.0, 1.0])).tolist() == [2.0, 2.0]
    assert SineSeries((0.0, 0.0)).is_zero()
