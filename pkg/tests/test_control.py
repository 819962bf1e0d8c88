from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import ChebyshevMOL
from scipy import integrate as sint

from fokas_ibvp.control import (
    ControlProblem,
    assemble_system,
    basis_response_A,
    norm_l2_space,
    norm_l2_time,
    reconstruct_control,
    rhs_B,
    select_delta,
    solve_exact,
    solve_regularized,
    synthesize,
    verify_control,
)
from fokas_ibvp.direct_solver import solve
from fokas_ibvp.errors import InvalidSpec
from fokas_ibvp.spectral import NEUMANN, ProblemParams
from fokas_ibvp.transforms import HalfCosine, PiecewiseStep

P1 = ProblemParams(1.0, 0.5, 1.0, 1.0, 0.0)


@pytest.fixture(scope="module")
def ex1():
    pr = ControlProblem(P1, PiecewiseStep(), 0.5, 2)
    return pr, assemble_system(pr)


def test_collocation_points_and_size():
    pr = ControlProblem(P1, PiecewiseStep(), 0.5, 4)
    assert pr.size == 5
    assert pr.collocation_xs == pytest.approx([1 / 6, 2 / 6, 3 / 6, 4 / 6, 5 / 6])


@pytest.mark.parametrize("kw", [
    dict(params=ProblemParams(1.0, 0.5, 1.0, 1.0, 0.3)),
    dict(params=ProblemParams(1.0, 0.5, 1.0, NEUMANN, NEUMANN)),
    dict(T=0.0), dict(tau=0.5), dict(N=0), dict(N=2.5),
])
def test_problem_validation(kw):
    args = dict(params=P1, initial=PiecewiseStep(), T=0.5, N=2, tau=0.0) | kw
    with pytest.raises(InvalidSpec):
        ControlProblem(**args)


def test_basis_response_matches_method_of_lines(ex1):
    pr, (A, _, _) = ex1
    mol = ChebyshevMOL(1.0, 0.5, 1.0, 1.0, 0.0, n=40)
    for n in (1, 2, 3):
        k = n * math.pi / pr.T
        ref = mol.interpolate(mol.solve(lambda x: 0 * x, pr.T, [("const", 0.0, 0)], [("sin", 1.0, k)]),
                              pr.collocation_xs)
        # A is the response with the sign moved to the left-hand side
        assert np.max(np.abs(A[:, n - 1] + ref)) < 1e-9
        mid = mol.interpolate(mol.solve(lambda x: 0 * x, 0.3, [("const", 0.0, 0)], [("sin", 1.0, k)]),
                              pr.collocation_xs)
        assert np.max(np.abs(basis_response_A(pr, n, pr.collocation_xs, 0.3) + mid)) < 1e-9


def test_basis_response_validation_and_delay():
    pr = ControlProblem(P1, PiecewiseStep(), 0.5, 2, tau=0.2)
    with pytest.raises(InvalidSpec):
        basis_response_A(pr, 4, 0.5)
    assert basis_response_A(pr, 1, 0.5, 0.1) == 0.0
    assert isinstance(basis_response_A(pr, 1, 0.5), float)


def test_rhs_is_free_evolution(ex1):
    pr, (_, b, _) = ex1
    mol = ChebyshevMOL(1.0, 0.5, 1.0, 1.0, 0.0, n=40)
    # the step is not resolved by the polynomial oracle; the smooth profile is
    pr2 = ControlProblem(P1, HalfCosine(), 0.5, 2)
    ref = mol.interpolate(mol.solve(lambda x: HalfCosine()(x, 1.0), 0.5), pr2.collocation_xs)
    assert np.max(np.abs(rhs_B(pr2, pr2.collocation_xs) - ref)) < 1e-9
    assert np.allclose(b, solve(pr.free_spec(), pr.collocation_xs, pr.T), atol=1e-13)


def test_superposition_identity(ex1):
    # theta(x, T) under control c equals b(x) - A(x) c
    pr, (A, b, _) = ex1
    c = np.array([0.3, -0.7, 0.2])
    got = solve(pr.controlled_spec(c), pr.collocation_xs, pr.T)
    assert np.max(np.abs(got - (b - A @ c))) < 1e-10


def test_exact_control_zeroes_collocation_points(ex1):
    pr, (A, b, _) = ex1
    c = solve_exact(A, b)
    assert np.max(np.abs(solve(pr.controlled_spec(c), pr.collocation_xs, pr.T))) < 1e-10


def test_extended_precision_agrees_when_well_conditioned(ex1):
    pr, system = ex1
    d = synthesize(pr, system=system, precision="double", verify=False)
    e = synthesize(pr, system=system, precision="extended", verify=False)
    assert d.method == "lu" and e.method == "lu-extended"
    assert np.max(np.abs(d.coeffs - e.coeffs)) < 1e-12
    assert e.condition_estimate == pytest.approx(d.condition_estimate, rel=1e-8)
    with pytest.raises(InvalidSpec):
        synthesize(pr, system=system, precision="quad")


def test_example_one_norm(ex1):
    pr, system = ex1
    sol = synthesize(pr, system=system)
    assert sol.coeffs.shape == (3,)
    assert sol.control_norm == pytest.approx(0.346233, abs=5e-7)
    assert sol.verified_error < 1e-3
    assert sol.final_profile.theta.shape == (1, 201)


def test_solve_exact_paths():
    A = np.array([[2.0, 1.0], [1.0, 3.0]])
    b = np.array([1.0, 2.0])
    assert np.allclose(A @ solve_exact(A, b), b)
    # rank deficient: minimum-norm least squares
    S = np.array([[1.0, 1.0], [1.0, 1.0]])
    assert solve_exact(S, np.array([2.0, 2.0])) == pytest.approx([1.0, 1.0])
    with pytest.raises(InvalidSpec):
        solve_exact(np.ones((2, 3)), b)
    with pytest.raises(InvalidSpec):
        solve_exact(np.array([[np.nan, 0], [0, 1.0]]), b)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), frac=st.floats(0.05, 0.9))
def test_regularized_meets_discrepancy(seed, frac):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(5, 5)) @ np.diag(10.0 ** -np.arange(5))
    b = rng.normal(size=5)
    delta = frac * np.linalg.norm(b)
    c = solve_regularized(A, b, delta)
    assert np.linalg.norm(A @ c - b) == pytest.approx(delta, rel=1e-5)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_regularized_norm_decreases_with_delta(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(6, 6)) @ np.diag(10.0 ** -np.arange(6))
    b = rng.normal(size=6)
    bn = np.linalg.norm(b)
    norms = [np.linalg.norm(solve_regularized(A, b, f * bn)) for f in (1e-4, 1e-3, 1e-2, 0.1, 0.5)]
    assert all(n1 >= n2 * (1 - 1e-9) for n1, n2 in zip(norms, norms[1:]))


def test_regularized_edge_cases():
    A = np.eye(3)
    b = np.array([1.0, 0.0, 0.0])
    assert np.all(solve_regularized(A, b, 1.0) == 0)
    with pytest.raises(InvalidSpec):
        solve_regularized(A, b, 0.0)


@pytest.mark.parametrize("tau,T", [(0.0, 0.5), (0.2, 1.0)])
def test_parseval_norm_matches_quadrature(tau, T):
    c = np.array([0.4, -1.1, 0.25, 0.7])
    q = sint.quad(lambda s: float(reconstruct_control(c, np.array([s]), tau, T)[0]) ** 2,
                  0, T, limit=400, points=[tau])[0]
    assert norm_l2_time(c, tau, T) == pytest.approx(math.sqrt(q), rel=1e-10)


def test_reconstruct_control_support():
    v = reconstruct_control([1.0, 0.5], np.array([0.0, 0.1, 0.3, 0.5, 0.7]), 0.1, 0.5)
    assert v[0] == 0 and v[1] == pytest.approx(0) and v[-1] == 0
    assert v[2] == pytest.approx(1.0 + 0.5 * math.sin(math.pi))


def test_space_norm():
    xs = np.linspace(0, 1, 201)
    assert norm_l2_space(np.sin(np.pi * xs), xs) == pytest.approx(math.sqrt(0.5), rel=1e-8)
    with pytest.raises(InvalidSpec):
        norm_l2_space(np.ones(3))


def test_verify_control_checks_shape(ex1):
    pr, _ = ex1
    with pytest.raises(InvalidSpec):
        verify_control(pr, np.zeros(2))


def test_select_delta_reaches_target(ex1):
    pr, system = ex1
    exact = synthesize(pr, system=system)
    target = 1e-3
    assert exact.verified_error < target
    d = select_delta(pr, target, system=system, scan=9)
    sol = synthesize(pr, delta=d, system=system)
    assert sol.verified_error == pytest.approx(target, rel=2e-3)
    assert sol.control_norm < exact.control_norm
    assert sol.residual_norm == pytest.approx(d, rel=1e-5)
