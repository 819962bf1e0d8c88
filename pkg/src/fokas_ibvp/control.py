"""Boundary null-control synthesis at ``x = L``.

The control ``v(t) = sum_n c_n phi_n(t)`` (sine basis on ``[tau, T]``) enters
as the Dirichlet datum at ``x = L`` of a Robin-Dirichlet problem with a
homogeneous Robin end at ``x = 0``. Requiring ``theta(x_k, T) = 0`` at the
collocation points gives ``A c = b`` with ``b_k = B(x_k, T)`` the free
evolution and ``A_kn = A_n(x_k, T)`` the basis responses, so that
``theta(x, T) = B(x, T) - sum_n c_n A_n(x, T)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as sint
from scipy import linalg, optimize

from .contour import AccuracyProfile, get_profile, integrate, make_contour
from .direct_solver import BCKind, IbvpSpec, SolutionGrid, _Evaluator, _real, omega_preimages, solve_grid
from .errors import InvalidSpec, NotConverged, SingularSystem
from .spectral import NEUMANN, ProblemParams, delta_alpha, domega, f_gamma, find_roots, omega
from .transforms import Constant, InitialData, SineSeries, Zero, phi_n

log = logging.getLogger(__name__)

LU_COND_LIMIT = 1e12
# past this condition number double-precision quadrature noise visibly moves
# the exact solution; "auto" then re-assembles in extended precision
EXTENDED_COND = 1e8
VERIFY_POINTS = 201
_ZERO_INIT = Constant(0.0)


@dataclass(frozen=True)
class ControlProblem:
    params: ProblemParams
    initial: InitialData
    T: float
    N: int
    tau: float = 0.0

    def __post_init__(self):
        p = self.params
        if p.alpha is NEUMANN or p.beta is NEUMANN or p.beta != 0:
            raise InvalidSpec("control problems need a finite alpha and beta = 0")
        if not self.T > 0:
            raise InvalidSpec("T must be positive")
        if not 0 <= self.tau < self.T:
            raise InvalidSpec("tau must lie in [0, T)")
        if int(self.N) != self.N or self.N < 1:
            raise InvalidSpec("N must be an integer >= 1")

    @property
    def size(self) -> int:
        return self.N + 1

    @property
    def collocation_xs(self) -> np.ndarray:
        k = np.arange(self.N + 1)
        return (k + 1) * self.params.L / (self.N + 2)

    def free_spec(self) -> IbvpSpec:
        return IbvpSpec(self.params, self.initial, Zero(), Zero(), BCKind.ROBIN_DIRICHLET)

    def controlled_spec(self, coeffs) -> IbvpSpec:
        g = SineSeries(tuple(np.asarray(coeffs, dtype=float)), self.tau, self.T)
        return IbvpSpec(self.params, self.initial, Zero(), g, BCKind.ROBIN_DIRICHLET)


@dataclass
class ControlSolution:
    coeffs: np.ndarray
    control_norm: float
    residual_norm: float
    verified_error: float | None
    regularized: bool
    delta: float | None
    condition_estimate: float
    method: str
    final_profile: SolutionGrid | None = field(default=None, repr=False)


# --------------------------------------------------------------------------
# assembly


def _basis_contour(problem: ControlProblem, profile):
    p = problem.params
    kappas = np.arange(1, problem.N + 2) * np.pi / (problem.T - problem.tau)
    pts = [0j, -1j * p.K0 / p.D0]
    for k in kappas:
        pts.extend(omega_preimages(1j * k, p))
        pts.extend(omega_preimages(-1j * k, p))
    damp = min(problem.T, problem.T - problem.tau)
    return make_contour(p, find_roots(p), damp, profile, singular_points=pts, t_max=problem.T)


def rhs_B(problem: ControlProblem, x, profile: AccuracyProfile | str | None = None):
    """Free evolution ``B(x, T)`` (zero boundary data)."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    ev = _Evaluator(problem.free_spec(), problem.T, profile)
    vals = _real(ev.values(xs), strict=True)[0]
    return float(vals[0]) if np.ndim(x) == 0 else vals


def _response_matrix(problem: ControlProblem, xs, ns, profile, contour=None):
    """``A_n(x, T)`` for all ``x`` in ``xs`` and ``n`` in ``ns``; shape ``(len(xs), len(ns))``."""
    p = problem.params
    L, c, T, tau = p.L, p.shift, problem.T, problem.tau
    prof = get_profile(profile)
    xs = np.asarray(xs, dtype=float)
    ns = np.asarray(ns, dtype=int)
    kap = ns * np.pi / (T - tau)
    sign = (-1.0) ** ns
    contour = _basis_contour(problem, prof) if contour is None else contour

    def kernel(lam, x):
        return (p.K0 - 2j * lam * p.D0) * f_gamma(lam, x, p.alpha, p) / delta_alpha(lam, p)

    def integrand(lam):
        w = omega(lam, p)[None, None, :]
        k = kap[None, :, None]
        # decaying part of exp(-omega T) varphi_n(lam, T)
        dec = k * np.exp(-w * (T - tau)) / (w * w + k * k)
        return kernel(lam[None, None, :], xs[:, None, None]) * dec

    total = integrate(contour, integrand, prof)
    # remaining poles: (i/2)(-1)^n / (omega - i k) - (i/2)(-1)^n / (omega + i k)
    for j, k in enumerate(kap):
        for w, r in ((1j * k, 0.5j * sign[j]), (-1j * k, -0.5j * sign[j])):
            for q in omega_preimages(w, p):
                if contour.is_above(q):
                    total[:, j] += 2j * np.pi * kernel(np.asarray(q), xs) * r / domega(q, p)
    vals = -1j / np.pi * np.exp(-c * (2 * L - xs))[:, None] * total
    return _real(vals, strict=True)[0]


def basis_response_A(problem: ControlProblem, n: int, x, t: float | None = None,
                     profile: AccuracyProfile | str | None = None):
    """Response ``A_n(x, t)`` of the basis function ``phi_n``; ``t`` defaults to ``T``."""
    if not 1 <= n <= problem.N + 1:
        raise InvalidSpec(f"n must lie in [1, {problem.N + 1}]")
    t = problem.T if t is None else t
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if t <= problem.tau:
        out = np.zeros(xs.shape)
    elif t == problem.T:
        out = _response_matrix(problem, xs, [n], profile)[:, 0]
    else:
        # general t: the g-response of the direct solver carries the opposite sign
        coeffs = np.zeros(problem.N + 1)
        coeffs[n - 1] = 1.0
        spec = IbvpSpec(problem.params, _ZERO_INIT, Zero(), SineSeries(tuple(coeffs), problem.tau, problem.T),
                        BCKind.ROBIN_DIRICHLET)
        out = -_real(_Evaluator(spec, t, profile).values(xs), strict=True)[0]
    return float(out[0]) if np.ndim(x) == 0 else out


def assemble_system(problem: ControlProblem, profile: AccuracyProfile | str | None = None):
    """Collocation system ``(A, b, cond)`` at ``x_k = (k + 1) L / (N + 2)``."""
    xs = problem.collocation_xs
    ns = np.arange(1, problem.N + 2)
    A = _response_matrix(problem, xs, ns, profile)
    b = rhs_B(problem, xs, profile)
    cond = condition_number(A)
    log.info("assembled %dx%d system, cond=%.3e", A.shape[0], A.shape[1], cond)
    return A, b, cond


def condition_number(A) -> float:
    s = np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)
    return math.inf if s[-1] == 0 else float(s[0] / s[-1])


# --------------------------------------------------------------------------
# solves


def solve_exact(A, b, cond_limit: float = LU_COND_LIMIT):
    """Dense solve; LU with partial pivoting, or minimum-norm least squares past ``cond_limit``."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
        raise InvalidSpec("solve_exact needs a square A and matching b")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise InvalidSpec("non-finite entries in the system")
    cond = condition_number(A)
    if cond > cond_limit:
        log.info("cond=%.3e above %.1e, using least squares", cond, cond_limit)
        c, *_ = linalg.lstsq(A, b, lapack_driver="gelsd")
        return c
    lu, piv = linalg.lu_factor(A, check_finite=False)
    scale = np.max(np.abs(A))
    if np.min(np.abs(np.diag(lu))) <= 1e-300 * max(scale, 1e-300):
        raise SingularSystem("zero pivot in LU factorization")
    log.debug("LU solve, cond=%.3e", cond)
    return linalg.lu_solve((lu, piv), b, check_finite=False)


def solve_regularized(A, b, delta: float, rtol: float = 1e-6):
    """Minimum-norm ``c`` with ``||A c - b|| <= delta``.

    On the discrepancy boundary the solution is the Tikhonov solution
    ``(A^T A + mu I)^{-1} A^T b`` with ``mu`` chosen so the residual equals
    ``delta``; the residual is increasing in ``mu`` and is solved in ``log mu``.
    """
    if not delta > 0:
        raise InvalidSpec("delta must be positive")
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    bnorm = float(np.linalg.norm(b))
    if bnorm <= delta:
        return np.zeros(A.shape[1])
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    beta = U.T @ b
    perp2 = max(bnorm ** 2 - float(beta @ beta), 0.0)

    def residual(mu):
        f = mu / (s * s + mu)
        return math.sqrt(float(np.sum((f * beta) ** 2)) + perp2)

    def coeffs(mu):
        return Vt.T @ (s * beta / (s * s + mu))

    if residual(0.0) >= delta:
        log.warning("delta=%.3e below the least-squares residual %.3e", delta, residual(0.0))
        return coeffs(0.0) if s[-1] > 0 else np.linalg.lstsq(A, b, rcond=None)[0]
    lo = math.log(max(s[-1] ** 2, 1e-300) * 1e-8 + 1e-300)
    hi = math.log(s[0] ** 2 * 1e8 + bnorm ** 2 / delta * s[0] + 1e-300)
    g = lambda lm: residual(math.exp(lm)) - delta
    while g(lo) > 0:
        lo -= 10
    while g(hi) < 0:
        hi += 10
    lm = optimize.brentq(g, lo, hi, xtol=1e-14, rtol=1e-12, maxiter=500)
    mu = math.exp(lm)
    if abs(residual(mu) - delta) > rtol * delta:
        raise NotConverged("discrepancy equation did not converge")
    return coeffs(mu)


# --------------------------------------------------------------------------
# control evaluation and verification


def reconstruct_control(coeffs, t, tau: float, T: float):
    """``v(t) = sum_n c_n phi_n(t)``."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    for n, cn in enumerate(np.asarray(coeffs, dtype=float), start=1):
        if cn:
            out = out + cn * phi_n(t, n, tau, T)
    return out


def norm_l2_time(coeffs, tau: float, T: float) -> float:
    """``||v||_2`` on ``[0, T]`` by orthogonality of the sine basis."""
    c = np.asarray(coeffs, dtype=float)
    return math.sqrt(0.5 * (T - tau) * float(c @ c))


def norm_l2_space(profile, xs=None) -> float:
    """Composite Simpson L2 norm of a profile (``SolutionGrid`` row or values with ``xs``)."""
    if isinstance(profile, SolutionGrid):
        xs, vals = profile.xs, profile.theta[-1]
    else:
        vals = np.asarray(profile, dtype=float)
        if xs is None:
            raise InvalidSpec("xs required with raw values")
    return math.sqrt(max(float(sint.simpson(np.asarray(vals) ** 2, x=np.asarray(xs))), 0.0))


def verify_control(problem: ControlProblem, coeffs, profile: AccuracyProfile | str | None = None,
                   points: int = VERIFY_POINTS):
    """Re-simulate with ``g = v`` and return ``(||theta(., T)||_2, final profile)``."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (problem.N + 1,):
        raise InvalidSpec(f"expected {problem.N + 1} coefficients")
    xs = np.linspace(0.0, problem.params.L, points)
    grid = solve_grid(problem.controlled_spec(coeffs), xs, [problem.T], profile)
    if not grid.all_converged:
        raise NotConverged("closed-loop simulation flagged non-converged entries")
    return norm_l2_space(grid), grid


def _extended_exact(problem: ControlProblem, bits: int):
    from . import hiprec

    Ah, bh, _ = hiprec.control_system(problem, bits=bits)
    with hiprec.precision(bits):
        c = hiprec.to_float(hiprec.lu_solve(Ah, bh))
    sv = hiprec.singular_values(Ah, bits)
    return c, float(sv[0] / sv[-1])


def synthesize(problem: ControlProblem, delta: float | None = None,
               profile: AccuracyProfile | str | None = None, verify: bool = True,
               system=None, precision: str = "auto", bits: int = 192) -> ControlSolution:
    """Assemble, solve (exact when ``delta`` is None) and optionally verify.

    ``precision`` selects the exact-solve path: ``"double"`` (LU, or least
    squares past ``LU_COND_LIMIT``), ``"extended"`` (multiprecision assembly
    and LU), or ``"auto"`` (extended once ``cond(A) > EXTENDED_COND``).
    """
    if precision not in ("auto", "double", "extended"):
        raise InvalidSpec(f"unknown precision {precision!r}")
    A, b, cond = system if system is not None else assemble_system(problem, profile)
    if delta is None:
        from .hiprec import supports

        want_ext = precision == "extended" or (precision == "auto" and cond > EXTENDED_COND)
        if want_ext and supports(problem.initial):
            c, cond = _extended_exact(problem, bits)
            method = "lu-extended"
        else:
            if want_ext:
                log.warning("no extended-precision transform for %s; using double precision",
                            type(problem.initial).__name__)
            c = solve_exact(A, b)
            method = "lu" if cond <= LU_COND_LIMIT else "lstsq"
        log.info("exact solve via %s, cond=%.3e", method, cond)
    else:
        c = solve_regularized(A, b, delta)
        method = "discrepancy"
    err, grid = verify_control(problem, c, profile) if verify else (None, None)
    return ControlSolution(
        coeffs=c,
        control_norm=norm_l2_time(c, problem.tau, problem.T),
        residual_norm=float(np.linalg.norm(A @ c - b)),
        verified_error=err,
        regularized=delta is not None,
        delta=delta,
        condition_estimate=cond,
        method=method,
        final_profile=grid,
    )


def select_delta(problem: ControlProblem, target_error: float, system=None,
                 bounds: tuple[float, float] = (1e-6, 1e-1), rtol: float = 1e-3,
                 profile: AccuracyProfile | str | None = None, scan: int = 41, maxiter: int = 60) -> float:
    """Smallest ``delta`` in ``bounds`` whose verified final error reaches ``target_error``.

    The final error is not monotone in ``delta``, so a log-spaced scan locates
    the first crossing and bisection in ``log delta`` refines it.
    """
    A, b, _ = system if system is not None else assemble_system(problem, profile)

    def err(logd):
        return verify_control(problem, solve_regularized(A, b, math.exp(logd)), profile)[0]

    grid = np.linspace(math.log(bounds[0]), math.log(bounds[1]), scan)
    errs = [err(g) for g in grid]
    hit = next((i for i, e in enumerate(errs) if e >= target_error), None)
    if hit is None:
        log.warning("target %.3e not reached; largest error %.3e", target_error, max(errs))
        return math.exp(grid[-1])
    if hit == 0:
        return math.exp(grid[0])
    lo, hi = grid[hit - 1], grid[hit]
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        e = err(mid)
        if abs(e - target_error) <= rtol * target_error:
            return math.exp(mid)
        if e < target_error:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))
