"""Evaluation of the contour-integral representation of the direct problem.

The solution is written as

    theta(x, t) = (1/2pi) int_R exp(i lam x - omega t) hat(lam) dlam
                + P(x) int_Gamma [exp(-omega t) I(lam, x)
                                  + Kf(lam, x) Ef(lam) + Kg(lam, x) Eg(lam)] dlam

where ``E = exp(-omega t) * ttransform`` of a boundary signal. Each signal
splits ``E`` into a part with Gaussian decay on the contour and a sum of
simple poles ``r / (omega - w)``. The pole part is integrated exactly by
residues at the ``lam`` preimages of ``w`` lying above the contour, which
keeps the integrals absolutely convergent up to and including the ends.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .contour import AccuracyProfile, Contour, fourier_term, get_profile, integrate, make_contour
from .errors import InvalidSpec, NotConverged
from .spectral import (
    NEUMANN, ProblemParams, RootReport, delta_alpha, delta_rr, delta_zero, domega, f_gamma, find_roots,
    g_kernel, mu, nu, omega,
)
from .transforms import BoundarySignal, Constant, InitialData, Zero, constant_signal

log = logging.getLogger(__name__)

IMAG_TOL = 1e-8


class BCKind(enum.Enum):
    ROBIN_ROBIN = "RR"
    ROBIN_DIRICHLET = "RD"
    DIRICHLET_DIRICHLET = "DD"
    NEUMANN_NEUMANN = "NN"


@dataclass(frozen=True)
class IbvpSpec:
    """Direct problem: parameters, initial profile and the two boundary signals.

    For ``NEUMANN_NEUMANN`` the signals are the prescribed fluxes
    ``theta_x(0, t)`` and ``theta_x(L, t)``.
    """

    params: ProblemParams
    initial: InitialData
    left: BoundarySignal = field(default_factory=Zero)
    right: BoundarySignal = field(default_factory=Zero)
    bc_kind: BCKind = BCKind.ROBIN_ROBIN

    def __post_init__(self):
        p = self.params
        kind = self.bc_kind
        if kind is BCKind.NEUMANN_NEUMANN:
            if not (p.alpha is NEUMANN and p.beta is NEUMANN):
                raise InvalidSpec("Neumann-Neumann needs alpha = beta = NEUMANN")
            return
        if p.is_neumann:
            raise InvalidSpec(f"{kind.value} needs finite Robin coefficients")
        if kind is BCKind.ROBIN_DIRICHLET and p.beta != 0:
            raise InvalidSpec("Robin-Dirichlet needs beta = 0")
        if kind is BCKind.DIRICHLET_DIRICHLET and (p.alpha != 0 or p.beta != 0):
            raise InvalidSpec("Dirichlet-Dirichlet needs alpha = beta = 0")


@dataclass
class SolutionGrid:
    xs: np.ndarray
    ts: np.ndarray
    theta: np.ndarray
    converged: np.ndarray
    imag_residual: np.ndarray

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))


# --------------------------------------------------------------------------
# kernel sets


class _Kernels:
    """Integrand pieces for one boundary-condition family."""

    def __init__(self, params: ProblemParams):
        self.p = params
        self.c = params.shift
        self.L = params.L

    def roots(self) -> RootReport:
        return RootReport.empty()

    def prefactor(self, x):
        raise NotImplementedError

    def init(self, lam, x, hat_lam, hat_nu):
        raise NotImplementedError

    def kf(self, lam, x):
        raise NotImplementedError

    def kg(self, lam, x):
        raise NotImplementedError

    def flux(self, lam):
        return self.p.K0 - 2j * lam * self.p.D0


class _RR(_Kernels):
    def roots(self):
        return find_roots(self.p)

    def prefactor(self, x):
        return -1j / np.pi * np.exp(-self.c * (self.L - x))

    def init(self, lam, x, hat_lam, hat_nu):
        a, b = self.p.alpha, self.p.beta
        v = nu(lam, self.p)
        den = delta_rr(lam, self.p)
        return (f_gamma(lam, x, a, self.p) * (1 - 1j * b * lam) * np.exp(1j * self.L * mu(lam, self.p)) * hat_lam
                - f_gamma(lam, x - self.L, b, self.p) * (1 - 1j * a * v) * hat_nu) / den

    def kf(self, lam, x):
        return self.flux(lam) * f_gamma(lam, x - self.L, self.p.beta, self.p) / delta_rr(lam, self.p)

    def kg(self, lam, x):
        return -self.flux(lam) * f_gamma(lam, x, self.p.alpha, self.p) * math.exp(-self.c * self.L) / delta_rr(lam, self.p)


class _RD(_Kernels):
    def roots(self):
        return find_roots(self.p)

    def prefactor(self, x):
        return -1j / np.pi * np.exp(-self.c * (self.L - x))

    def init(self, lam, x, hat_lam, hat_nu):
        a = self.p.alpha
        v = nu(lam, self.p)
        m = mu(lam, self.p)
        den = delta_alpha(lam, self.p)
        return (f_gamma(lam, x, a, self.p) * np.exp(1j * self.L * m) * hat_lam
                - (1 - 1j * a * v) * np.sin((self.L - x) * m) * hat_nu) / den

    def kf(self, lam, x):
        m = mu(lam, self.p)
        return self.flux(lam) * np.sin((self.L - x) * m) / delta_alpha(lam, self.p)

    def kg(self, lam, x):
        return -self.flux(lam) * f_gamma(lam, x, self.p.alpha, self.p) * math.exp(-self.c * self.L) / delta_alpha(lam, self.p)


class _DD(_Kernels):
    def prefactor(self, x):
        return -1j / np.pi * np.exp(-self.c * (self.L - x))

    def init(self, lam, x, hat_lam, hat_nu):
        m = mu(lam, self.p)
        den = delta_zero(lam, self.p)
        return (-np.sin(x * m) * np.exp(1j * self.L * m) * hat_lam - np.sin((self.L - x) * m) * hat_nu) / den

    def kf(self, lam, x):
        m = mu(lam, self.p)
        return self.flux(lam) * np.sin((self.L - x) * m) / delta_zero(lam, self.p)

    def kg(self, lam, x):
        m = mu(lam, self.p)
        return self.flux(lam) * np.sin(x * m) * math.exp(-self.c * self.L) / delta_zero(lam, self.p)


class _NN(_Kernels):
    def roots(self):
        # lam = 0 and lam = -i K0/D0 are removable zeros of lam*nu*Delta0 only
        # in combination; both sit below the contour.
        return RootReport.empty()

    def prefactor(self, x):
        return 1 / np.pi * np.exp(-self.c * (self.L - x))

    def _den(self, lam):
        return delta_zero(lam, self.p) * lam * nu(lam, self.p)

    def init(self, lam, x, hat_lam, hat_nu):
        m = mu(lam, self.p)
        v = nu(lam, self.p)
        return (lam * g_kernel(lam, x, self.p) * np.exp(1j * self.L * m) * hat_lam
                - v * g_kernel(lam, x - self.L, self.p) * hat_nu) / self._den(lam)

    def kf(self, lam, x):
        return -1j * self.flux(lam) * g_kernel(lam, x - self.L, self.p) / self._den(lam)

    def kg(self, lam, x):
        return 1j * self.flux(lam) * g_kernel(lam, x, self.p) * math.exp(-self.c * self.L) / self._den(lam)


_KERNELS = {
    BCKind.ROBIN_ROBIN: _RR,
    BCKind.ROBIN_DIRICHLET: _RD,
    BCKind.DIRICHLET_DIRICHLET: _DD,
    BCKind.NEUMANN_NEUMANN: _NN,
}


# --------------------------------------------------------------------------
# evaluation


def omega_preimages(w: complex, params: ProblemParams) -> tuple[complex, complex]:
    """The two ``lam`` with ``omega(lam) = w``."""
    D, K = params.D0, params.K0
    disc = np.sqrt(complex(-K * K + 4 * D * w))
    return ((-1j * K + disc) / (2 * D), (-1j * K - disc) / (2 * D))


def _signal_poles(signals, t, params):
    pts = []
    for sig in signals:
        _, poles = sig.damped(np.zeros(1, dtype=complex), t, params)
        for w, _ in poles:
            pts.extend(omega_preimages(w, params))
    return pts


class _Evaluator:
    """Contour integrals for one spec at one time, vectorized over ``x``."""

    def __init__(self, spec: IbvpSpec, t: float, profile: AccuracyProfile | str | None = None,
                 contour: Contour | None = None, roots: RootReport | None = None):
        self.spec = spec
        self.t = t
        self.prof = get_profile(profile)
        self.k = _KERNELS[spec.bc_kind](spec.params)
        p = spec.params
        if contour is None:
            roots = self.k.roots() if roots is None else roots
            pts = _signal_poles((spec.left, spec.right), t, p) + [0j, -1j * p.K0 / p.D0]
            damp = min([t] + [sig.damping_time(t) for sig in (spec.left, spec.right)])
            contour = make_contour(p, roots, damp, self.prof, singular_points=pts,
                                   allow_unbounded=True, t_max=t)
        self.contour = contour

    def gamma_integrand(self, xs):
        spec, t, k = self.spec, self.t, self.k
        p = spec.params
        xs = np.asarray(xs, dtype=float)[:, None]

        def f(lam):
            lam = lam[None, :]
            w = omega(lam, p)
            out = np.zeros(np.broadcast(xs, lam).shape, dtype=complex)
            if not _is_zero_initial(spec.initial):
                hl = spec.initial.hat(lam, p.L)
                hn = spec.initial.hat(nu(lam, p), p.L)
                out += np.exp(-w * t) * k.init(lam, xs, hl, hn)
            if not spec.left.is_zero():
                dec, _ = spec.left.damped(lam, t, p)
                out += k.kf(lam, xs) * dec
            if not spec.right.is_zero():
                dec, _ = spec.right.damped(lam, t, p)
                out += k.kg(lam, xs) * dec
            return out

        return f

    def residues(self, xs):
        spec, k, p = self.spec, self.k, self.spec.params
        xs = np.asarray(xs, dtype=float)
        out = np.zeros(xs.shape, dtype=complex)
        for sig, kern in ((spec.left, k.kf), (spec.right, k.kg)):
            if sig.is_zero():
                continue
            _, poles = sig.damped(np.zeros(1, dtype=complex), self.t, p)
            for w, r in poles:
                for q in omega_preimages(w, p):
                    if self.contour.is_above(q):
                        out += 2j * np.pi * kern(np.asarray(q), xs) * r / domega(q, p)
        return out

    def values(self, xs, check: bool | None = None):
        xs = np.asarray(xs, dtype=float)
        p = self.spec.params
        integ = integrate(self.contour, self.gamma_integrand(xs), self.prof, check=check)
        total = self.k.prefactor(xs) * (integ + self.residues(xs))
        if not _is_zero_initial(self.spec.initial):
            total = total + fourier_term(self.spec.initial, p, xs, self.t, self.prof)
        return total


def _is_zero_initial(initial: InitialData) -> bool:
    return isinstance(initial, Constant) and initial.value == 0


def _check_x(xs, L):
    xs = np.asarray(xs, dtype=float)
    if np.any(xs < 0) or np.any(xs > L):
        raise InvalidSpec(f"x must lie in [0, {L}]")
    return xs


def _real(values, strict: bool):
    values = np.asarray(values)
    resid = np.abs(values.imag)
    ok = resid <= IMAG_TOL * (1 + np.abs(values.real))
    if strict and not np.all(ok):
        raise NotConverged(f"imaginary residual {np.max(resid):.3e} exceeds tolerance")
    return values.real, resid, ok


def _evaluate(spec: IbvpSpec, xs, t: float, profile=None, strict=True):
    if t < 0:
        raise InvalidSpec("t must be >= 0")
    xs = _check_x(xs, spec.params.L)
    if t == 0:
        return np.asarray(spec.initial(xs, spec.params.L), dtype=float)
    vals = _Evaluator(spec, t, profile).values(xs)
    return _real(vals, strict)[0]


def _scalar_or_array(x, values):
    return float(values[0]) if np.ndim(x) == 0 else values


def _as_kind(spec: IbvpSpec, kind: BCKind) -> IbvpSpec:
    if spec.bc_kind is not kind:
        spec = IbvpSpec(spec.params, spec.initial, spec.left, spec.right, kind)
    return spec


def solve_rr(spec: IbvpSpec, x, t: float, profile=None):
    """Robin-Robin solution at ``x`` (scalar or array) and time ``t``."""
    spec = _as_kind(spec, BCKind.ROBIN_ROBIN)
    return _scalar_or_array(x, _evaluate(spec, np.atleast_1d(x), t, profile))


def solve_rd(spec: IbvpSpec, x, t: float, profile=None):
    """Robin-Dirichlet solution (``beta = 0``) from its reduced kernels."""
    spec = _as_kind(spec, BCKind.ROBIN_DIRICHLET)
    return _scalar_or_array(x, _evaluate(spec, np.atleast_1d(x), t, profile))


def solve_dd(spec: IbvpSpec, x, t: float, profile=None):
    spec = _as_kind(spec, BCKind.DIRICHLET_DIRICHLET)
    return _scalar_or_array(x, _evaluate(spec, np.atleast_1d(x), t, profile))


def solve_nn(spec: IbvpSpec, x, t: float, profile=None):
    """Neumann-Neumann solution; ``spec.left/right`` are the boundary fluxes."""
    spec = _as_kind(spec, BCKind.NEUMANN_NEUMANN)
    return _scalar_or_array(x, _evaluate(spec, np.atleast_1d(x), t, profile))


def solve(spec: IbvpSpec, x, t: float, profile=None):
    return _scalar_or_array(x, _evaluate(spec, np.atleast_1d(x), t, profile))


def solve_grid(spec: IbvpSpec, xs, ts, profile=None, check: bool | None = None) -> SolutionGrid:
    """Evaluate on a tensor grid. One contour per time; flags instead of raising."""
    xs = _check_x(np.atleast_1d(xs), spec.params.L)
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    theta = np.zeros((ts.size, xs.size))
    conv = np.ones_like(theta, dtype=bool)
    resid = np.zeros_like(theta)
    roots = _KERNELS[spec.bc_kind](spec.params).roots()
    for i, t in enumerate(ts):
        if t == 0:
            theta[i] = spec.initial(xs, spec.params.L)
            continue
        ev = _Evaluator(spec, t, profile, roots=roots)
        try:
            vals = ev.values(xs, check=check)
        except NotConverged as exc:
            log.warning("t=%g: %s", t, exc)
            vals = ev.values(xs, check=False)
            conv[i] = False
        theta[i], resid[i], ok = _real(vals, strict=False)
        conv[i] &= ok
    return SolutionGrid(xs, ts, theta, conv, resid)


# --------------------------------------------------------------------------
# presets


def braester_spec(q: float, theta0: float, thetas: float, params: ProblemParams) -> IbvpSpec:
    """Constant-flux infiltration with a water table: ``u = theta - theta0``."""
    if params.alpha != 1.0 or params.beta != 0.0:
        params = params.with_(alpha=1.0, beta=0.0)
    return IbvpSpec(params, Constant(0.0), constant_signal(q / params.D0),
                    constant_signal(thetas - theta0), BCKind.ROBIN_DIRICHLET)


def braester_profile(q: float, theta0: float, thetas: float, params: ProblemParams, x, t: float, profile=None):
    """Water content for constant flux ``q`` at the surface and ``theta = thetas`` at depth ``L``.

    Uses a Robin length of 1 in the units of ``x`` at the surface, so the
    surface condition reads ``D0 (theta - theta0) - D0 theta_x = q``.
    """
    spec = braester_spec(q, theta0, thetas, params)
    return theta0 + np.asarray(solve_rd(spec, x, t, profile))


# Rehovot sand, cm and seconds
BRAESTER_PARAMS = dict(D0=0.208e-1, K0=0.144 * 0.208e-1, L=60.0, alpha=1.0, beta=0.0)
BRAESTER_DATA = dict(q=0.3e-3, theta0=0.065, thetas=0.397)

PHILIP_PARAMS = dict(D0=0.5, K0=1.0, alpha=0.5, beta=0.5)


def philip_spec(R: float, L: float) -> IbvpSpec:
    params = ProblemParams(L=L, **PHILIP_PARAMS)
    return IbvpSpec(params, Constant(0.0), constant_signal(R), Zero(), BCKind.ROBIN_ROBIN)


def philip_conductivity(R: float, L: float, x, t: float, profile=None):
    """Conductivity for rainfall at rate ``R`` into a shallow profile (normalized units)."""
    return np.asarray(solve_rr(philip_spec(R, L), x, t, profile))
