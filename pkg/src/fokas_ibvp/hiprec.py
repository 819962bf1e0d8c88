"""Extended-precision assembly of the control system.

The collocation matrices become numerically singular in double precision
once ``cond(A)`` approaches ``1e16``: the small singular directions of ``A``
are then pure quadrature noise and the exact solve returns a different
control. This module repeats the contour quadrature of ``A`` and ``b`` with
gmpy2 multiprecision numbers held in numpy object arrays, using the same
wedge geometry as the double-precision path, and solves the system by LU in
the same precision.
"""

from __future__ import annotations

import logging
import math
from functools import lru_cache

import gmpy2
import numpy as np
from gmpy2 import mpc, mpfr

from .contour import Contour, get_profile, make_contour
from .direct_solver import omega_preimages
from .spectral import ProblemParams, find_roots
from .transforms import Constant, ExpSine, FullSine, HalfCosine, InitialData, PiecewiseStep

log = logging.getLogger(__name__)

DEFAULT_BITS = 192

_exp = np.frompyfunc(gmpy2.exp, 1, 1)
_sqrt = np.frompyfunc(gmpy2.sqrt, 1, 1)
_real = np.frompyfunc(lambda z: z.real, 1, 1)
_imag = np.frompyfunc(lambda z: z.imag, 1, 1)
_to_float = np.frompyfunc(float, 1, 1)
_to_mpc = np.frompyfunc(lambda z: mpc(complex(z)), 1, 1)


def precision(bits: int = DEFAULT_BITS):
    """Context manager setting the working precision (in bits)."""
    return gmpy2.context(gmpy2.get_context(), precision=bits)


def as_mp(values) -> np.ndarray:
    """Exact conversion of a float/complex array into mpc objects."""
    return np.asarray(_to_mpc(np.asarray(values, dtype=complex)), dtype=object)


def to_float(values) -> np.ndarray:
    return np.asarray(_to_float(values), dtype=float)


def _sin_cos(z):
    """``sin z`` and ``cos z`` from one exponential."""
    e = _exp(z * mpc(0, 1))
    inv = 1 / e
    return (e - inv) / mpc(0, 2), (e + inv) / 2


@lru_cache(maxsize=None)
def _gauss_legendre(order: int, bits: int):
    """Nodes and weights of ``order``-point Gauss-Legendre on [-1, 1]."""
    with precision(bits + 32):
        nodes, weights = [], []
        for i in range(1, order + 1):
            x = mpfr(math.cos(math.pi * (i - 0.25) / (order + 0.5)))
            for _ in range(100):
                p0, p1 = mpfr(1), x
                for k in range(2, order + 1):
                    p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
                dp = order * (x * p1 - p0) / (x * x - 1)
                dx = p1 / dp
                x -= dx
                if abs(dx) < mpfr(2) ** (-(bits + 16)):
                    break
            p0, p1 = mpfr(1), x
            for k in range(2, order + 1):
                p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
            dp = order * (x * p1 - p0) / (x * x - 1)
            nodes.append(x)
            weights.append(2 / ((1 - x * x) * dp * dp))
    with precision(bits):
        return (np.array([+n for n in nodes], dtype=object), np.array([+w for w in weights], dtype=object))


def contour_nodes(contour: Contour, order: int, bits: int):
    """Multiprecision nodes and weights along the panels of a double-precision contour."""
    g, w = _gauss_legendre(order, bits)
    L = mpfr(contour.L)
    h = mpfr(contour.offset_h) * L
    phi = mpfr(contour.ray_angle)
    dr = mpc(gmpy2.cos(phi), gmpy2.sin(phi))
    dl = mpc(-gmpy2.cos(phi), gmpy2.sin(phi))

    def ray(edges, direction):
        e = np.array([mpfr(v) for v in edges], dtype=object)
        half = (e[1:] - e[:-1]) / 2
        mid = (e[1:] + e[:-1]) / 2
        s = (mid[:, None] + half[:, None] * g[None, :]).ravel()
        ws = (half[:, None] * w[None, :]).ravel()
        return (mpc(0, 1) * h + s * direction) / L, ws * direction / L

    nr, wr = ray(contour.edges_right, dr)
    nl, wl = ray(contour.edges_left, dl)
    return np.concatenate([nl[::-1], nr]), np.concatenate([-wl[::-1], wr])


def line_nodes(params: ProblemParams, t: float, shift: float, order: int, bits: int, profile):
    """Nodes on the horizontal line ``Im lam = -shift`` truncated by Gaussian decay."""
    prof = get_profile(profile)
    L = params.L
    ts = params.D0 * t / L ** 2
    lim = math.sqrt((prof.decay_log + ts * (shift * L) ** 2) / ts) + 1.0
    panels = max(2, math.ceil(2 * lim / prof.real_panel))
    g, w = _gauss_legendre(order, bits)
    edges = np.array([mpfr(v) for v in np.linspace(-lim, lim, panels + 1)], dtype=object)
    half = (edges[1:] - edges[:-1]) / 2
    mid = (edges[1:] + edges[:-1]) / 2
    a = (mid[:, None] + half[:, None] * g[None, :]).ravel() / mpfr(L)
    wt = (half[:, None] * w[None, :]).ravel() / mpfr(L)
    nodes = np.array([mpc(v, -mpfr(shift)) for v in a], dtype=object)
    return nodes, np.array([mpc(v) for v in wt], dtype=object)


class Kernels:
    """Spectral kernels of the Robin-Dirichlet problem in multiprecision."""

    def __init__(self, params: ProblemParams):
        self.p = params
        self.D = mpfr(params.D0)
        self.K = mpfr(params.K0)
        self.L = mpfr(params.L)
        self.alpha = mpfr(params.alpha)
        self.c = self.K / (2 * self.D)
        self.I = mpc(0, 1)

    def omega(self, lam):
        return self.D * lam * lam + self.I * self.K * lam

    def domega(self, lam):
        return 2 * self.D * lam + self.I * self.K

    def nu(self, lam):
        return -lam - self.I * self.K / self.D

    def mu(self, lam):
        return lam + self.I * self.c

    def delta_alpha(self, lam):
        v = self.nu(lam)
        a, L, I = self.alpha, self.L, self.I
        return _exp(-I * lam * L) * (1 - I * a * lam) - _exp(-I * v * L) * (1 - I * a * v)

    def f_alpha(self, lam, x):
        """``F_alpha(lam, x)`` for object arrays broadcasting ``lam`` against ``x``."""
        m = self.mu(lam)
        s, c = _sin_cos(x * m)
        return (self.alpha * self.c - 1) * s - self.alpha * m * c

    def flux(self, lam):
        return self.K - 2 * self.I * lam * self.D


def theta0_hat(initial: InitialData, lam, L):
    """Closed-form half-interval Fourier transform in multiprecision."""
    I = mpc(0, 1)
    L = mpfr(L)
    pi = gmpy2.const_pi()
    if isinstance(initial, PiecewiseStep):
        s = mpfr(initial._split(float(L)))
        return mpfr(initial.height) * (1 - _exp(-I * lam * s)) / (I * lam)
    if isinstance(initial, Constant):
        return mpfr(initial.value) * (1 - _exp(-I * lam * L)) / (I * lam)
    if isinstance(initial, HalfCosine):
        return mpfr(initial.amplitude) * (-2 * L) * (2 * I * lam * L + pi * _exp(-I * lam * L)) / (
            4 * lam * lam * L * L - pi * pi)
    if isinstance(initial, FullSine):
        return mpfr(initial.amplitude) * (-L * pi) * (1 + _exp(-I * lam * L)) / (lam * lam * L * L - pi * pi)
    if isinstance(initial, ExpSine):
        k = initial.mode * pi / L
        s = mpfr(initial.rate) - I * lam
        sign = -1 if initial.mode % 2 else 1
        return mpfr(initial.amplitude) * k * (1 - sign * _exp(s * L)) / (s * s + k * k)
    raise NotImplementedError(f"no multiprecision transform for {type(initial).__name__}")


def supports(initial: InitialData) -> bool:
    return isinstance(initial, (PiecewiseStep, Constant, HalfCosine, FullSine, ExpSine))


def control_system(problem, bits: int = DEFAULT_BITS, profile="extended"):
    """``(A, b)`` as multiprecision object arrays (real parts), plus the contour used."""
    prof = get_profile(profile)
    p = problem.params
    T, tau, N = problem.T, problem.tau, problem.N
    xs_f = problem.collocation_xs
    ns = np.arange(1, N + 2)
    kap_f = ns * math.pi / (T - tau)
    pts = [0j, -1j * p.K0 / p.D0]
    for k in kap_f:
        pts.extend(omega_preimages(1j * k, p))
        pts.extend(omega_preimages(-1j * k, p))
    contour = make_contour(p, find_roots(p), min(T, T - tau), prof, singular_points=pts, t_max=T)

    with precision(bits):
        kern = Kernels(p)
        I = kern.I
        pi = gmpy2.const_pi()
        lam, wts = contour_nodes(contour, prof.order, bits)
        xs = np.array([mpfr(v) for v in xs_f], dtype=object)
        Tm, taum = mpfr(T), mpfr(tau)
        kap = np.array([n * pi / (Tm - taum) for n in ns], dtype=object)
        w = kern.omega(lam)
        dal = kern.delta_alpha(lam)
        F = kern.f_alpha(lam[None, :], xs[:, None])  # (x, node)

        # basis responses: decaying part by quadrature, poles by residues
        base = kern.flux(lam) / dal * wts
        dec = kap[:, None] * _exp(-w[None, :] * (Tm - taum)) / (w[None, :] ** 2 + kap[:, None] ** 2)
        total = (F * base[None, :]).dot(dec.T)  # (x, n)
        for j, (kf, n) in enumerate(zip(kap_f, ns)):
            sgn = -1 if n % 2 else 1
            for wv, r in ((1j * kf, 0.5j * sgn), (-1j * kf, -0.5j * sgn)):
                wm = mpc(0, 1) * kap[j] * (1 if wv.imag > 0 else -1)
                for q in _preimages(kern, wm):
                    if contour.is_above(complex(q)):
                        qa = np.array([q], dtype=object)
                        kv = kern.flux(qa) * kern.f_alpha(qa[None, :], xs[:, None])[:, 0] / kern.delta_alpha(qa)
                        total[:, j] += 2 * pi * I * kv * mpc(r) / kern.domega(q)
        pref = -I / pi * _exp(-kern.c * (2 * kern.L - xs))
        A = pref[:, None] * total

        # free evolution at T
        b = free_evolution(kern, problem.initial, xs, Tm, lam, wts, w, dal, F, p, prof, bits)
        imag = max(max(abs(v) for v in _imag(A).ravel()), max(abs(v) for v in _imag(b)))
        log.debug("extended assembly: %d nodes, max imaginary residue %.3e", lam.size, float(imag))
        return _real(A), _real(b), contour


def _preimages(kern: Kernels, w):
    disc = gmpy2.sqrt(-kern.K * kern.K + 4 * kern.D * w)
    return ((-kern.I * kern.K + disc) / (2 * kern.D), (-kern.I * kern.K - disc) / (2 * kern.D))


def free_evolution(kern, initial, xs, T, lam, wts, w, dal, F, params, prof, bits):
    """``B(x, T)``: whole-line term on a shifted line plus the contour term."""
    I, L, pi = kern.I, kern.L, gmpy2.const_pi()
    hl = theta0_hat(initial, lam, params.L)
    v = kern.nu(lam)
    hn = theta0_hat(initial, v, params.L)
    m = kern.mu(lam)
    s_lx, _ = _sin_cos((L - xs[:, None]) * m[None, :])
    damp = _exp(-w * T)
    integ = ((F * (_exp(I * L * m) * hl)[None, :] - s_lx * ((1 - I * kern.alpha * v) * hn)[None, :])
             * (damp / dal * wts)[None, :]).sum(axis=1)
    contour_term = -I / pi * _exp(-kern.c * (L - xs)) * integ

    # the whole-line integrand is entire, so the line may be shifted off the
    # removable points of the transform
    shift = 0.5 / params.L
    ln, lw = line_nodes(params, float(T), shift, prof.order, bits, prof)
    vals = _exp(-kern.omega(ln) * T) * theta0_hat(initial, ln, params.L) * lw
    fourier = _exp(I * xs[:, None] * ln[None, :]).dot(vals) / (2 * pi)
    return fourier + contour_term


def lu_solve(A, b):
    """Gaussian elimination with partial pivoting on object arrays."""
    A = np.array(A, dtype=object, copy=True)
    b = np.array(b, dtype=object, copy=True)
    n = A.shape[0]
    for k in range(n):
        piv = max(range(k, n), key=lambda i: abs(A[i, k]))
        if A[piv, k] == 0:
            raise ArithmeticError("singular matrix")
        if piv != k:
            A[[k, piv]] = A[[piv, k]]
            b[[k, piv]] = b[[piv, k]]
        f = A[k + 1:, k] / A[k, k]
        A[k + 1:, k:] -= f[:, None] * A[k, k:][None, :]
        b[k + 1:] -= f * b[k]
    x = np.empty(n, dtype=object)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - A[k, k + 1:].dot(x[k + 1:])) / A[k, k]
    return x


def singular_values(A, bits: int = DEFAULT_BITS):
    """Singular values of a multiprecision real matrix (via mpmath)."""
    import mpmath

    with mpmath.workprec(bits):
        M = mpmath.matrix([[mpmath.mpf(str(v)) for v in row] for row in A])
        s = mpmath.svd_r(M, compute_uv=False)
        return np.array([float(v) for v in s])
