"""Forward transforms of initial profiles and boundary signals.

Initial data carry the half-interval Fourier transform

    hat(lam) = int_0^L exp(-i lam x) theta0(x) dx,

closed form for the catalog variants and composite Gauss-Legendre otherwise.
Boundary signals carry the t-transform ``int_0^t exp(w s) g(s) ds``, and a
damped split used by the contour integrals (see :meth:`BoundarySignal.damped`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .spectral import ProblemParams, omega

SERIES_SWITCH = 1e-6
RESONANCE_TOL = 1e-6
REMOVABLE_RADIUS = 1e-3


@lru_cache(maxsize=None)
def gauss_legendre(order: int):
    return np.polynomial.legendre.leggauss(order)


def composite_nodes(a: float, b: float, panels: int, order: int, breaks=()):
    """Composite Gauss-Legendre nodes/weights on [a, b], panel edges include ``breaks``."""
    edges = np.linspace(a, b, panels + 1)
    if breaks:
        edges = np.unique(np.concatenate([edges, [p for p in breaks if a < p < b]]))
    g, w = gauss_legendre(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * g[None, :]).ravel()
    wt = (half[:, None] * w[None, :]).ravel()
    return x, wt


def _exprel(z):
    """(exp(z) - 1) / z, accurate near 0 for complex arrays."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-3
    zs = z[small]
    out[small] = 1 + zs / 2 + zs * zs / 6 + zs ** 3 / 24 + zs ** 4 / 120
    zb = z[~small]
    out[~small] = np.expm1(zb) / zb
    return out


# --------------------------------------------------------------------------
# initial data


class InitialData:
    """Initial water-content profile on ``[0, L]``."""

    catalog = True

    def __call__(self, x, L: float):
        raise NotImplementedError

    def hat(self, lam, L: float):
        raise NotImplementedError

    def breakpoints(self, L: float) -> tuple[float, ...]:
        return ()

    def quadrature_hat(self, lam, L: float, panels: int = 64, order: int = 8):
        lam = np.asarray(lam, dtype=complex)
        x, w = composite_nodes(0.0, L, panels, order, self.breakpoints(L))
        vals = w * np.asarray(self(x, L), dtype=float)
        flat = lam.reshape(-1)
        out = np.exp(-1j * flat[:, None] * x[None, :]) @ vals
        return out.reshape(lam.shape)

    def _patch_removable(self, lam, L, out, centers):
        """Replace values within REMOVABLE_RADIUS/L of ``centers`` by quadrature."""
        if not centers:
            return out
        out = np.array(out, dtype=complex)
        near = np.zeros(lam.shape, dtype=bool)
        for c in centers:
            near |= np.abs(lam - c) * L < REMOVABLE_RADIUS
        if near.any():
            out[near] = self.quadrature_hat(lam[near], L)
        return out if out.ndim else out[()]


@dataclass(frozen=True)
class PiecewiseStep(InitialData):
    """``height`` on ``(0, split)``, zero on ``(split, L)``."""

    height: float = 1.0
    split: float | None = None

    def _split(self, L):
        s = 0.5 * L if self.split is None else self.split
        if not 0 < s < L:
            raise ValueError(f"split must lie in (0, L), got {s}")
        return s

    def __call__(self, x, L):
        x = np.asarray(x, dtype=float)
        s = self._split(L)
        return np.where(x < s, self.height, np.where(x == s, 0.5 * self.height, 0.0))

    def breakpoints(self, L):
        return (self._split(L),)

    def hat(self, lam, L):
        lam = np.asarray(lam, dtype=complex)
        s = self._split(L)
        # (1 - exp(-i lam s)) / (i lam) = s * exprel(-i lam s)
        return self.height * s * _exprel(-1j * lam * s)


@dataclass(frozen=True)
class HalfCosine(InitialData):
    """``amplitude * cos(pi x / (2L))``."""

    amplitude: float = 1.0

    def __call__(self, x, L):
        return self.amplitude * np.cos(np.pi * np.asarray(x, dtype=float) / (2 * L))

    def hat(self, lam, L):
        lam = np.asarray(lam, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -2 * L / (4 * lam ** 2 * L ** 2 - np.pi ** 2) * (2j * lam * L + np.pi * np.exp(-1j * lam * L))
            out = self.amplitude * out
        return self._patch_removable(lam, L, out, [np.pi / (2 * L), -np.pi / (2 * L)])


@dataclass(frozen=True)
class FullSine(InitialData):
    """``amplitude * sin(pi x / L)``."""

    amplitude: float = 1.0

    def __call__(self, x, L):
        return self.amplitude * np.sin(np.pi * np.asarray(x, dtype=float) / L)

    def hat(self, lam, L):
        lam = np.asarray(lam, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -L * np.pi / (lam ** 2 * L ** 2 - np.pi ** 2) * (1 + np.exp(-1j * lam * L))
            out = self.amplitude * out
        return self._patch_removable(lam, L, out, [np.pi / L, -np.pi / L])


@dataclass(frozen=True)
class Constant(InitialData):
    value: float = 1.0

    def __call__(self, x, L):
        return np.full(np.shape(x), float(self.value))

    def hat(self, lam, L):
        lam = np.asarray(lam, dtype=complex)
        return self.value * L * _exprel(-1j * lam * L)


@dataclass(frozen=True)
class ExpSine(InitialData):
    """``amplitude * exp(rate x) * sin(mode pi x / L)``.

    With ``rate = K0/(2 D0)`` and zero Dirichlet data this is a separable
    mode of the advection-diffusion operator.
    """

    rate: float = 0.0
    mode: int = 1
    amplitude: float = 1.0

    def __call__(self, x, L):
        x = np.asarray(x, dtype=float)
        return self.amplitude * np.exp(self.rate * x) * np.sin(self.mode * np.pi * x / L)

    def hat(self, lam, L):
        lam = np.asarray(lam, dtype=complex)
        k = self.mode * np.pi / L
        s = self.rate - 1j * lam
        sign = -1.0 if self.mode % 2 else 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            out = k * (1 - sign * np.exp(s * L)) / (s * s + k * k)
            out = self.amplitude * out
        return self._patch_removable(lam, L, out, [k - 1j * self.rate, -k - 1j * self.rate])


@dataclass(frozen=True)
class Tabulated(InitialData):
    """Samples ``(x_i, theta0_i)`` covering ``[0, L]``, linearly interpolated."""

    xs: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    order: int = 8

    catalog = False

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        if xs.ndim != 1 or xs.size < 2 or xs.size != len(self.values):
            raise ValueError("Tabulated needs matching 1-D xs and values with at least 2 samples")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("Tabulated xs must be strictly increasing")
        object.__setattr__(self, "xs", tuple(float(v) for v in xs))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def _check_cover(self, L):
        if self.xs[0] > 0 or self.xs[-1] < L * (1 - 1e-12):
            raise ValueError(f"Tabulated samples must cover [0, {L}]")

    def __call__(self, x, L):
        return np.interp(np.asarray(x, dtype=float), self.xs, self.values)

    def hat(self, lam, L):
        # one Gauss panel per sample interval: the interpolant is smooth there
        self._check_cover(L)
        lam = np.asarray(lam, dtype=complex)
        edges = np.clip(np.asarray(self.xs), 0.0, L)
        edges = np.unique(edges)
        g, w = gauss_legendre(self.order)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        x = (mid[:, None] + half[:, None] * g[None, :]).ravel()
        wt = (half[:, None] * w[None, :]).ravel() * self(x, L)
        flat = lam.reshape(-1)
        return (np.exp(-1j * flat[:, None] * x[None, :]) @ wt).reshape(lam.shape)

    def quadrature_hat(self, lam, L, panels=64, order=8):
        return self.hat(lam, L)


def theta0_hat(initial: InitialData, lam, params: ProblemParams):
    """Half-interval Fourier transform of the initial profile."""
    return initial.hat(lam, params.L)


# --------------------------------------------------------------------------
# t-transforms


def ttransform_constant(value: float, w, t: float):
    """``value * (exp(w t) - 1) / w`` with the ``w -> 0`` limit handled."""
    if t < 0:
        raise ValueError("t must be >= 0")
    w = np.asarray(w, dtype=complex)
    z = w * t
    out = np.empty_like(z)
    small = np.abs(z) < SERIES_SWITCH
    zs = z[small]
    out[small] = t * (1 + zs / 2 + zs * zs / 6 + zs ** 3 / 24)
    out[~small] = np.expm1(z[~small]) / w[~small]
    return value * out


def phi_n(t, n: int, tau: float, T: float):
    """Sine basis function ``sin(n pi (t - tau)/(T - tau))`` supported on ``[tau, T]``."""
    if n < 1 or not 0 <= tau < T:
        raise ValueError("need n >= 1 and 0 <= tau < T")
    t = np.asarray(t, dtype=float)
    inside = (t >= tau) & (t <= T)
    return np.where(inside, np.sin(n * np.pi * (t - tau) / (T - tau)), 0.0)


def _varphi_quad(w: complex, t: float, n: int, tau: float, T: float) -> complex:
    upper = min(t, T)
    if upper <= tau:
        return 0j

    def f(s, part):
        v = np.exp(w * s) * math.sin(n * math.pi * (s - tau) / (T - tau))
        return v.real if part == 0 else v.imag

    opts = dict(epsabs=1e-14, epsrel=1e-13, limit=400)
    re = integrate.quad(f, tau, upper, args=(0,), **opts)[0]
    im = integrate.quad(f, tau, upper, args=(1,), **opts)[0]
    return complex(re, im)


def varphi_n(lam, t: float, n: int, tau: float, T: float, params: ProblemParams):
    """t-transform ``int_0^t exp(omega(lam) s) phi_n(s) ds`` of one basis function."""
    if n < 1 or not 0 <= tau < T:
        raise ValueError("need n >= 1 and 0 <= tau < T")
    lam = np.asarray(lam, dtype=complex)
    w = omega(lam, params)
    if t <= tau:
        return np.zeros_like(w)
    te = min(t, T)
    Tt = T - tau
    npi = n * math.pi
    den = Tt * Tt * w * w + npi * npi
    arg = npi * (te - tau) / Tt
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = (-Tt / den) * (-npi * np.exp(w * tau) + np.exp(w * te) * (npi * np.cos(arg) - Tt * w * np.sin(arg)))
    bad = np.abs(den) < RESONANCE_TOL * npi * npi
    if np.any(bad):
        flat_w = w[bad]
        out[bad] = [_varphi_quad(complex(v), te, n, tau, T) for v in np.atleast_1d(flat_w)]
    return out


class BoundarySignal:
    """Time signal prescribed at one end of the interval."""

    def value(self, t):
        raise NotImplementedError

    def ttransform(self, w, t: float):
        raise NotImplementedError

    def damped(self, lam, t: float, params: ProblemParams):
        """Split ``exp(-omega t) * ttransform(omega, t)`` into two pieces.

        Returns ``(decaying, poles)`` where ``decaying`` has Gaussian decay
        along admissible contours, and ``poles`` is a list of ``(w_j, r_j)``
        so that the remainder is ``sum_j r_j / (omega - w_j)``.
        """
        raise NotImplementedError

    def is_zero(self) -> bool:
        return False

    def damping_time(self, t: float) -> float:
        """Smallest ``d`` with the decaying part bounded by ``exp(-Re(omega) d)``."""
        return t


@dataclass(frozen=True)
class Zero(BoundarySignal):
    def value(self, t):
        return np.zeros(np.shape(t))

    def ttransform(self, w, t):
        return np.zeros(np.shape(w), dtype=complex)

    def damped(self, lam, t, params):
        return np.zeros(np.shape(lam), dtype=complex), []

    def is_zero(self):
        return True

    def damping_time(self, t):
        return math.inf


@dataclass(frozen=True)
class ConstantSignal(BoundarySignal):
    value_: float = 0.0

    def value(self, t):
        return np.full(np.shape(t), float(self.value_))

    def ttransform(self, w, t):
        return ttransform_constant(self.value_, w, t)

    def damped(self, lam, t, params):
        w = omega(lam, params)
        with np.errstate(divide="ignore", invalid="ignore"):
            dec = -self.value_ * np.exp(-w * t) / w
        return dec, [(0j, complex(self.value_))]

    def is_zero(self):
        return self.value_ == 0.0


def constant_signal(value: float) -> BoundarySignal:
    """Canonical constant signal; zero maps to :class:`Zero`."""
    return Zero() if value == 0 else ConstantSignal(float(value))


@dataclass(frozen=True)
class SineSeries(BoundarySignal):
    """``sum_n c_n phi_n(t)``, ``n = 1..len(coeffs)``, supported on ``[tau, T]``."""

    coeffs: tuple[float, ...] = ()
    tau: float = 0.0
    T: float = 1.0
    _c: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 <= self.tau < self.T:
            raise ValueError("SineSeries needs 0 <= tau < T")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in np.ravel(self.coeffs)))
        object.__setattr__(self, "_c", np.asarray(self.coeffs, dtype=float))

    @property
    def modes(self):
        return np.arange(1, len(self.coeffs) + 1)

    @property
    def frequencies(self):
        return self.modes * np.pi / (self.T - self.tau)

    def value(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for n, c in zip(self.modes, self._c):
            out = out + c * phi_n(t, int(n), self.tau, self.T)
        return out

    def ttransform(self, w, t):
        w = np.asarray(w, dtype=complex)
        out = np.zeros(w.shape, dtype=complex)
        if t <= self.tau:
            return out
        te = min(t, self.T)
        d = te - self.tau
        for k, c in zip(self.frequencies, self._c):
            if c == 0:
                continue
            # int_tau^te exp(w s) sin(k (s - tau)) ds
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                term = np.exp(w * self.tau) * (np.exp(w * d) * (w * math.sin(k * d) - k * math.cos(k * d)) + k) / (w * w + k * k)
            bad = np.abs(w * w + k * k) < RESONANCE_TOL * k * k
            if np.any(bad):
                n = int(round(k * (self.T - self.tau) / math.pi))
                term[bad] = [_varphi_quad(complex(v), te, n, self.tau, self.T) for v in w[bad]]
            out = out + c * term
        return out

    def damped(self, lam, t, params):
        lam = np.asarray(lam, dtype=complex)
        w = omega(lam, params)
        dec = np.zeros(w.shape, dtype=complex)
        if t <= self.tau:
            return dec, []
        poles = []
        if t <= self.T:
            d = t - self.tau
            for k, c in zip(self.frequencies, self._c):
                if c == 0:
                    continue
                with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                    dec = dec + c * k * np.exp(-w * d) / (w * w + k * k)
                poles.append((1j * k, 0.5j * c * np.exp(-1j * k * d)))
                poles.append((-1j * k, -0.5j * c * np.exp(1j * k * d)))
            return dec, poles
        # past the support: the whole damped transform decays like exp(-w (t - T))
        with np.errstate(over="ignore"):
            dec = np.exp(-w * t) * self.ttransform(w, self.T)
        return dec, []

    def is_zero(self):
        return not np.any(self._c)

    def damping_time(self, t):
        if t <= self.tau:
            return math.inf
        return t - self.tau if t <= self.T else t - self.T


def sine_series_ttransform(signal: SineSeries, lam, t: float, params: ProblemParams):
    """``sum_n c_n varphi_n(lam, t)``."""
    lam = np.asarray(lam, dtype=complex)
    out = np.zeros(lam.shape, dtype=complex)
    for n, c in zip(signal.modes, signal.coeffs):
        if c:
            out = out + c * varphi_n(lam, t, int(n), signal.tau, signal.T, params)
    return out
