"""Contour construction and quadrature for the spectral integrals.

The contour is a wedge with vertex ``i h`` and rays at angles ``phi`` and
``pi - phi``, oriented from ``inf * exp(i (pi - phi))`` to ``inf * exp(i phi)``.
Geometry is chosen in the nondimensional units ``lam' = lam L`` and
``t' = D0 t / L^2`` so that one profile serves any physical scale; the
Peclet number ``K0 L / D0`` then carries the advection.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import NotConverged, PoleOnContour, ZeroTimeUnbounded
from .spectral import ProblemParams, RootReport
from .transforms import InitialData, gauss_legendre

log = logging.getLogger(__name__)

# scaled ray length past which small-time evaluation is refused
MAX_TRUNCATION = 2e4
# log of the largest integrand magnitude tolerated at the contour vertex
MAX_VERTEX_GROWTH = 600.0



@dataclass(frozen=True)
class AccuracyProfile:
    """Quadrature knobs; lengths are in units of ``1/L``."""

    name: str = "default"
    ray_angle: float = math.pi / 8
    offset_h: float = 0.5
    clearance: float = 0.25
    truncation_cap: float = 200.0  # ray length at t = 0 only
    growth_cap: float = 4.0
    panels: int = 24
    order: int = 16
    grading: float = 1.3
    max_panel: float = 1.0
    real_panel: float = 1.0
    rel_quad_tol: float = 1e-10
    check_convergence: bool = False
    max_refine_depth: int = 40
    decay_digits: float = 16.0
    refine_ratio: float = 1.0

    @property
    def decay_log(self) -> float:
        return self.decay_digits * math.log(10.0)

    def __post_init__(self):
        if not 0 < self.ray_angle < math.pi / 4:
            raise ValueError("ray_angle must lie in (0, pi/4)")
        if self.offset_h <= 0 or self.clearance <= 0 or self.truncation_cap <= 0:
            raise ValueError("offset_h, clearance and truncation_cap must be positive")
        if self.panels < 1 or self.order < 2 or self.grading < 1:
            raise ValueError("bad panel settings")


PROFILES = {
    "fast": AccuracyProfile(name="fast", panels=16, order=12, max_panel=2.0, real_panel=1.5),
    "default": AccuracyProfile(),
    "paper": AccuracyProfile(name="paper", panels=32, order=20, max_panel=0.5, real_panel=0.5,
                             check_convergence=True),
    # used by the extended-precision control assembly
    "extended": AccuracyProfile(name="extended", panels=32, order=32, max_panel=0.5, real_panel=0.5,
                                decay_digits=42.0, refine_ratio=0.5, truncation_cap=400.0),
}


def get_profile(profile: AccuracyProfile | str | None) -> AccuracyProfile:
    if profile is None:
        return PROFILES["default"]
    if isinstance(profile, AccuracyProfile):
        return profile
    try:
        return PROFILES[profile]
    except KeyError:
        raise ValueError(f"unknown accuracy profile {profile!r}; choose from {sorted(PROFILES)}") from None


def gaussian_truncation(D0: float, t_min: float, ray_angle: float = math.pi / 8, decay: float = 1e-16) -> float:
    """Ray length where ``exp(-D0 S^2 cos(2 phi) t_min)`` falls below ``decay``."""
    if t_min <= 0:
        raise ZeroTimeUnbounded("t_min must be positive for a Gaussian truncation")
    return math.sqrt(math.log(1 / decay) / (D0 * math.cos(2 * ray_angle) * t_min))


@dataclass(frozen=True)
class Contour:
    """Discretized wedge contour (physical units) with quadrature weights."""

    offset_h: float
    ray_angle: float
    truncation_S: float
    L: float
    edges_right: np.ndarray
    edges_left: np.ndarray
    order: int
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def vertex(self) -> complex:
        return 1j * self.offset_h

    def height_at(self, re):
        """Imaginary part of the contour above the abscissa ``re``."""
        return self.offset_h + np.abs(np.asarray(re, dtype=float)) * math.tan(self.ray_angle)

    def is_above(self, p: complex) -> bool:
        return p.imag > self.height_at(p.real)

    def distance(self, p: complex) -> float:
        return _distance_to_wedge(p * self.L, self.offset_h * self.L, self.ray_angle, self.truncation_S * self.L) / self.L

    def doubled(self) -> "Contour":
        er = _bisect_edges(self.edges_right)
        el = _bisect_edges(self.edges_left)
        return _build(self.offset_h * self.L, self.ray_angle, self.truncation_S * self.L, self.L, er, el, self.order)


def _bisect_edges(edges):
    mids = 0.5 * (edges[1:] + edges[:-1])
    return np.sort(np.concatenate([edges, mids]))


def _distance_to_wedge(p: complex, h: float, phi: float, S: float) -> float:
    best = math.inf
    for ang in (phi, math.pi - phi):
        d = complex(math.cos(ang), math.sin(ang))
        s = ((p - 1j * h) * d.conjugate()).real
        s = min(max(s, 0.0), S)
        best = min(best, abs(p - (1j * h + s * d)))
    return best


def _graded_edges(S: float, panels: int, grading: float, max_panel: float) -> np.ndarray:
    if grading == 1:
        base = np.linspace(0, S, panels + 1)
    else:
        j = np.arange(panels + 1)
        base = S * (grading ** j - 1) / (grading ** panels - 1)
    out = [0.0]
    for a, b in zip(base[:-1], base[1:]):
        k = max(1, math.ceil((b - a) / max_panel))
        out.extend(np.linspace(a, b, k + 1)[1:])
    return np.asarray(out)


def _refine_edges(edges, h, ang, points, depth_cap, ratio=1.0):
    """Split panels longer than ``1/ratio`` times their distance to any point."""
    if not points:
        return edges
    d = complex(math.cos(ang), math.sin(ang))
    pts = np.asarray(points, dtype=complex)
    out = [edges[0]]
    stack = [(a, b, 0) for a, b in zip(edges[:-1][::-1], edges[1:][::-1])]
    while stack:
        a, b, depth = stack.pop()
        za, zb = 1j * h + a * d, 1j * h + b * d
        seg = zb - za
        s = np.clip(((pts - za) * np.conj(seg)).real / abs(seg) ** 2, 0, 1)
        dist = np.min(np.abs(pts - (za + s * seg)))
        if (b - a) * ratio > dist and depth < depth_cap:
            m = 0.5 * (a + b)
            stack.append((m, b, depth + 1))
            stack.append((a, m, depth + 1))
        else:
            out.append(b)
    return np.asarray(out)


def _build(h, phi, S, L, er, el, order) -> Contour:
    g, w = gauss_legendre(order)
    dr = complex(math.cos(phi), math.sin(phi))
    dl = complex(-math.cos(phi), math.sin(phi))

    def ray(edges, direction):
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        s = (mid[:, None] + half[:, None] * g[None, :]).ravel()
        ws = (half[:, None] * w[None, :]).ravel()
        return (1j * h + s * direction) / L, ws * direction / L

    nr, wr = ray(er, dr)
    nl, wl = ray(el, dl)
    # left ray runs inward, so its weights flip sign; order nodes along the path
    nodes = np.concatenate([nl[::-1], nr])
    weights = np.concatenate([-wl[::-1], wr])
    return Contour(h / L, phi, S / L, L, er, el, order, nodes, weights)


def _check_truncation(S: float, t: float) -> None:
    if S > MAX_TRUNCATION:
        raise NotConverged(f"t={t:g} needs a truncation of {S:.3g}/L; use a larger time")


def make_contour(
    params: ProblemParams,
    roots: RootReport | None,
    t_min: float,
    profile: AccuracyProfile | str | None = None,
    singular_points: Sequence[complex] = (),
    allow_unbounded: bool = False,
    t_max: float | None = None,
) -> Contour:
    """Build the wedge contour for times ``t >= t_min``.

    ``t_min`` is the shortest damping time among the integrands and sets
    the truncation; ``t_max`` (default ``t_min``) bounds the growth near the
    vertex. ``singular_points`` (physical ``lam`` values) are used to refine
    panels; zeros of the denominator in ``roots`` must lie below the contour.
    """
    prof = get_profile(profile)
    L = params.L
    pe = params.K0 * L / params.D0
    phi = prof.ray_angle
    clear = prof.clearance
    roots = roots if roots is not None else RootReport.empty()

    m = (roots.max_upper_imag or 0.0) * L
    h_req = max(clear, 1.5 * m, m + clear) if m > 0 else clear
    h = max(prof.offset_h, h_req)

    if t_min < 0:
        raise ValueError("t_min must be >= 0")
    ts = params.D0 * t_min / L ** 2
    if ts == 0:
        if not allow_unbounded:
            raise ZeroTimeUnbounded("contour integrals are not absolutely convergent at t = 0")
        S = prof.truncation_cap
    else:
        # keep the vertex growth exp((h^2 + Pe h) t') moderate
        tg = params.D0 * (t_min if t_max is None else max(t_max, t_min)) / L ** 2
        if (h * h + pe * h) * tg > prof.growth_cap:
            hg = (-pe + math.sqrt(pe * pe + 4 * prof.growth_cap / tg)) / 2
            h = max(h_req, min(h, hg))
        if (h * h + pe * h) * tg > MAX_VERTEX_GROWTH:
            raise NotConverged(
                f"a denominator zero at Im lam = {m / L:.4g} forces exp({(h * h + pe * h) * tg:.3g}) "
                "growth on the contour; the solution grows beyond double range")
        # Re(omega' t') >= ln(1e16) along the rays, including the vertex offset and drift
        a = math.cos(2 * phi)
        b = (2 * h + pe) * math.sin(phi)
        c = -(h * h + pe * h) - prof.decay_log / ts
        S = (b + math.sqrt(b * b - 4 * a * c)) / (2 * a)
        S = max(S, gaussian_truncation(1.0, ts, phi, math.exp(-prof.decay_log)))
        _check_truncation(S, t_min)

    for r in roots.roots:
        z = complex(r) * L
        if z.imag > 0 and z.imag >= h + abs(z.real) * math.tan(phi):
            raise PoleOnContour(f"denominator zero {r} lies above the contour")
        if _distance_to_wedge(z, h, phi, S) < clear * 0.999:
            raise PoleOnContour(f"denominator zero {r} within clearance of the contour")

    pts = [complex(p) * L for p in singular_points]
    pts += [complex(r) * L for r in roots.roots]
    base = _graded_edges(S, prof.panels, prof.grading, prof.max_panel)
    er = _refine_edges(base, h, phi, pts, prof.max_refine_depth, prof.refine_ratio)
    el = _refine_edges(base, h, math.pi - phi, pts, prof.max_refine_depth, prof.refine_ratio)
    c = _build(h, phi, S, L, er, el, prof.order)
    log.debug("contour h=%.4g S=%.4g nodes=%d", h / L, S / L, c.nodes.size)
    return c


def _apply(integrand, nodes, weights):
    vals = np.asarray(integrand(nodes))
    total = vals @ weights
    scale = np.abs(vals) @ np.abs(weights)
    return total, scale


def integrate(
    contour: Contour,
    integrand: Callable[[np.ndarray], np.ndarray],
    profile: AccuracyProfile | str | None = None,
    check: bool | None = None,
):
    """Integrate ``integrand`` (vectorized over its last axis) along the contour.

    With ``check`` the panels are doubled and the two results compared,
    relative to the L1 size of the integrand. Raises :class:`NotConverged`.
    """
    prof = get_profile(profile)
    check = prof.check_convergence if check is None else check
    total, scale = _apply(integrand, contour.nodes, contour.weights)
    if not np.all(np.isfinite(total)):
        raise NotConverged("non-finite contour integral")
    if check:
        fine = contour.doubled()
        total2, scale2 = _apply(integrand, fine.nodes, fine.weights)
        err = np.abs(total2 - total)
        tol = prof.rel_quad_tol * np.maximum(np.maximum(scale, scale2), 1e-300)
        if np.any(err > tol):
            raise NotConverged(f"contour quadrature changed by {np.max(err):.3e} under panel doubling")
        return total2
    return total


def real_line_nodes(params: ProblemParams, t: float, profile: AccuracyProfile | str | None = None):
    """Gauss nodes and weights on the truncated real line for time ``t > 0``."""
    prof = get_profile(profile)
    L = params.L
    ts = params.D0 * t / L ** 2
    if ts <= 0:
        raise ZeroTimeUnbounded("real-line integral needs t > 0")
    lim = math.sqrt(prof.decay_log / ts)
    _check_truncation(lim, t)
    panels = max(2, math.ceil(2 * lim / prof.real_panel))
    g, w = gauss_legendre(prof.order)
    edges = np.linspace(-lim, lim, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * g[None, :]).ravel() / L
    wt = (half[:, None] * w[None, :]).ravel() / L
    return x.astype(complex), wt.astype(complex)


def integrate_real_line(
    integrand: Callable[[np.ndarray], np.ndarray],
    params: ProblemParams,
    t: float,
    profile: AccuracyProfile | str | None = None,
):
    """Integral of ``integrand(lam)`` over the real line for ``t > 0``."""
    nodes, weights = real_line_nodes(params, t, profile)
    return np.asarray(integrand(nodes)) @ weights


def fourier_term(initial: InitialData, params: ProblemParams, x, t: float,
                 profile: AccuracyProfile | str | None = None):
    """``(1/2pi) int_R exp(i lam x - omega t) hat(lam) dlam``, the whole-line part."""
    from .spectral import omega

    x = np.asarray(x, dtype=float)
    if t == 0:
        if initial.catalog:
            xs = np.clip(x, 0, params.L)
            inside = (x > 0) & (x < params.L)
            return np.where(inside, initial(xs, params.L), 0.5 * initial(xs, params.L)).astype(complex)
        # no decay: plain truncated quadrature, converging like 1/truncation
        prof = get_profile(profile)
        lim = prof.truncation_cap
        edges = np.linspace(-lim, lim, max(2, math.ceil(2 * lim / prof.real_panel)) + 1)
        g, w = gauss_legendre(prof.order)
        half, mid = 0.5 * np.diff(edges), 0.5 * (edges[1:] + edges[:-1])
        nodes = ((mid[:, None] + half[:, None] * g[None, :]).ravel() / params.L).astype(complex)
        weights = ((half[:, None] * w[None, :]).ravel() / params.L).astype(complex)
    else:
        nodes, weights = real_line_nodes(params, t, profile)
    hat = initial.hat(nodes, params.L)
    base = np.exp(-omega(nodes, params) * t) * hat * weights
    return np.exp(1j * np.multiply.outer(x, nodes)) @ base / (2 * np.pi)


def with_profile(profile: AccuracyProfile | str | None, **changes) -> AccuracyProfile:
    return replace(get_profile(profile), **changes)
