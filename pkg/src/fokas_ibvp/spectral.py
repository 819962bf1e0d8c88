"""Closed-form spectral kernels and root analysis of the determinant.

Everything here is a pure function of ``lam`` (scalar or ndarray of complex
values) and an immutable :class:`ProblemParams`.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import ComplexEta, CountMismatch, DegenerateDenominator, InvalidSpec

log = logging.getLogger(__name__)

ROOT_TOL = 1e-10
Y_SCAN_MAX = 50.0
Y_SCAN_BRACKETS = 10_000


class _Neumann(enum.Enum):
    NEUMANN = "neumann"

    def __repr__(self):
        return "NEUMANN"


#: Marker for an infinite Robin coefficient (pure Neumann end).
NEUMANN = _Neumann.NEUMANN


def _is_neumann(value) -> bool:
    return value is NEUMANN


@dataclass(frozen=True)
class ProblemParams:
    """Physical constants of the advection-diffusion IBVP on ``0 < x < L``.

    ``alpha`` and ``beta`` are the Robin lengths in ``theta - alpha*theta_x``
    at ``x = 0`` and ``theta - beta*theta_x`` at ``x = L``. Either may be the
    :data:`NEUMANN` marker.
    """

    D0: float
    K0: float
    L: float
    alpha: float | _Neumann = 0.0
    beta: float | _Neumann = 0.0

    def __post_init__(self):
        if not (self.D0 > 0 and math.isfinite(self.D0)):
            raise InvalidSpec(f"D0 must be positive, got {self.D0}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise InvalidSpec(f"L must be positive, got {self.L}")
        if not (self.K0 >= 0 and math.isfinite(self.K0)):
            raise InvalidSpec(f"K0 must be nonnegative, got {self.K0}")
        for name in ("alpha", "beta"):
            value = getattr(self, name)
            if _is_neumann(value):
                continue
            if not (math.isfinite(value) and value >= 0):
                raise InvalidSpec(f"{name} must be finite and >= 0 or NEUMANN, got {value}")
            object.__setattr__(self, name, float(value))

    @property
    def shift(self) -> float:
        """K0 / (2 D0); ``mu = lam + i*shift`` is the symmetric variable."""
        return self.K0 / (2.0 * self.D0)

    @property
    def peclet(self) -> float:
        return self.K0 * self.L / self.D0

    @property
    def is_neumann(self) -> bool:
        return _is_neumann(self.alpha) or _is_neumann(self.beta)

    def robin(self) -> tuple[float, float]:
        """Return finite ``(alpha, beta)`` or raise for a Neumann end."""
        if self.is_neumann:
            raise InvalidSpec("Robin kernels require finite alpha and beta")
        return self.alpha, self.beta

    def with_(self, **changes) -> "ProblemParams":
        data = dict(D0=self.D0, K0=self.K0, L=self.L, alpha=self.alpha, beta=self.beta)
        data.update(changes)
        return ProblemParams(**data)


def omega(lam, params: ProblemParams):
    """Dispersion relation ``D0*lam**2 + i*K0*lam``."""
    lam = np.asarray(lam, dtype=complex)
    return params.D0 * lam * lam + 1j * params.K0 * lam


def domega(lam, params: ProblemParams):
    lam = np.asarray(lam, dtype=complex)
    return 2.0 * params.D0 * lam + 1j * params.K0


def nu(lam, params: ProblemParams):
    """Nontrivial partner of ``lam`` with the same ``omega``."""
    lam = np.asarray(lam, dtype=complex)
    return -lam - 1j * params.K0 / params.D0


def mu(lam, params: ProblemParams):
    lam = np.asarray(lam, dtype=complex)
    return lam + 1j * params.shift


def delta_rr(lam, params: ProblemParams):
    """Robin-Robin determinant."""
    alpha, beta = params.robin()
    lam = np.asarray(lam, dtype=complex)
    v = nu(lam, params)
    L = params.L
    return (np.exp(-1j * lam * L) * (1 - 1j * alpha * lam) * (1 - 1j * beta * v)
            - np.exp(-1j * v * L) * (1 - 1j * alpha * v) * (1 - 1j * beta * lam))


def delta_alpha(lam, params: ProblemParams):
    """Robin-Dirichlet determinant (``beta = 0``); uses ``params.alpha``."""
    if _is_neumann(params.alpha):
        raise InvalidSpec("delta_alpha requires a finite alpha")
    alpha = params.alpha
    lam = np.asarray(lam, dtype=complex)
    v = nu(lam, params)
    L = params.L
    return np.exp(-1j * lam * L) * (1 - 1j * alpha * lam) - np.exp(-1j * v * L) * (1 - 1j * alpha * v)


def delta_zero(lam, params: ProblemParams):
    """Determinant shared by the Dirichlet-Dirichlet and Neumann-Neumann cases."""
    lam = np.asarray(lam, dtype=complex)
    L = params.L
    return np.exp(-1j * lam * L) - np.exp(-1j * nu(lam, params) * L)


def f_gamma(lam, y, gamma: float, params: ProblemParams):
    """Kernel ``(gamma*c - 1) sin(y mu) - gamma mu cos(y mu)`` with ``c = K0/(2 D0)``."""
    m = mu(lam, params)
    y = np.asarray(y, dtype=float)
    c = params.shift
    return (gamma * c - 1.0) * np.sin(y * m) - gamma * m * np.cos(y * m)


def g_kernel(lam, y, params: ProblemParams):
    """Large-gamma limit of ``f_gamma / gamma``."""
    m = mu(lam, params)
    y = np.asarray(y, dtype=float)
    return params.shift * np.sin(y * m) - m * np.cos(y * m)


# --------------------------------------------------------------------------
# root analysis


@dataclass
class RootReport:
    """Roots of the Robin-Robin determinant off the line ``Im lam = -K0/(2 D0)``.

    ``predicted_count`` is the table prediction, or the numerical count when
    the table is ambiguous (``ambiguous``) or inapplicable (``method ==
    "scan2d"``).
    """

    sigma: float
    rho: float
    predicted_count: int
    roots: list[complex] = field(default_factory=list)
    max_upper_imag: float | None = None
    method: str = "y-bisection"
    ambiguous: bool = False
    approx_discriminant: float | None = None

    @classmethod
    def empty(cls) -> "RootReport":
        return cls(sigma=0.0, rho=0.0, predicted_count=0)


def sigma_rho(params: ProblemParams) -> tuple[float, float]:
    alpha, beta = params.robin()
    c = params.shift
    a = 1.0 - alpha * c
    b = beta * c - 1.0
    if a == 0.0 or b == 0.0:
        raise DegenerateDenominator(
            f"alpha={alpha}, beta={beta} hit 2*D0/K0={1 / c if c else math.inf}")
    den = a * b
    L = params.L
    return (alpha - beta) / (L * den), alpha * beta / (L * L * den)


def exact_discriminant(sigma: float, rho: float) -> float:
    """Sign decides between 0 (negative) and 4 (positive) roots when rho > 0, 0 < sigma < 1."""
    m = 0.5 * sigma * (sigma - rho) - rho
    disc = m * m - (1.0 - sigma) * rho * rho
    if disc < 0:
        raise ComplexEta(f"negative discriminant {disc:.3e} for sigma={sigma}, rho={rho}")
    eta = m + math.sqrt(disc)
    if eta <= 0:
        raise ComplexEta(f"eta={eta:.3e} <= 0 for sigma={sigma}, rho={rho}")
    s = math.sqrt(eta)
    return sigma - (rho / s + s) * math.tanh(s / rho)


def approx_discriminant(sigma: float, rho: float) -> float:
    r = math.sqrt(rho)
    return sigma - 2.0 * r * math.tanh(1.0 / r)


def root_count(sigma: float, rho: float) -> int:
    """Number of determinant roots off the symmetry line, from (sigma, rho)."""
    if not (math.isfinite(sigma) and math.isfinite(rho)):
        raise ValueError("sigma and rho must be finite")
    if rho > 0:
        if sigma <= 0:
            return 0
        if sigma >= 1:
            return 2
        if sigma > 2.0 * math.sqrt(rho):
            return 4
        q = exact_discriminant(sigma, rho)
        qa = approx_discriminant(sigma, rho)
        if (q > 0) != (qa > 0):
            log.debug("exact (%.3e) and approximate (%.3e) discriminants disagree", q, qa)
        if q > 0:
            return 4
        if q < 0:
            return 0
        return 2
    if rho == 0:
        return 2 if 0 < sigma < 1 else 0
    return 2 if sigma < 1 else 0


def _y_scan_limit(sigma: float, rho: float) -> float:
    """Scan range covering every positive root.

    For ``y >= 1`` tanh is within 0.24 of one, so once ``|rho| y^2`` beats
    ``|sigma| y + 1`` the sign of the equation can no longer change.
    """
    if rho == 0:
        return Y_SCAN_MAX
    return min(max(Y_SCAN_MAX, 2.0 * (abs(sigma) + 2.0) / abs(rho) + 10.0), 1e12)


def _y_roots(sigma: float, rho: float, ymax: float | None = None, n: int = Y_SCAN_BRACKETS):
    """Positive roots of ``(1 + rho y^2) tanh y = sigma y``."""

    def h(y):
        return (1.0 + rho * y * y) * np.tanh(y) - sigma * y

    if ymax is None:
        ymax = _y_scan_limit(sigma, rho)
    ys = np.linspace(0.0, min(ymax, Y_SCAN_MAX), n + 1)[1:]
    if ymax > Y_SCAN_MAX:
        # tanh is one to machine precision here, so h is a quadratic in y
        # and a geometric grid cannot step over a sign change pair unseen
        tail = np.geomspace(Y_SCAN_MAX, ymax, n + 1)[1:]
        ys = np.concatenate([ys, tail])
    hs = h(ys)
    out = []
    for i in np.nonzero(np.sign(hs[:-1]) * np.sign(hs[1:]) < 0)[0]:
        out.append(optimize.brentq(h, ys[i], ys[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
    out.extend(float(y) for y in ys[hs == 0.0])
    return sorted(out)


def _scaled_delta(lam: complex, params: ProblemParams, shift: float | None = None):
    """``Delta_RR(lam) exp(-shift)`` and the size of its two terms, overflow-free.

    ``shift`` defaults to the larger exponent of the two terms, so far from
    the real axis neither exponential overflows.
    """
    alpha, beta = params.robin()
    lam = complex(lam)
    v = complex(nu(lam, params))
    L = params.L
    e1, e2 = (-1j * lam * L), (-1j * v * L)
    if shift is None:
        shift = max(e1.real, e2.real)
    f1 = (1 - 1j * alpha * lam) * (1 - 1j * beta * v)
    f2 = (1 - 1j * alpha * v) * (1 - 1j * beta * lam)
    t1, t2 = np.exp(e1 - shift), np.exp(e2 - shift)
    norm = (abs(t1) * (1 + alpha * abs(lam)) * (1 + beta * abs(v))
            + abs(t2) * (1 + alpha * abs(v)) * (1 + beta * abs(lam)))
    return t1 * f1 - t2 * f2, norm


def _relative_delta(lam: complex, params: ProblemParams) -> float:
    val, norm = _scaled_delta(lam, params)
    return abs(val) / max(norm, 1e-300)


def _polish(func, z0: complex, tol: float = 1e-15, maxiter: int = 50) -> complex:
    z = complex(z0)
    for _ in range(maxiter):
        fz = complex(func(z))
        step = 1e-7 * max(1.0, abs(z))
        dfz = complex(func(z + step) - func(z - step)) / (2 * step)
        if dfz == 0:
            break
        dz = fz / dfz
        z -= dz
        if abs(dz) <= tol * max(1.0, abs(z)):
            break
    return z


def scan_roots_2d(func, re_range, im_range, cells=(80, 20), edge_samples=64, max_depth=6):
    """Locate zeros of an analytic ``func`` in a rectangle by the argument principle.

    The rectangle is split into cells; each cell's winding number is computed
    from the unwrapped phase along its boundary. Cells with a single zero are
    finished with Newton; cells with several are subdivided.
    """
    func_v = np.vectorize(lambda z: complex(func(z))) if not _is_vectorized(func) else func
    roots: list[complex] = []

    def winding(x0, x1, y0, y1, m):
        t = np.linspace(0.0, 1.0, m, endpoint=False)
        path = np.concatenate([
            x0 + (x1 - x0) * t + 1j * y0,
            x1 + 1j * (y0 + (y1 - y0) * t),
            x1 - (x1 - x0) * t + 1j * y1,
            x0 + 1j * (y1 - (y1 - y0) * t),
            [x0 + 1j * y0],
        ])
        vals = func_v(path)
        if np.any(vals == 0) or not np.all(np.isfinite(vals)):
            return None
        dphi = np.diff(np.unwrap(np.angle(vals)))
        return int(round(dphi.sum() / (2 * np.pi)))

    def visit(x0, x1, y0, y1, depth):
        w = winding(x0, x1, y0, y1, edge_samples)
        if w is None:
            # zero on the boundary: nudge the cell
            eps = 1e-7 * (x1 - x0)
            w = winding(x0 + eps, x1 + eps, y0 + eps, y1 + eps, edge_samples)
            if w is None:
                return
        if w <= 0:
            return
        if w == 1 or depth >= max_depth:
            z = _polish(func, complex(0.5 * (x0 + x1), 0.5 * (y0 + y1)))
            inside = x0 <= z.real <= x1 and y0 <= z.imag <= y1
            if not inside and depth < max_depth:
                pass  # Newton escaped the cell; refine instead
            else:
                if not inside:
                    z = complex(0.5 * (x0 + x1), 0.5 * (y0 + y1))
                if all(abs(z - r) > 1e-8 * max(1.0, abs(z)) for r in roots):
                    roots.append(z)
                return
        xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        for a, b in ((x0, xm), (xm, x1)):
            for c, d in ((y0, ym), (ym, y1)):
                visit(a, b, c, d, depth + 1)

    xs = np.linspace(re_range[0], re_range[1], cells[0] + 1)
    ys = np.linspace(im_range[0], im_range[1], cells[1] + 1)
    for i in range(cells[0]):
        for j in range(cells[1]):
            visit(xs[i], xs[i + 1], ys[j], ys[j + 1], 0)
    return sorted(roots, key=lambda z: (z.imag, z.real))


def _is_vectorized(func) -> bool:
    try:
        out = func(np.array([0.1 + 0.1j, 0.2 + 0.2j]))
        return np.shape(out) == (2,)
    except Exception:  # noqa: BLE001 - probing only
        return False


def scan_off_line_roots(params: ProblemParams, half_width: float = 20.0, band: float | None = None,
                        gap: float = 0.02):
    """Brute-force 2-D scan for roots of ``delta_rr`` off the symmetry line.

    Two rectangles are scanned, one on each side of ``Im lam = -K0/(2 D0)``,
    leaving a strip of half-width ``gap`` around the line where infinitely
    many roots sit.
    """
    line = -params.shift
    if band is None:
        band = max(2.0 * params.K0 / params.D0, 10.0 / params.L)
    cells = (max(8, int(2 * half_width)), max(4, int(band * params.L)))

    def f(z):
        return delta_rr(z, params)

    upper = scan_roots_2d(f, (-half_width, half_width), (line + gap, line + band), cells=cells)
    lower = scan_roots_2d(f, (-half_width, half_width), (line - band, line - gap), cells=cells)
    return upper + lower


def find_roots(params: ProblemParams) -> RootReport:
    """Roots of ``delta_rr`` off the line ``Im lam = -K0/(2 D0)``.

    Uses the substitution ``lam = i(y/L - K0/(2 D0))`` and a bracketed scan of
    ``(1 + rho y^2) tanh y = sigma y`` for ``0 < y <= 50``. Falls back to a
    2-D argument-principle scan when a Robin coefficient equals ``2 D0/K0``.
    """
    params.robin()
    c = params.shift
    L = params.L
    try:
        sigma, rho = sigma_rho(params)
    except DegenerateDenominator:
        roots = scan_off_line_roots(params)
        roots = [r for r in roots if _relative_delta(r, params) < ROOT_TOL]
        return _report(math.nan, math.nan, len(roots), roots, method="scan2d")

    ambiguous = False
    try:
        predicted = root_count(sigma, rho)
    except ComplexEta:
        predicted = None
        ambiguous = True

    roots = []
    for y in _y_roots(sigma, rho):
        for sign in (1.0, -1.0):
            z0 = 1j * (sign * y / L - c)
            shift = max(y, c * L) + abs(c) * L
            lam = _polish(lambda z: _scaled_delta(z, params, shift)[0], z0)
            if _relative_delta(lam, params) >= ROOT_TOL:
                raise CountMismatch(f"root at y={y} fails |Delta| < {ROOT_TOL}")
            roots.append(lam)
    if predicted is None:
        predicted = len(roots)
    elif predicted != len(roots):
        raise CountMismatch(
            f"sigma={sigma:.6g}, rho={rho:.6g}: table predicts {predicted}, found {len(roots)}")
    approx = approx_discriminant(sigma, rho) if rho > 0 else None
    return _report(sigma, rho, predicted, roots, ambiguous=ambiguous, approx=approx)


def _report(sigma, rho, predicted, roots, method="y-bisection", ambiguous=False, approx=None):
    upper = [r.imag for r in roots if r.imag > 0]
    return RootReport(sigma=sigma, rho=rho, predicted_count=predicted, roots=list(roots),
                      max_upper_imag=max(upper) if upper else None, method=method,
                      ambiguous=ambiguous, approx_discriminant=approx)


def asymptotic_roots(n: int, params: ProblemParams) -> complex:
    """Large-``n`` location of the n-th determinant root on the symmetry line."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return complex(n * math.pi / params.L, -params.shift)
