"""
Stieltjes, R, S and Upsilon transform calculus.

Conventions
-----------
G(s) = int dP(x) / (x - s), so that Im G >= 0 for Im s > 0 and
G(s) ~ -1/s at infinity.  R(w) = G^{-1}(-w) - 1/w,
Upsilon(t) = -G(1/t)/t - 1 and S(z) = (1+z)/z * Upsilon^{-1}(z).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad_vec
from scipy.optimize import brentq

from .spectra import SpectralLaw, UnsupportedLawError, law_density, law_moment

__all__ = [
    "AnalyticTransform", "SampledDensity",
    "BoundaryError", "InversionFailedError", "InversionUnstableError",
    "MeanZeroUnsupportedError", "PoleError",
    "stieltjes_transform", "stieltjes_of_law", "density_from_stieltjes",
    "r_from_stieltjes", "s_from_stieltjes", "upsilon_from_stieltjes",
    "r_s_duality_check", "xxh_vs_xhx", "r_table", "s_table",
    "r_at_zero", "inv_s_at_zero", "newton_homotopy", "DEFAULT_EPS",
]

DEFAULT_EPS = (1e-2, 3e-3, 1e-3, 3e-4, 1e-4)


class BoundaryError(ValueError):
    """Stieltjes transform requested on the real support."""


class InversionFailedError(RuntimeError):
    """Functional inversion did not converge; ``last`` holds the last iterate."""

    def __init__(self, msg, last=None):
        super().__init__(msg)
        self.last = last


class InversionUnstableError(RuntimeError):
    """Richardson extrapolation of the Stieltjes inversion did not settle."""

    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class MeanZeroUnsupportedError(ValueError):
    """S-transform requested for a law with zero mean."""


class PoleError(ValueError):
    pass


@dataclass(frozen=True)
class AnalyticTransform:
    """
    Complex map with a domain description and branch rule.

    Attributes
    ----------
    kind : {"G", "R", "S", "Upsilon"}
    fn : callable
        Scalar complex -> complex evaluator.
    domain, branch_rule : str
        Human-readable validity statements.
    radius : float
        Validity radius for series-type transforms (R, S); calls with a
        larger argument modulus raise.
    mean : float or None
        First moment of the underlying law, when known.
    bounds : (float, float) or None
        Smallest interval containing the law, used for real-axis bracketing.
    """

    kind: str
    fn: Callable = field(repr=False)
    domain: str = ""
    branch_rule: str = ""
    radius: float = math.inf
    mean: float | None = None
    bounds: tuple | None = None
    vec: Callable | None = field(default=None, repr=False)

    def __call__(self, x):
        if abs(x) > self.radius:
            raise ValueError(f"|{x}| exceeds validity radius {self.radius}")
        return self.fn(x)


@dataclass
class SampledDensity:
    """Density samples on a grid plus detected atoms."""

    grid: np.ndarray
    values: np.ndarray
    atoms: list = field(default_factory=list)
    clipped: np.ndarray | None = None
    residual: float = 0.0

    @property
    def mass(self) -> float:
        return float(np.trapezoid(self.values, self.grid)) + sum(m for _, m in self.atoms)


# ---------------------------------------------------------------------------
# closed forms

def _sq(s, a, b):
    # sqrt((s-a)(s-b)) with the cut on [a, b] and ~ s at infinity
    return cmath.sqrt(s - a) * cmath.sqrt(s - b)


def _as_complex(s):
    s = complex(s)
    return complex(s.real, s.imag + 0.0)


def _g_closed(law: SpectralLaw, s: complex):
    k = law.kind
    if k == "discrete":
        return sum(m / (x - s) for x, m in law.atoms)
    if k == "semicircle":
        r = _sq(s, -2, 2)
        # conjugate form avoids cancellation for large |s|
        return 0.5 * (r - s) if abs(r - s) >= abs(r + s) else -2.0 / (s + r)
    if k == "marchenko_pastur":
        beta, c = law.param("beta"), law.param("scale")
        u = s / c
        a, b = (1 - math.sqrt(beta)) ** 2, (1 + math.sqrt(beta)) ** 2
        r = _sq(u, a, b)
        v = u + 1 - beta
        if abs(r - v) >= abs(r + v):
            return (r - v) / (2 * u) / c
        return -2.0 / (v + r) / c
    if k == "inverse_semicircle":
        return -1.0 / _sq(s, -2, 2)
    if k == "quarter_circle":
        r = cmath.sqrt(2 - s) * cmath.sqrt(2 + s)
        return r / math.pi * cmath.log((2 + r) / (-s)) - s / 2 - 2 / math.pi
    return None


def _g_series(law: SpectralLaw, s: complex, rad: float):
    """Laurent series -sum m_k s^{-k-1}, used far from the support."""
    if law.kind == "discrete":
        return None
    n = int(np.ceil(40.0 / max(math.log(abs(s) / max(rad, 1e-300)), 1e-3)))
    if n > 200:
        return None
    u = 1.0 / s
    tot, pw = u, u
    for k in range(1, n + 1):
        pw *= u
        tot += law_moment(law, k) * pw
    return -tot


def _g_quad(law: SpectralLaw, s) -> np.ndarray:
    """
    Stieltjes transform by quadrature, vectorized over ``s``.

    Works in ``x = c - h cos(theta)``; the pole is removed by subtracting
    ``f(theta_s)/(x - s)``, whose integral over [0, pi] is
    ``-pi / (sqrt(s-a) sqrt(s-b))``.  This keeps points just above the
    support accurate.
    """
    s = np.atleast_1d(np.asarray(s, complex))
    tot = np.zeros_like(s)
    for x0, m in law.atoms:
        tot += m / (x0 - s)
    for a, b in law.support:
        c, h = 0.5 * (a + b), 0.5 * (b - a)
        ths = np.arccos(np.clip((c - s.real) / h, -1, 1))
        fs = law_density(law, c - h * np.cos(ths)) * h * np.sin(ths)
        fs = np.where((s.real > a) & (s.real < b), fs, 0.0)

        def f(th):
            x = c - h * math.cos(th)
            fx = law_density(law, x) * h * math.sin(th)
            return (fx - fs) / (x - s)

        val, _ = quad_vec(f, 0.0, math.pi, epsabs=1e-10, epsrel=1e-10, limit=2000)
        tot += val - fs * np.pi / (np.sqrt(s - a) * np.sqrt(s - b))
    return tot


def stieltjes_of_law(law: SpectralLaw, s) -> complex:
    """
    G(s) = int dP(x)/(x - s).

    Closed forms are used for the tabulated kinds, quadrature otherwise.
    ``s`` may be real only when it lies outside the support.
    """
    if law.planar:
        raise UnsupportedLawError("Stieltjes transform of a planar law")
    s = _as_complex(s)
    if s.imag == 0:
        x = s.real
        on_support = any(a <= x <= b for a, b in law.support)
        on_atom = any(x == loc for loc, _ in law.atoms)
        if on_support or on_atom:
            raise BoundaryError(f"s={x} lies on the support")
    g = None
    rad = max(abs(law.lo), abs(law.hi))
    if law.kind != "custom" and abs(s) > 4 * rad:
        g = _g_series(law, s, rad)
    if g is None:
        g = _g_closed(law, s)
    if g is None:
        g = _g_quad(law, s)[0]
    return complex(g)


def stieltjes_transform(law: SpectralLaw, closed_form: bool = True) -> AnalyticTransform:
    """Wrap a law's Stieltjes transform as an :class:`AnalyticTransform`."""
    vec = None
    if closed_form:
        fn = lambda s: stieltjes_of_law(law, s)  # noqa: E731
    else:
        def fn(s):
            return complex(_g_quad(law, _as_complex(s))[0])

        def vec(s):
            return _g_quad(law, s)
    try:
        mean = law_moment(law, 1)
    except Exception:
        mean = None
    return AnalyticTransform("G", fn, "Im s > 0, or real s off the support",
                             "Im G(s) >= 0 when Im s > 0", mean=mean,
                             bounds=(law.lo, law.hi), vec=vec)


def upsilon_from_stieltjes(G: AnalyticTransform) -> AnalyticTransform:
    def fn(t):
        if t == 0:
            return 0j
        return -G.fn(1.0 / t) / t - 1.0
    return AnalyticTransform("Upsilon", fn, "t near 0", "continuation from t=0",
                             mean=G.mean, bounds=G.bounds)


# ---------------------------------------------------------------------------
# Stieltjes inversion

def density_from_stieltjes(G, grid, eps_schedule: Sequence[float] = DEFAULT_EPS,
                           tol: float = 5e-3, atom_threshold: float = 1e-3) -> SampledDensity:
    """
    Recover a density from its Stieltjes transform.

    ``p(x) = lim (1/pi) Im G(x + i eps)`` is estimated at every ``eps`` of
    the schedule and extrapolated linearly in ``eps`` (two-point Richardson
    on the last two levels).  Points where ``eps Im G`` exceeds
    ``atom_threshold`` at the finest level, and has not dropped by more
    than 20% from the previous level, are reported as atoms with mass
    ``eps Im G``.

    Raises
    ------
    InversionUnstableError
        When the two last Richardson estimates differ by more than ``tol``
        in L1 over the grid (atoms excluded).
    """
    grid = np.asarray(grid, float)
    eps = np.asarray(sorted(eps_schedule, reverse=True), float)
    if eps[-1] < 1e-6:
        raise ValueError("eps schedule must end at or above 1e-6")
    if isinstance(G, AnalyticTransform) and G.vec is not None:
        im = np.array([G.vec(grid + 1j * e).imag for e in eps]) / np.pi
    else:
        g = G.fn if isinstance(G, AnalyticTransform) else G
        im = np.array([[g(complex(x, e)).imag for x in grid] for e in eps]) / np.pi
    if len(eps) >= 2:
        e1, e2 = eps[-2], eps[-1]
        p = (e1 * im[-1] - e2 * im[-2]) / (e1 - e2)
    else:
        p = im[-1].copy()
    if len(eps) >= 3:
        e0, e1 = eps[-3], eps[-2]
        p_prev = (e0 * im[-2] - e1 * im[-3]) / (e0 - e1)
    else:
        p_prev = p
    mass_sig = np.pi * eps[-1] * im[-1]
    atom_mask = mass_sig > atom_threshold
    if len(eps) >= 2:
        # an atom keeps eps Im G constant as eps shrinks; an integrable
        # singularity (1/sqrt(x) edge) makes it decay
        atom_mask &= mass_sig > 0.8 * np.pi * eps[-2] * im[-2]
    atoms = []
    if atom_mask.any():
        # merge neighbouring flagged points into one atom at the local peak
        idx = np.flatnonzero(atom_mask)
        groups = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
        for grp in groups:
            j = grp[np.argmax(mass_sig[grp])]
            atoms.append((float(grid[j]), float(mass_sig[j])))
        p[atom_mask] = 0.0
        p_prev[atom_mask] = 0.0
    diff = np.abs(p - p_prev)
    residual = float(np.trapezoid(diff, grid)) if len(grid) > 1 else float(diff.max())
    if residual > tol:
        raise InversionUnstableError(
            f"Richardson estimates disagree by {residual:.3g} in L1", residual)
    clipped = p < 0
    p[clipped] = 0.0
    return SampledDensity(grid, p, atoms, clipped, residual)


# ---------------------------------------------------------------------------
# functional inversion

def _deriv(f, x, h=None):
    h = 1e-6 * (1.0 + abs(x)) if h is None else h
    return (f(x + h) - f(x - h)) / (2 * h)


def newton_homotopy(f: Callable, target: complex, seed: Callable, steps: int = 24,
                    t0: float = 1e-3, tol: float = 1e-13, max_iter: int = 60) -> complex:
    """
    Solve ``f(x) = target`` by damped Newton along the path
    ``target_t = t * target`` for ``t`` from ``t0`` to 1.

    ``seed(target_t)`` supplies the first iterate at ``t0`` (an asymptotic
    expansion valid near zero).
    """
    ts = np.geomspace(t0, 1.0, steps)
    x = seed(ts[0] * target)
    for t in ts:
        y = t * target
        x = _newton(f, y, x, tol=tol, max_iter=max_iter)
    return x


def _newton(f, y, x, tol=1e-13, max_iter=60):
    r = f(x) - y
    for _ in range(max_iter):
        scale = max(1.0, abs(y))
        if abs(r) <= tol * scale:
            return x
        d = _deriv(f, x)
        if d == 0 or not np.isfinite(d):
            raise InversionFailedError("zero or non-finite derivative", x)
        step = r / d
        lam = 1.0
        while True:
            xn = x - lam * step
            try:
                rn = f(xn) - y
            except (ZeroDivisionError, ValueError):
                rn = complex(np.inf)
            if np.isfinite(rn) and abs(rn) < abs(r):
                break
            lam *= 0.5
            if lam < 1e-10:
                if abs(r) <= 1e-9 * scale:
                    return x
                raise InversionFailedError("line search failed", x)
        x, r = xn, rn
    if abs(r) <= 1e-9 * max(1.0, abs(y)):
        return x
    raise InversionFailedError(f"no convergence, residual {abs(r):.3g}", x)


def _estimate_mean(G: AnalyticTransform) -> float:
    if G.mean is not None:
        return G.mean
    s = 1e5j
    return float((-s * s * (G.fn(s) + 1 / s)).real)


def _bracket_root(f, a, b, grow):
    """Find a sign-changing bracket starting at ``b`` and moving by ``grow``."""
    fa = f(a)
    fb = f(b)
    n = 0
    while np.sign(fa) == np.sign(fb) and n < 60:
        b = b + grow
        grow *= 2
        fb = f(b)
        n += 1
    return b, fa, fb


def r_from_stieltjes(G: AnalyticTransform, w, radius: float = math.inf) -> complex:
    """
    R(w) = G^{-1}(-w) - 1/w.

    Real ``w`` with a known law extent is solved by bracketing on the real
    axis outside the support; otherwise damped Newton with homotopy from
    small ``|w|`` seeded by ``s = 1/w + m_1``.
    """
    if abs(w) > radius:
        raise ValueError(f"|w|={abs(w)} exceeds validity radius {radius}")
    m1 = _estimate_mean(G)
    w = complex(w)
    if w == 0:
        return complex(m1)
    if w.imag == 0 and G.bounds is not None:
        lo, hi = G.bounds
        wr = w.real
        span = max(1.0, hi - lo)
        if wr > 0:
            f = lambda s: G.fn(s).real + wr  # noqa: E731
            a = hi + 1e-12 * span
            b, fa, fb = _bracket_root(f, a, hi + 1.0 / wr + abs(m1) + span, span)
        else:
            f = lambda s: G.fn(s).real + wr  # noqa: E731
            a = lo - 1e-12 * span
            b, fa, fb = _bracket_root(f, a, lo + 1.0 / wr - abs(m1) - span, -span)
        if np.sign(fa) == np.sign(fb):
            if abs(fa) < 1e-12:
                return complex(a - 1.0 / wr)
            raise InversionFailedError(f"w={wr} outside the real domain of R", a)
        s = brentq(f, min(a, b), max(a, b), xtol=1e-15, rtol=1e-15, maxiter=500)
        return complex(s - 1.0 / wr)
    s = newton_homotopy(G.fn, -w, lambda wt: -1.0 / wt + m1)
    return s - 1.0 / w


def s_from_stieltjes(G: AnalyticTransform, z, radius: float = math.inf) -> complex:
    """
    S(z) = (1+z)/z * Upsilon^{-1}(z), with Upsilon(t) = -G(1/t)/t - 1.
    """
    if abs(z) > radius:
        raise ValueError(f"|z|={abs(z)} exceeds validity radius {radius}")
    m1 = _estimate_mean(G)
    if abs(m1) < 1e-12:
        raise MeanZeroUnsupportedError("S-transform requires a nonzero mean")
    z = complex(z)
    if z == 0:
        return complex(1.0 / m1)
    U = upsilon_from_stieltjes(G).fn
    if z.imag == 0 and G.bounds is not None and G.bounds[0] >= 0:
        lo, hi = G.bounds
        zr = z.real
        f = lambda t: U(t).real - zr  # noqa: E731
        if zr > 0:
            b = 1.0 / hi
            a = 1e-300
            fa, fb = f(a), f(b * (1 - 1e-15))
            if fb < 0:
                # square-root edge: the residual at t = b(1 - 1e-15) is ~1e-8
                if abs(fb) < 1e-6 * max(1.0, abs(zr)):
                    return complex((1 + zr) / zr * b)
                raise InversionFailedError(f"z={zr} outside the real domain of S", b)
            t = brentq(f, a, b * (1 - 1e-15), xtol=1e-16, rtol=1e-15, maxiter=500)
        elif zr > -1:
            a = -1.0
            while f(a) > 0:
                a *= 2
                if a < -1e300:
                    raise InversionFailedError(f"z={zr} outside the real domain of S", a)
            t = brentq(f, a, -1e-300, xtol=1e-16, rtol=1e-15, maxiter=500)
        else:
            raise InversionFailedError(f"z={zr} outside the real domain of S", None)
        return complex((1 + zr) / zr * t)
    t = newton_homotopy(U, z, lambda zt: zt / m1)
    return (1 + z) / z * t


def _richardson_zero(f, h):
    # quadratic extrapolation to 0 from h, h/2, h/4
    a, b, c = f(h), f(h / 2), f(h / 4)
    return (8 * c - 6 * b + a) / 3


def _probe_step(G, h):
    if h is None:
        rad = max(abs(b) for b in G.bounds) if G.bounds else 1.0
        h = 1e-3 / max(1.0, rad)
    return h


def r_at_zero(G: AnalyticTransform, h: float | None = None) -> complex:
    """lim_{w -> 0} R(w), by extrapolation from small nonzero w."""
    h = _probe_step(G, h)
    return _richardson_zero(lambda w: r_from_stieltjes(G, w), h)


def inv_s_at_zero(G: AnalyticTransform, h: float | None = None) -> complex:
    """lim_{z -> 0+} 1/S(z), by extrapolation from small positive z."""
    h = _probe_step(G, h)
    return _richardson_zero(lambda z: 1.0 / s_from_stieltjes(G, z), h)


def r_s_duality_check(law: SpectralLaw, z) -> float:
    """|S(z) R(z S(z)) - 1| for a law with nonzero mean."""
    G = stieltjes_transform(law)
    S = s_from_stieltjes(G, z)
    R = r_from_stieltjes(G, z * S)
    return abs(S * R - 1)


def xxh_vs_xhx(G_xxh: AnalyticTransform, beta: float, s) -> complex:
    """G_{X^H X}(s) from G_{X X^H}(s) = beta G_{X^H X}(s) + (beta - 1)/s."""
    if s == 0:
        raise PoleError("s = 0 is a pole of the identity")
    return (G_xxh.fn(s) - (beta - 1) / s) / beta


# ---------------------------------------------------------------------------
# transform tables

def r_table(law: SpectralLaw, w):
    """Tabulated R-transforms."""
    k = law.kind
    w = complex(w)
    if k == "discrete" and len(law.atoms) == 1:
        return complex(law.atoms[0][0])
    if k == "semicircle":
        return w
    if k == "marchenko_pastur":
        beta, c = law.param("beta"), law.param("scale")
        return c * beta / (1 - c * w)
    if k == "inverse_semicircle":
        return (-1 + cmath.sqrt(1 + 4 * w * w)) / w if w else 0j
    raise UnsupportedLawError(f"no tabulated R-transform for {k}")


def s_table(law: SpectralLaw, z):
    """Tabulated S-transforms (laws with nonzero mean)."""
    k = law.kind
    z = complex(z)
    if k == "discrete" and len(law.atoms) == 1:
        return complex(1.0 / law.atoms[0][0])
    if k == "marchenko_pastur":
        beta, c = law.param("beta"), law.param("scale")
        return 1.0 / (c * (beta + z))
    raise UnsupportedLawError(f"no tabulated S-transform for {k}")
