"""
Closed-form asymptotic eigenvalue and singular-value laws.

A :class:`SpectralLaw` is a continuous density on a union of support
intervals plus a list of point masses. Planar (complex) laws are all
circularly symmetric and are handled through their radial distribution.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import roots_legendre

__all__ = [
    "SpectralLaw", "UnsupportedLawError", "MomentDomainError",
    "semicircle", "quarter_circle", "full_circle", "marchenko_pastur",
    "haar_circle", "inverse_semicircle", "ginibre_product", "point_mass",
    "discrete", "binary", "custom",
    "law_density", "law_moment", "law_cdf", "law_quantile", "radial_cdf",
    "total_mass", "expect", "catalan", "hankel_psd", "law_from_dict", "density_csv",
]

PLANAR_KINDS = ("full_circle", "haar_circle", "ginibre_product")


class UnsupportedLawError(ValueError):
    """Raised for a kind tag the operation does not know about."""


class MomentDomainError(ValueError):
    """Raised when a moment is undefined for the law and order."""


@dataclass(frozen=True)
class SpectralLaw:
    """
    Asymptotic spectral distribution.

    Parameters
    ----------
    kind : str
        Kind tag, e.g. ``"semicircle"`` or ``"marchenko_pastur"``.
    params : tuple of (str, float)
        Law parameters as sorted key/value pairs.
    support : tuple of (float, float)
        Support intervals of the continuous part (real laws), or the
        radial interval for planar laws.
    atoms : tuple of (float, float)
        Point masses as ``(location, mass)``.
    """

    kind: str
    params: tuple = ()
    support: tuple = ()
    atoms: tuple = ()
    _pdf: Callable | None = field(default=None, compare=False, repr=False)

    @property
    def planar(self) -> bool:
        return self.kind in PLANAR_KINDS

    def param(self, name, default=None):
        return dict(self.params).get(name, default)

    @property
    def lo(self) -> float:
        """Leftmost point of the law (support or atom)."""
        pts = [a for a, _ in self.support] + [x for x, _ in self.atoms]
        return min(pts)

    @property
    def hi(self) -> float:
        pts = [b for _, b in self.support] + [x for x, _ in self.atoms]
        return max(pts)

    @property
    def continuous_mass(self) -> float:
        return 1.0 - sum(m for _, m in self.atoms)

    def to_dict(self) -> dict:
        """JSON-friendly descriptor ``{kind, params}``."""
        if self.kind == "custom":
            raise UnsupportedLawError("custom laws carry a callable and are not serializable")
        d = {"kind": self.kind, "params": dict(self.params)}
        if self.kind == "discrete":
            d["params"] = {"locs": [x for x, _ in self.atoms],
                           "probs": [m for _, m in self.atoms]}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# constructors

def semicircle() -> SpectralLaw:
    """Wigner semicircle on [-2, 2], unit variance."""
    return SpectralLaw("semicircle", (), ((-2.0, 2.0),))


def quarter_circle() -> SpectralLaw:
    """Singular values of a square i.i.d. matrix with variance 1/N."""
    return SpectralLaw("quarter_circle", (), ((0.0, 2.0),))


def inverse_semicircle() -> SpectralLaw:
    """Arcsine law of T + T^H for Haar unitary T."""
    return SpectralLaw("inverse_semicircle", (), ((-2.0, 2.0),))


def marchenko_pastur(beta: float, scale: float = 1.0) -> SpectralLaw:
    """
    Eigenvalues of ``scale * H H^H`` with ``H`` of size N x K, entries of
    variance 1/N and ``beta = K/N``.

    For ``beta < 1`` the law has an atom of mass ``1 - beta`` at zero.
    """
    if beta <= 0 or scale <= 0:
        raise ValueError("beta and scale must be positive")
    a = scale * (1 - math.sqrt(beta)) ** 2
    b = scale * (1 + math.sqrt(beta)) ** 2
    atoms = ((0.0, 1.0 - beta),) if beta < 1 else ()
    params = (("beta", float(beta)), ("scale", float(scale)))
    return SpectralLaw("marchenko_pastur", params, ((a, b),), atoms)


def full_circle() -> SpectralLaw:
    """Uniform law on the complex unit disk (radial support [0, 1])."""
    return SpectralLaw("full_circle", (), ((0.0, 1.0),))


def haar_circle() -> SpectralLaw:
    """Uniform law on the complex unit circle."""
    return SpectralLaw("haar_circle", (), ((1.0, 1.0),))


def ginibre_product(L: int) -> SpectralLaw:
    """Eigenvalue law of a product of ``L`` independent square Ginibre matrices."""
    if int(L) != L or L < 1:
        raise ValueError("L must be a positive integer")
    return SpectralLaw("ginibre_product", (("L", int(L)),), ((0.0, 1.0),))


def point_mass(alpha: float) -> SpectralLaw:
    return discrete([alpha], [1.0])


def discrete(locs: Sequence[float], probs: Sequence[float]) -> SpectralLaw:
    """Finite mixture of point masses."""
    locs = np.asarray(locs, float)
    probs = np.asarray(probs, float)
    if locs.shape != probs.shape or np.any(probs < 0) or abs(probs.sum() - 1) > 1e-12:
        raise ValueError("probabilities must be nonnegative and sum to one")
    atoms = tuple((float(x), float(p)) for x, p in sorted(zip(locs, probs)))
    return SpectralLaw("discrete", (), (), atoms)


def binary() -> SpectralLaw:
    """Symmetric binary law 1/2 (delta_{-1} + delta_{+1})."""
    return discrete([-1.0, 1.0], [0.5, 0.5])


def custom(pdf: Callable, support: Sequence[tuple], atoms: Sequence[tuple] = (),
           name: str = "custom") -> SpectralLaw:
    """Law from a user density on given support intervals."""
    sup = tuple((float(a), float(b)) for a, b in support)
    at = tuple((float(x), float(m)) for x, m in atoms)
    return SpectralLaw("custom", (("name", name),), sup, at, pdf)


def law_from_dict(d: dict) -> SpectralLaw:
    """Inverse of :meth:`SpectralLaw.to_dict`."""
    kind, p = d["kind"], d.get("params", {})
    makers = {
        "semicircle": lambda: semicircle(),
        "quarter_circle": lambda: quarter_circle(),
        "inverse_semicircle": lambda: inverse_semicircle(),
        "full_circle": lambda: full_circle(),
        "haar_circle": lambda: haar_circle(),
        "marchenko_pastur": lambda: marchenko_pastur(p["beta"], p.get("scale", 1.0)),
        "ginibre_product": lambda: ginibre_product(p["L"]),
        "discrete": lambda: discrete(p["locs"], p["probs"]),
    }
    if kind not in makers:
        raise UnsupportedLawError(f"unknown law kind {kind!r}")
    return makers[kind]()


# ---------------------------------------------------------------------------
# densities

def _sqrtpos(x):
    return np.sqrt(np.clip(x, 0.0, None))


def _real_density(law: SpectralLaw, x: np.ndarray) -> np.ndarray:
    k = law.kind
    out = np.zeros_like(x, dtype=float)
    if k == "semicircle":
        m = np.abs(x) < 2
        out[m] = _sqrtpos(4 - x[m] ** 2) / (2 * np.pi)
    elif k == "quarter_circle":
        m = (x >= 0) & (x < 2)
        out[m] = _sqrtpos(4 - x[m] ** 2) / np.pi
    elif k == "inverse_semicircle":
        m = np.abs(x) < 2
        out[m] = 1.0 / (np.pi * np.sqrt(4 - x[m] ** 2))
    elif k == "marchenko_pastur":
        beta, c = law.param("beta"), law.param("scale")
        a, b = law.support[0]
        m = (x > a) & (x < b)
        y = x[m] / c
        out[m] = _sqrtpos(4 * beta - (y - 1 - beta) ** 2) / (2 * np.pi * y) / c
    elif k == "discrete":
        pass
    elif k == "custom":
        for a, b in law.support:
            m = (x > a) & (x < b)
            out[m] = np.asarray(law._pdf(x[m]), float)
    else:
        raise UnsupportedLawError(f"unsupported law kind {k!r}")
    return out


def _planar_density(law: SpectralLaw, z: np.ndarray) -> np.ndarray:
    r = np.abs(z)
    k = law.kind
    out = np.zeros_like(r, dtype=float)
    if k == "full_circle":
        out[r < 1] = 1.0 / np.pi
    elif k == "ginibre_product":
        L = law.param("L")
        m = (r > 0) & (r <= 1)
        out[m] = r[m] ** (2.0 / L - 2.0) / (L * np.pi)
        out[r == 0] = np.inf if L > 1 else 1.0 / np.pi
    elif k == "haar_circle":
        # density per unit arc length on the circle
        out[np.abs(r - 1) < 1e-12] = 1.0 / (2 * np.pi)
    return out


def law_density(law: SpectralLaw, x):
    """
    Continuous density of ``law`` at ``x`` (atoms excluded).

    For planar laws ``x`` is a complex point and the areal density is
    returned (arc-length density for the Haar circle).
    """
    xa = np.asarray(x)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    if law.planar:
        out = _planar_density(law, xa.astype(complex))
    else:
        if np.iscomplexobj(xa):
            raise UnsupportedLawError("real law evaluated at a complex point")
        out = _real_density(law, xa.astype(float))
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# quadrature

_GL_CACHE: dict = {}


def _gl(n):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = roots_legendre(n)
    return _GL_CACHE[n]


def _interval_integral(law, a, b, g, lo=None, hi=None, n=200):
    """
    Integral of ``g(x) p(x)`` over ``[lo, hi]`` inside support ``[a, b]``.

    Uses ``x = c - h cos(theta)`` which removes square-root (and inverse
    square-root) edge singularities.
    """
    lo = a if lo is None else lo
    hi = b if hi is None else hi
    c, h = 0.5 * (a + b), 0.5 * (b - a)
    t0 = np.arccos(np.clip((c - lo) / h, -1, 1))
    t1 = np.arccos(np.clip((c - hi) / h, -1, 1))
    u, w = _gl(n)
    th = 0.5 * (t1 - t0) * u + 0.5 * (t1 + t0)
    x = c - h * np.cos(th)
    jac = h * np.sin(th) * 0.5 * (t1 - t0)
    return np.sum(w * jac * law_density(law, x) * g(x))


def expect(law: SpectralLaw, g: Callable, n: int = 200):
    """
    E[g(X)] over a real law by edge-adapted Gauss-Legendre plus atoms.

    Complex-valued ``g`` gives a complex result.
    """
    if law.planar:
        raise UnsupportedLawError("expect() is for real laws")
    val = sum(_interval_integral(law, a, b, g, n=n) for a, b in law.support)
    val += sum(m * g(np.array([x]))[0] for x, m in law.atoms)
    return complex(val) if np.iscomplexobj(val) else float(val)


def total_mass(law: SpectralLaw, n: int = 200) -> float:
    """Quadrature mass of the continuous part plus the atom masses."""
    if law.planar:
        if law.kind == "haar_circle":
            return 1.0
        u, w = _gl(n)
        # radial mass: int 2 pi r p(r) dr, substitute r = t^L to tame r^(2/L-2)
        L = law.param("L", 1)
        t = 0.5 * (u + 1)
        r = t ** L
        dens = law_density(law, r.astype(complex))
        return float(np.sum(0.5 * w * 2 * np.pi * r * dens * L * t ** (L - 1)))
    return expect(law, lambda x: np.ones_like(x), n=n)


def law_cdf(law: SpectralLaw, x, n: int = 96):
    """
    Distribution function of a real law.

    Atoms at ``x`` are counted (right-continuous CDF).
    """
    if law.planar:
        raise UnsupportedLawError("planar law: use radial_cdf")
    xa = np.atleast_1d(np.asarray(x, float))
    out = np.zeros_like(xa)
    for a, b in law.support:
        full = _interval_integral(law, a, b, np.ones_like, n=n)
        for i, xi in enumerate(xa):
            if xi >= b:
                out[i] += full
            elif xi > a:
                out[i] += _interval_integral(law, a, b, np.ones_like, hi=xi, n=n)
    for loc, m in law.atoms:
        out += m * (xa >= loc)
    return out if np.ndim(x) else float(out[0])


def radial_cdf(law: SpectralLaw, r):
    """P(|z| <= r) for a planar law."""
    r = np.clip(np.asarray(r, float), 0.0, None)
    if law.kind == "full_circle":
        return np.minimum(r, 1.0) ** 2
    if law.kind == "ginibre_product":
        return np.minimum(r, 1.0) ** (2.0 / law.param("L"))
    if law.kind == "haar_circle":
        return (r >= 1.0).astype(float)
    raise UnsupportedLawError(f"{law.kind} is not planar")


def law_quantile(law: SpectralLaw, u, grid: int = 4001):
    """
    Inverse CDF of a real law without atoms, by monotone interpolation of
    the CDF tabulated on an edge-refined grid.
    """
    if law.atoms:
        raise UnsupportedLawError("quantiles of laws with atoms are not tabulated")
    xs, Fs = [], []
    base = 0.0
    for a, b in law.support:
        th = np.linspace(0, np.pi, grid)
        x = 0.5 * (a + b) - 0.5 * (b - a) * np.cos(th)
        F = base + np.array([_interval_integral(law, a, b, np.ones_like, hi=xi, n=64)
                             for xi in x])
        base = F[-1]
        xs.append(x)
        Fs.append(F)
    x = np.concatenate(xs)
    F = np.concatenate(Fs)
    F, idx = np.unique(F, return_index=True)
    return np.interp(u, F, x[idx])


# ---------------------------------------------------------------------------
# moments

def catalan(n: int) -> int:
    """Catalan number C_n = binom(2n, n)/(n+1), exact."""
    if int(n) != n or n < 0:
        raise ValueError("n must be a nonnegative integer")
    n = int(n)
    return math.comb(2 * n, n) // (n + 1)


def _mp_moment(k, beta):
    return sum(math.comb(k, i) * math.comb(k, i - 1) * beta ** i for i in range(1, k + 1)) / k


def law_moment(law: SpectralLaw, k: int) -> float:
    """
    k-th moment by closed formula.

    For planar laws this is the moment of ``|z|``.
    """
    if int(k) != k or k < 1:
        raise MomentDomainError("moment order must be a positive integer")
    kind = law.kind
    if kind == "semicircle":
        return float(catalan(k // 2)) if k % 2 == 0 else 0.0
    if kind == "quarter_circle":
        if k % 2 == 0:
            return float(catalan(k // 2))
        return 2.0 ** (2 * k) / (np.pi * k * (k / 2 + 1) * math.comb(k - 1, (k - 1) // 2))
    if kind == "inverse_semicircle":
        return float(math.comb(k, k // 2)) if k % 2 == 0 else 0.0
    if kind == "marchenko_pastur":
        return law.param("scale") ** k * _mp_moment(k, law.param("beta"))
    if kind == "full_circle":
        return 2.0 / (k + 2)
    if kind == "haar_circle":
        return 1.0
    if kind == "ginibre_product":
        return 2.0 / (k * law.param("L") + 2)
    if kind == "discrete":
        return float(sum(m * x ** k for x, m in law.atoms))
    if kind == "custom":
        return expect(law, lambda x: x ** k)
    raise UnsupportedLawError(f"unsupported law kind {kind!r}")


def hankel_psd(moments: Sequence[float], tol: float = 1e-10) -> bool:
    """Moment-problem consistency: Hankel matrix of m_0..m_2n is PSD."""
    m = np.concatenate([[1.0], np.asarray(moments, float)])
    n = (len(m) - 1) // 2
    H = np.array([[m[i + j] for j in range(n + 1)] for i in range(n + 1)])
    ev = np.linalg.eigvalsh(H)
    return bool(ev.min() >= -tol * max(1.0, ev.max()))


def density_csv(law: SpectralLaw, grid) -> str:
    """Two-column CSV ``x,p`` of the density on ``grid``."""
    grid = np.asarray(grid, float)
    buf = io.StringIO()
    np.savetxt(buf, np.column_stack([grid, law_density(law, grid)]),
               delimiter=",", header="x,p", comments="", fmt="%.12g")
    return buf.getvalue()
