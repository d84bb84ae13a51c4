"""
Free convolution and implicit spectral equations.

Additive and multiplicative free convolution are computed through
subordination functions, which is equivalent to adding R-transforms or
multiplying S-transforms but stays on the physical branch everywhere in
the upper half plane.  The Silverstein, Silverstein-Bai, Girko,
Kronecker and operator-valued equations are solved by damped fixed-point
iteration with an independent residual check.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .spectra import SpectralLaw, UnsupportedLawError, expect, law_moment
from .transforms import (
    DEFAULT_EPS, AnalyticTransform, MeanZeroUnsupportedError, PoleError,
    SampledDensity, density_from_stieltjes, stieltjes_of_law,
)

__all__ = [
    "FixedPointConfig", "VarianceProfile", "SolverFailedError",
    "ConvolutionFailedError", "NormalizationError", "BranchSelectionError",
    "SingularMapError",
    "add_free_convolve", "mul_free_convolve", "add_convolution_transform",
    "mul_convolution_transform", "free_clt", "free_clt_transform",
    "free_clt_binary_density", "free_clt_binary_stieltjes",
    "silverstein_product", "silverstein_bai_sum", "girko_profile_solve",
    "kronecker_pooling", "product_chain_s", "product_chain_stieltjes",
    "free_log_mgf", "operator_valued_mimo", "isi_tau", "rdiagonal_density",
    "moments_from_transform", "analytic_mass",
]


class SolverFailedError(RuntimeError):
    def __init__(self, msg, residual=None, last=None):
        super().__init__(msg)
        self.residual = residual
        self.last = last


class ConvolutionFailedError(RuntimeError):
    pass


class NormalizationError(RuntimeError):
    pass


class BranchSelectionError(RuntimeError):
    pass


class SingularMapError(RuntimeError):
    pass


@dataclass(frozen=True)
class FixedPointConfig:
    """Tolerance, damping and iteration cap for the implicit-equation solvers."""

    tol: float = 1e-10
    damping: float = 0.5
    max_iter: int = 10_000
    starts: tuple = ()

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class VarianceProfile:
    """
    Variance profile ``w(x, y)`` on [0, 1] x [0, beta].

    ``w`` must accept broadcast numpy arrays.  Entry (i, j) of the N x K
    matrix has variance ``w(i/N, j/N) / N``.
    """

    w: Callable = field(repr=False)
    beta: float = 1.0
    n: int = 64

    def grid(self):
        x = (np.arange(self.n) + 0.5) / self.n
        y = self.beta * (np.arange(self.n) + 0.5) / self.n
        W = np.asarray(self.w(x[:, None], y[None, :]), float) * np.ones((self.n, self.n))
        if np.any(W < 0) or not np.all(np.isfinite(W)):
            raise ValueError("profile must be finite and nonnegative")
        return x, y, W


_CFG = FixedPointConfig()


# ---------------------------------------------------------------------------
# helpers

def _gfun(law_or_G):
    if isinstance(law_or_G, SpectralLaw):
        return lambda s: stieltjes_of_law(law_or_G, s)
    if isinstance(law_or_G, AnalyticTransform):
        return law_or_G.fn
    return law_or_G


def _mean(law: SpectralLaw) -> float:
    return law_moment(law, 1)


def _fixed_point(T: Callable, x0, cfg: FixedPointConfig, resid: Callable | None = None):
    """
    Damped iteration ``x <- (1-d) x + d T(x)``.  Acceptance uses the
    residual ``|x - T(x)|`` (or ``resid``) of the final iterate.
    """
    x = x0
    d = cfg.damping
    for it in range(cfg.max_iter):
        tx = T(x)
        step = np.max(np.abs(tx - x))
        x = (1 - d) * x + d * tx
        if step < cfg.tol:
            break
    r = float(np.max(np.abs(T(x) - x))) if resid is None else float(resid(x))
    if not np.isfinite(r) or r > 10 * cfg.tol:
        raise SolverFailedError(f"fixed point not reached (residual {r:.3g})", r, x)
    return x, r


def _newton_scalar(phi, x, tol=1e-14, max_iter=50):
    for _ in range(max_iter):
        f = phi(x)
        h = 1e-7 * (1 + abs(x))
        d = (phi(x + h) - phi(x - h)) / (2 * h)
        if d == 0 or not np.isfinite(d):
            return x, False
        dx = f / d
        x = x - dx
        if abs(dx) < tol * (1 + abs(x)):
            return x, True
    return x, abs(phi(x)) < 1e-10


def _eps_path(target_eps, top=2.0, ratio=2.0):
    path = [top]
    while path[-1] / ratio > target_eps:
        path.append(path[-1] / ratio)
    path.append(target_eps)
    return path


def _continuation(solve_at, x, y, seed):
    """Walk ``s = x + i e`` from large ``e`` down to ``y`` with warm starts."""
    w = seed(complex(x, 2.0))
    for e in _eps_path(y):
        w = solve_at(complex(x, e), w)
    return w


def analytic_mass(G: Callable, y: float = 1e6) -> float:
    """Total mass from the asymptote ``G(iy) ~ -1/(iy)``."""
    s = 1j * y
    return float((-s * G(s)).real)


def moments_from_transform(G: Callable, kmax: int, radius: float, npts: int = 512) -> np.ndarray:
    """
    Moments m_1..m_kmax from ``G`` on the circle |s| = radius enclosing the
    support: m_k = -(1/2 pi) int s^{k+1} G(s) d theta (trapezoid rule,
    geometrically convergent).  Values in the lower half plane use
    ``G(conj s) = conj G(s)``.
    """
    th = 2 * np.pi * (np.arange(npts) + 0.5) / npts
    s = radius * np.exp(1j * th)
    g = np.array([G(z) if z.imag > 0 else np.conj(G(np.conj(z))) for z in s])
    return np.array([(-np.mean(s ** (k + 1) * g)).real for k in range(1, kmax + 1)])


def _check_mass(G, label):
    mass = analytic_mass(G)
    if abs(mass - 1) > 1e-3:
        raise NormalizationError(f"{label}: mass deficit {1 - mass:.3g}")


# ---------------------------------------------------------------------------
# additive free convolution

def _add_solver(gA, gB):
    FA = lambda z: -1.0 / gA(z)  # noqa: E731
    FB = lambda z: -1.0 / gB(z)  # noqa: E731

    def T(w, s):
        return s + FB(s + FA(w) - w) - (s + FA(w) - w)

    def solve_at(s, w0):
        w = w0
        # a few contraction steps, then Newton polish
        for _ in range(20):
            try:
                wn = T(w, s)
            except ZeroDivisionError:
                break
            if wn.imag < s.imag:
                break
            w = wn
        w, ok = _newton_scalar(lambda v: T(v, s) - v, w)
        if not ok or w.imag < s.imag * (1 - 1e-9):
            w = w0
            for _ in range(200000):
                wn = T(w, s)
                if abs(wn - w) < 1e-14 * (1 + abs(w)):
                    w = wn
                    break
                w = wn
            else:
                raise ConvolutionFailedError(f"subordination failed at s={s}")
        return w

    return solve_at


def add_convolution_transform(A, B) -> AnalyticTransform:
    """
    Stieltjes transform of ``A [+] B`` via subordination: G_C(s) = G_A(w)
    where ``w = s + h_B(s + h_A(w))`` and ``h(z) = F(z) - z`` with
    ``F = -1/G``.
    """
    gA, gB = _gfun(A), _gfun(B)
    solve_at = _add_solver(gA, gB)

    def fn(s):
        s = complex(s)
        if s.imag <= 0:
            raise ValueError("additive convolution evaluated for Im s > 0 only")
        if s.imag >= 2.0:
            w = solve_at(s, s)
        else:
            w = _continuation(solve_at, s.real, s.imag, lambda z: z)
        return gA(w)

    mean = None
    if isinstance(A, SpectralLaw) and isinstance(B, SpectralLaw):
        mean = _mean(A) + _mean(B)
        bounds = (A.lo + B.lo, A.hi + B.hi)
    else:
        bounds = None
    return AnalyticTransform("G", fn, "Im s > 0", "subordination branch", mean=mean,
                             bounds=bounds)


def add_free_convolve(mu_A: SpectralLaw, mu_B: SpectralLaw, grid,
                      eps_schedule: Sequence[float] = DEFAULT_EPS) -> SampledDensity:
    """
    Density of ``mu_A [+] mu_B`` on ``grid``.

    Raises
    ------
    ConvolutionFailedError
        Subordination did not converge.
    NormalizationError
        Analytic mass differs from one by more than 1e-3.
    """
    for m in (mu_A, mu_B):
        if m.planar or not np.isfinite(m.lo) or not np.isfinite(m.hi):
            raise UnsupportedLawError("compactly supported real laws required")
    G = add_convolution_transform(mu_A, mu_B)
    _check_mass(G.fn, "additive convolution")
    return density_from_stieltjes(G, grid, eps_schedule)


# ---------------------------------------------------------------------------
# multiplicative free convolution

def _upsilon(g):
    return lambda t: -g(1.0 / t) / t - 1.0


def _mul_solver(gA, gB):
    UA, UB = _upsilon(gA), _upsilon(gB)

    def h(U, t):
        u = U(t)
        return u / (1 + u) / t

    def T(w, t):
        return t * h(UB, t * h(UA, w))

    def solve_at(s, w0):
        t = 1.0 / s
        w = w0
        for _ in range(20):
            try:
                w = T(w, t)
            except ZeroDivisionError:
                break
        w, ok = _newton_scalar(lambda v: T(v, t) - v, w)
        if not ok:
            w = w0
            for _ in range(200000):
                wn = T(w, t)
                if abs(wn - w) < 1e-14 * (1 + abs(w)):
                    w = wn
                    break
                w = wn
            else:
                raise ConvolutionFailedError(f"subordination failed at s={s}")
        return w

    return solve_at, UA


def mul_convolution_transform(A: SpectralLaw, B: SpectralLaw) -> AnalyticTransform:
    """
    Stieltjes transform of ``A [x] B`` for laws on [0, inf) with nonzero
    mean.  With ``eta = Upsilon/(1+Upsilon)`` and ``h(t) = eta(t)/t`` the
    subordination ``w = t h_B(t h_A(w))``, ``t = 1/s``, gives
    ``G_C(s) = -(1 + Upsilon_A(w))/s``.
    """
    for m in (A, B):
        if abs(_mean(m)) < 1e-14:
            raise MeanZeroUnsupportedError("multiplicative convolution needs nonzero means")
        if m.lo < 0:
            raise UnsupportedLawError("multiplicative convolution implemented for laws on [0, inf)")
    gA, gB = _gfun(A), _gfun(B)
    solve_at, UA = _mul_solver(gA, gB)
    mA, mB = _mean(A), _mean(B)

    def fn(s):
        s = complex(s)
        if s.imag <= 0:
            raise ValueError("multiplicative convolution evaluated for Im s > 0 only")
        seed = lambda z: mB / z  # noqa: E731  (w ~ t m_B for small t)
        if s.imag >= 2.0:
            w = solve_at(s, seed(s))
        else:
            w = _continuation(solve_at, s.real, s.imag, seed)
        return -(1 + UA(w)) / s

    return AnalyticTransform("G", fn, "Im s > 0", "subordination branch", mean=mA * mB,
                             bounds=(0.0, A.hi * B.hi))


def mul_free_convolve(mu_A: SpectralLaw, mu_B: SpectralLaw, grid,
                      eps_schedule: Sequence[float] = DEFAULT_EPS) -> SampledDensity:
    """Density of ``mu_A [x] mu_B`` on ``grid`` (S-transforms multiply)."""
    G = mul_convolution_transform(mu_A, mu_B)
    _check_mass(G.fn, "multiplicative convolution")
    return density_from_stieltjes(G, grid, eps_schedule)


# ---------------------------------------------------------------------------
# free central limit theorem

def free_clt_transform(mu: SpectralLaw, n: int) -> AnalyticTransform:
    """
    G of C_n = n^{-1/2}(X_1 [+] ... [+] X_n), i.e. R_{C_n}(w) = sqrt(n) R(w/sqrt(n)).

    The n-fold power uses the subordination ``w = s/n + (1 - 1/n) F(w)``,
    ``G_{S_n}(s) = G(w)``; then ``G_{C_n}(s) = sqrt(n) G_{S_n}(sqrt(n) s)``.
    """
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    if abs(_mean(mu)) > 1e-12:
        raise ValueError("free CLT requires a zero-mean law")
    g = _gfun(mu)
    F = lambda z: -1.0 / g(z)  # noqa: E731
    rn = math.sqrt(n)

    def solve_at(s, w0):
        phi = lambda v: s / n + (1 - 1 / n) * F(v) - v  # noqa: E731
        w, ok = _newton_scalar(phi, w0)
        if not ok:
            raise ConvolutionFailedError(f"free CLT subordination failed at s={s}")
        return w

    def fn(s):
        s = complex(s)
        if n == 1:
            return g(s)
        z = rn * s
        if z.imag >= 2.0:
            w = solve_at(z, z)
        else:
            w = _continuation(solve_at, z.real, z.imag, lambda u: u)
        return rn * g(w)

    return AnalyticTransform("G", fn, "Im s > 0", "subordination branch", mean=0.0,
                             bounds=(mu.lo, mu.hi))


def free_clt(mu: SpectralLaw, n: int, grid,
             eps_schedule: Sequence[float] = DEFAULT_EPS, closed_form: bool = False):
    """
    Density of the normalized n-fold free sum on ``grid``.

    For the symmetric binary law, ``closed_form=True`` also returns the
    explicit density for cross-checking, as ``(sampled, closed)``.
    """
    G = free_clt_transform(mu, n)
    dens = density_from_stieltjes(G, grid, eps_schedule)
    if closed_form:
        if not (mu.kind == "discrete" and mu.atoms == ((-1.0, 0.5), (1.0, 0.5))):
            raise UnsupportedLawError("closed form only for the binary law")
        return dens, free_clt_binary_density(n, grid)
    return dens


def free_clt_binary_density(n: int, x):
    """(1/2 pi) sqrt(4n^2 - 4n - n^2 x^2) / (n - x^2) on |x| < 2 sqrt(1 - 1/n)."""
    x = np.asarray(x, float)
    arg = 4 * n * n - 4 * n - n * n * x * x
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(arg > 0, np.sqrt(np.clip(arg, 0, None)) / (2 * np.pi * (n - x * x)), 0.0)
    return p


def free_clt_binary_stieltjes(n: int, s) -> complex:
    """Closed-form G of the binary free CLT at stage n (n >= 2)."""
    s = complex(s)
    r = cmath.sqrt(n * s - 2 * math.sqrt(n * n - n)) * cmath.sqrt(n * s + 2 * math.sqrt(n * n - n))
    return 0.5 * ((n - 2) * s - r) / (s * s - n)


# ---------------------------------------------------------------------------
# implicit equations

def _law_integral(P: SpectralLaw, f: Callable):
    return expect(P, f)


def _upper(G, s):
    if np.imag(G) < -1e-12 * max(1.0, abs(G)):
        raise SolverFailedError(f"fixed point left the upper half plane at s={s}")
    return G


def silverstein_product(P_X: SpectralLaw, beta: float, s, cfg: FixedPointConfig = _CFG) -> complex:
    """
    Solve G(s) = int dP_X(x) / (x (1 - beta - beta s G) - s).

    With P_X a point mass at one this is the transform of W = H H^H for H
    of size N x N/beta with entry variance beta/N, i.e. Marchenko-Pastur
    with ratio 1/beta and scale beta; for general P_X it is the law of
    X^{1/2} W X^{1/2}.
    """
    s = complex(s)
    if s.imag <= 0:
        raise ValueError("Im s > 0 required")

    def T(G):
        return _law_integral(P_X, lambda x: 1.0 / (x * (1 - beta - beta * s * G) - s))

    G, _ = _fixed_point(T, -1.0 / s, cfg)
    return _upper(G, s)


def silverstein_bai_sum(G_X, P_Y: SpectralLaw, beta: float, s, cfg: FixedPointConfig = _CFG) -> complex:
    """
    Solve G(s) = G_X(s - beta int y dP_Y(y) / (1 + y G(s))).

    ``G_X`` is a law, an :class:`AnalyticTransform` or a callable.  This is
    the transform of X + H Y H^H for H of size N x K with variance 1/N,
    beta = K/N.
    """
    s = complex(s)
    if s.imag <= 0:
        raise ValueError("Im s > 0 required")
    gX = _gfun(G_X)

    def T(G):
        return gX(s - beta * _law_integral(P_Y, lambda y: y / (1 + y * G)))

    G, _ = _fixed_point(T, gX(s), cfg)
    return _upper(G, s)


def kronecker_pooling(P_Y: SpectralLaw, beta: float, R: int, s, cfg: FixedPointConfig = _CFG) -> complex:
    """Solve G(s) = -(s - (beta/R) int y dP_Y(y) / (1 + y G(s)))^{-1}."""
    if int(R) != R or R < 1:
        raise ValueError("R must be a positive integer")
    return silverstein_bai_sum(lambda z: -1.0 / z, P_Y, beta / R, s, cfg)


def girko_profile_solve(profile: VarianceProfile, s, cfg: FixedPointConfig = _CFG):
    """
    Solve u(x,s) = [-s + int_0^beta w(x,y) dy / (1 + int_0^1 u(x',s) w(x',y) dx')]^{-1}
    on a midpoint grid; returns ``(x, u, G)`` with ``G = int_0^1 u dx``.
    """
    s = complex(s)
    if s.imag <= 0:
        raise ValueError("Im s > 0 required")
    x, y, W = profile.grid()
    dx = 1.0 / profile.n
    dy = profile.beta / profile.n

    def T(u):
        inner = 1 + dx * (u @ W)
        return 1.0 / (-s + dy * (W @ (1.0 / inner)))

    u, _ = _fixed_point(T, np.full(profile.n, -1.0 / s, complex), cfg)
    G = complex(dx * u.sum())
    return x, u, _upper(G, s)


# ---------------------------------------------------------------------------
# product chain

def product_chain_s(rho: Sequence[float], z) -> complex:
    """S_{C_N}(z) = prod_{n=1}^N rho_n / (z + rho_{n-1})."""
    rho = [float(r) for r in rho]
    if len(rho) < 2 or any(r <= 0 for r in rho) or rho[-1] != 1.0:
        raise ValueError("need rho_0..rho_N > 0 with rho_N = 1")
    out = 1.0 + 0j
    for n in range(1, len(rho)):
        d = z + rho[n - 1]
        if d == 0:
            raise PoleError(f"z = -rho_{n - 1} is a pole")
        out *= rho[n] / d
    return out


def _chain_poly(rho, s):
    # G prod (rho_{n-1} - 1 - s G)/rho_n - s G - 1, coefficients low -> high
    p = np.array([0.0, 1.0], complex)
    for n in range(1, len(rho)):
        p = np.convolve(p, np.array([(rho[n - 1] - 1) / rho[n], -s / rho[n]]))
    p[0] -= 1
    p[1] -= s
    return p


def product_chain_stieltjes(rho: Sequence[float], s, steps: int = 200) -> complex:
    """
    G of C_N = H_N H_N^H for the chain H_N = M_N ... M_1 (M_n of size
    K_n x K_{n-1}, variance 1/K_n, rho_n = K_n/K_N).

    The root of the degree-(N+1) polynomial is tracked by continuation
    from ``Re s + 10i`` (where G ~ -1/s) down to ``s``.
    """
    rho = [float(r) for r in rho]
    product_chain_s(rho, 1.0)  # validates rho
    s = complex(s)
    if s.imag <= 0:
        raise ValueError("Im s > 0 required")
    top = complex(s.real, max(10.0, s.imag))
    path = s.real + 1j * np.geomspace(top.imag, s.imag, steps)
    G = -1.0 / top
    for z in path:
        r = np.roots(_chain_poly(rho, z)[::-1])
        G = r[np.argmin(np.abs(r - G))]
    if G.imag < -1e-10:
        raise BranchSelectionError(f"no admissible root at s={s}")
    return complex(G)


# ---------------------------------------------------------------------------
# free log-MGF

def free_log_mgf(q_eigs: Sequence[float], R_J: Callable, K: int | None = None) -> float:
    """
    sum_k int_0^{lambda_k} R_J(w) dw over the eigenvalues of Q.

    ``K`` is the system size; when given, the rank condition is checked
    loosely (rank(Q) must be small compared with sqrt(K)).
    """
    q = np.asarray(q_eigs, float)
    if K is not None and np.count_nonzero(q) > max(1.0, math.sqrt(K)):
        raise ValueError("rank of Q too large for the large-K expansion")
    tot = 0.0
    for lam in q:
        if lam == 0:
            continue
        val, err = quad(lambda w: float(np.real(R_J(w))), 0.0, lam, limit=200)
        if not np.isfinite(val) or err > 1e-8 * max(1.0, abs(val)):
            raise ArithmeticError(f"quadrature failed at eigenvalue {lam}")
        tot += val
    return float(tot)


# ---------------------------------------------------------------------------
# operator-valued MIMO equation

def _etas(tau, a, b):
    c = 1.0 / (a + b)

    def eta1(D):  # b x b -> a x a
        return c * np.einsum("ikjl,kl->ij", tau, D)

    def eta2(D):  # a x a -> b x b
        return c * np.einsum("ikjl,ji->kl", tau, D)

    return eta1, eta2


def operator_valued_mimo(tau, a: int, b: int, z, cfg: FixedPointConfig = _CFG):
    """
    Operator-valued equation for the an x an matrix H H^H of a Gaussian
    a x b block matrix with block covariance ``tau``.

    Solves ``z G1 = I_a + eta1((I_b - eta2(G1))^{-1}) G1``, i.e.
    ``G1 = (z I_a - eta1((I_b - eta2(G1))^{-1}))^{-1}``, which is the form
    compatible with the normalization ``z G1 -> I_a``.

    ``tau`` has shape (a, b, a, b), tau[i,k,j,l] being the covariance of
    block entries (i,k) and (j,l); entries carry covariance tau/((a+b) n).
    ``G1`` is in the Cauchy convention (G1 ~ I/z); the returned scalar is
    ``G = -tr(G1)/a`` in the library convention.
    """
    tau = np.asarray(tau, complex)
    if tau.shape != (a, b, a, b):
        raise ValueError(f"tau must have shape {(a, b, a, b)}")
    if not np.allclose(tau, tau.transpose(2, 3, 0, 1)):
        raise ValueError("tau must satisfy tau(i,k;j,l) = tau(j,l;i,k)")
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("Im z > 0 required")
    eta1, eta2 = _etas(tau, a, b)
    Ia, Ib = np.eye(a), np.eye(b)

    def inv(M):
        if np.linalg.cond(M) > 1e14:
            raise SingularMapError("singular matrix in the covariance map")
        return np.linalg.inv(M)

    def T(G1):
        return inv(z * Ia - eta1(inv(Ib - eta2(G1))))

    G1, _ = _fixed_point(T, Ia / z, cfg)
    G = complex(-np.trace(G1) / a)
    return G1, _upper(G, z)


def isi_tau(L: int = 2):
    """
    Block covariance of the two-tap ISI channel folded into a 2 x 2 block
    matrix [[A1, A2], [0, A1]]: the two diagonal blocks are identical.
    """
    if L != 2:
        raise ValueError("only the two-tap example is tabulated")
    tau = np.zeros((2, 2, 2, 2))
    for i, k, j, l in [(0, 0, 0, 0), (0, 0, 1, 1), (1, 1, 0, 0), (1, 1, 1, 1), (0, 1, 0, 1)]:
        tau[i, k, j, l] = 1.0
    return tau


# ---------------------------------------------------------------------------
# R-diagonal radial density

def rdiagonal_density(S_HHd: Callable, z, h: float = 1e-6) -> float:
    """
    Density at complex ``z`` of an R-diagonal H from the S-transform of H H^H.

    With the radial map ``f(u) = 1/sqrt(S(u - 1))`` on [0, 1] the density is
    ``1 / (2 pi |z| f'(f^{-1}(|z|)))``, zero outside [f(0), f(1)].  The
    prefactor uses the radius ``|z|``; this is the reading that reproduces
    the full-circle and Ginibre-product laws.
    """
    def f(u):
        return 1.0 / math.sqrt(float(np.real(S_HHd(u - 1.0))))

    r = abs(complex(z))
    lo, hi = f(max(h, 1e-12)), f(1.0)
    f0 = lo
    if r < min(f0, hi) or r > max(f0, hi):
        return 0.0
    g = lambda u: f(u) - r  # noqa: E731
    u = brentq(g, max(h, 1e-12), 1.0, xtol=1e-14)
    a, b = max(u - h, 1e-12), min(u + h, 1.0)
    fp = (f(b) - f(a)) / (b - a)
    if fp <= 0 or r == 0:
        return 0.0
    return 1.0 / (2 * math.pi * r * fp)
