"""
Linear multiuser detectors: finite-N and large-system SINR, the
Tse-Hanly equation, polynomial-expansion detectors, iterative matrix
inversion and capacity functionals.

Symbol index ``k`` is zero-based throughout.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import brentq

from .free_calc import FixedPointConfig
from .spectra import SpectralLaw, expect, point_mass

__all__ = [
    "ChannelParams", "SingularError", "DivergenceError", "RankError",
    "EnumerationOverflowError",
    "mmse_sinr_finite", "mmse_sinr_eigen", "mmse_sinr_asymptotic_equal_power",
    "tse_hanly_eta", "tse_hanly_bisect", "gauss_seidel_alpha_bound",
    "gauss_seidel_inverse", "pe_weights", "empirical_moments", "pe_sinr_recursion", "pe_matrix",
    "capacity_per_dim", "bsc_capacity", "mpm_bruteforce", "matched_filter_sinr",
    "ber_gaussian_approx",
]


class SingularError(np.linalg.LinAlgError):
    pass


class DivergenceError(RuntimeError):
    pass


class RankError(np.linalg.LinAlgError):
    pass


class EnumerationOverflowError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelParams:
    """Load, power, noise variance and the user power distribution."""

    beta: float
    P: float = 1.0
    sigma0_sq: float = 0.1
    power_dist: SpectralLaw | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.beta < 0 or self.P <= 0 or self.sigma0_sq <= 0:
            raise ValueError("need beta >= 0, P > 0, sigma0^2 > 0")

    @property
    def powers(self) -> SpectralLaw:
        return self.power_dist if self.power_dist is not None else point_mass(self.P)


# ---------------------------------------------------------------------------
# SINR of the linear MMSE detector

def mmse_sinr_eigen(H: np.ndarray, k: int, P: float, sigma0_sq: float) -> float:
    """
    Eigen form 1/(1 - P u^H (sigma0^2 Lambda^{-1} + P I)^{-1} u) - 1 with
    H^H H = Q Lambda Q^H and u = Q^H e_k.
    """
    lam, Q = np.linalg.eigh(H.conj().T @ H)
    lam = np.clip(lam, 0, None)
    u = Q.conj()[k, :]
    # (sigma0^2 Lambda^{-1} + P I)^{-1} = Lambda (sigma0^2 I + P Lambda)^{-1}
    quad_form = float(np.sum(np.abs(u) ** 2 * lam / (sigma0_sq + P * lam)))
    den = 1 - P * quad_form
    if den <= 0:
        raise SingularError("eigen form undefined (sigma0^2 = 0?)")
    return 1.0 / den - 1.0


def mmse_sinr_finite(H: np.ndarray, k: int, P: float, sigma0_sq: float,
                     check: bool = True) -> float:
    """
    SINR of user ``k`` at the output of the linear MMSE detector,
    P h_k^H (sigma0^2 I + P H H^H - P h_k h_k^H)^{-1} h_k.

    With ``check`` the eigen form is evaluated too and both must agree to
    1e-8 (relative).
    """
    H = np.asarray(H)
    N, K = H.shape
    if not 0 <= k < K:
        raise IndexError(f"user index {k} outside 0..{K - 1}")
    h = H[:, k]
    M = sigma0_sq * np.eye(N) + P * (H @ H.conj().T) - P * np.outer(h, h.conj())
    try:
        cf = cho_factor(M)
    except np.linalg.LinAlgError as e:
        raise SingularError("interference-plus-noise matrix is singular") from e
    val = float(np.real(P * h.conj() @ cho_solve(cf, h)))
    if check:
        alt = mmse_sinr_eigen(H, k, P, sigma0_sq)
        if abs(alt - val) > 1e-8 * max(1.0, abs(val)):
            raise ArithmeticError(f"direct and eigen forms disagree: {val} vs {alt}")
    return val


def mmse_sinr_asymptotic_equal_power(beta: float, P: float, sigma0_sq: float) -> float:
    """Large-system SINR of the MMSE detector with equal powers (closed form)."""
    r = P / sigma0_sq
    return ((1 - beta) * r / 2 - 0.5
            + math.sqrt((1 - beta) ** 2 * r * r / 4 + (1 + beta) * r / 2 + 0.25))


def matched_filter_sinr(beta: float, P: float, sigma0_sq: float) -> float:
    return P / (sigma0_sq + beta * P)


def ber_gaussian_approx(sinr: float) -> float:
    """Q(sqrt(SINR)) for antipodal signalling under a Gaussian interference model."""
    return 0.5 * math.erfc(math.sqrt(max(sinr, 0.0) / 2))


# ---------------------------------------------------------------------------
# Tse-Hanly

def _th_map(params: ChannelParams):
    law = params.powers
    b, s2 = params.beta, params.sigma0_sq
    if law.kind == "discrete":
        locs = np.array([x for x, _ in law.atoms])
        w = np.array([m for _, m in law.atoms])

        def T(eta):
            return 1.0 / (s2 + b * np.sum(w * locs / (1 + locs * eta)))
    else:
        def T(eta):
            return 1.0 / (s2 + b * expect(law, lambda p: p / (1 + p * eta)))
    return T


def tse_hanly_eta(params: ChannelParams, cfg: FixedPointConfig = FixedPointConfig(tol=1e-13)) -> float:
    """
    Positive root of eta = 1/(sigma0^2 + beta int p dP(p)/(1 + p eta)).

    Damped iteration from eta = 1/sigma0^2; the map is increasing and
    bounded, so the iteration is monotone.  SINR of a user with power P_k
    tends to P_k eta.
    """
    T = _th_map(params)
    eta = 1.0 / params.sigma0_sq
    d = cfg.damping
    for _ in range(cfg.max_iter):
        new = (1 - d) * eta + d * T(eta)
        if abs(new - eta) < cfg.tol * max(1.0, eta):
            eta = new
            break
        eta = new
    # one Newton-like polish on the residual for the last digits
    f = lambda e: e - T(e)  # noqa: E731
    h = 1e-7 * eta
    dfe = (f(eta + h) - f(eta - h)) / (2 * h)
    if dfe != 0:
        eta = eta - f(eta) / dfe
    return float(eta)


def tse_hanly_bisect(params: ChannelParams) -> float:
    """Same root by bracketing; the residual eta - T(eta) is increasing."""
    T = _th_map(params)
    f = lambda e: e - T(e)  # noqa: E731
    return float(brentq(f, 1e-12, 1.0 / params.sigma0_sq + 1.0, xtol=1e-15, rtol=1e-15))


# ---------------------------------------------------------------------------
# iterative inversion

def gauss_seidel_alpha_bound(beta: float, P: float, sigma0_sq: float) -> float:
    """Largest step with guaranteed convergence on the MMSE matrix."""
    return 2.0 / (sigma0_sq + P * (1 + math.sqrt(beta)) ** 2)


def gauss_seidel_inverse(X: np.ndarray, alpha: float, iters: int, S0=None,
                         tol: float | None = None) -> np.ndarray:
    """
    S_{i+1} = S_i + alpha (I - X S_i), from S_0 = 0 by default.

    Stops early once ||I - X S||_F < ``tol``.  Raises
    :class:`DivergenceError` when the residual grows tenfold.
    """
    X = np.asarray(X)
    n = X.shape[0]
    I = np.eye(n)
    S = np.zeros_like(X, dtype=np.result_type(X, float)) if S0 is None else np.array(S0)
    r0 = np.linalg.norm(I - X @ S)
    for _ in range(int(iters)):
        R = I - X @ S
        r = np.linalg.norm(R)
        if tol is not None and r < tol:
            break
        if r > 10 * max(r0, 1.0):
            raise DivergenceError(f"residual grew to {r:.3g}")
        S = S + alpha * R
    return S


# ---------------------------------------------------------------------------
# polynomial expansion

def pe_weights(moments: Sequence, sigma0_sq: float, D: int, dps: int | None = None) -> np.ndarray:
    """
    Yule-Walker weights w_0..w_D from moments m_1..m_{2D+2}:
    sum_j w_j (m_{i+j+2} + sigma0^2 m_{i+j+1}) = m_{i+1}, i = 0..D.

    The system is Hankel-like and its condition number grows geometrically
    with D (about 1e18 at D = 7 for an 8 x 8 instance).  With ``dps`` the
    same LU solve with partial pivoting runs in mpmath at that many digits;
    pass moments from :func:`empirical_moments` with the same ``dps``.
    """
    if len(moments) < 2 * D + 2:
        raise ValueError(f"need {2 * D + 2} moments, got {len(moments)}")
    idx = [[i + j + 2 for j in range(D + 1)] for i in range(D + 1)]
    if dps is not None:
        with mpmath.workdps(dps):
            m = [mpmath.mpf(x) for x in moments]
            s2 = mpmath.mpf(sigma0_sq)
            A = mpmath.matrix([[m[k - 1] + s2 * m[k - 2] for k in row] for row in idx])
            rhs = mpmath.matrix([m[i] for i in range(D + 1)])
            try:
                w = mpmath.lu_solve(A, rhs)
            except ZeroDivisionError as e:
                raise RankError("Yule-Walker system is singular; reduce D") from e
            return np.array([float(x) for x in w])
    m = np.asarray(moments, float)
    A = np.array([[m[k - 1] + sigma0_sq * m[k - 2] for k in row] for row in idx])
    rhs = m[:D + 1]
    try:
        return np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as e:
        raise RankError("Yule-Walker system is singular; reduce D") from e


def empirical_moments(R: np.ndarray, kmax: int, dps: int | None = None) -> list:
    """(1/K) tr R^k for k = 1..kmax, optionally in mpmath at ``dps`` digits."""
    R = np.asarray(R, float)
    K = R.shape[0]
    if dps is None:
        out, P = [], np.eye(K)
        for _ in range(kmax):
            P = P @ R
            out.append(float(np.trace(P)) / K)
        return out
    with mpmath.workdps(dps):
        Rm = mpmath.matrix(R.tolist())
        P = mpmath.eye(K)
        out = []
        for _ in range(kmax):
            P = P * Rm
            out.append(sum(P[i, i] for i in range(K)) / K)
        return out


def pe_matrix(R: np.ndarray, w: Sequence[float]) -> np.ndarray:
    """sum_i w_i R^i by Horner's rule."""
    n = R.shape[0]
    out = np.zeros_like(R, dtype=float)
    for wi in list(w)[::-1]:
        out = out @ R + wi * np.eye(n)
    return out


def pe_sinr_recursion(beta: float, P: float, sigma0_sq: float, D: int) -> float:
    """SINR_D = P/(sigma0^2 + beta P/(1 + SINR_{D-1})), SINR_0 = 0."""
    if D < 1:
        raise ValueError("D >= 1")
    s = 0.0
    for _ in range(D):
        s = P / (sigma0_sq + beta * P / (1 + s))
    return s


# ---------------------------------------------------------------------------
# capacity

def capacity_per_dim(law: SpectralLaw, P: float, sigma0_sq: float, real: bool = False) -> float:
    """
    E_lambda log(1 + (P/sigma0^2) lambda) in nats per user, lambda drawn
    from the eigenvalue law of H^H H.  ``real=True`` halves it (real-valued
    channel).
    """
    r = P / sigma0_sq
    c = expect(law, lambda x: np.log1p(r * np.clip(x, 0, None)))
    return 0.5 * c if real else c


def bsc_capacity(p: float) -> float:
    """Capacity of the binary symmetric channel in bits."""
    if not 0 <= p <= 1:
        raise ValueError("crossover probability must lie in [0, 1]")
    h = 0.0
    for q in (p, 1 - p):
        if q > 0:
            h += q * math.log2(q)
    return 1.0 + h


def mpm_bruteforce(H: np.ndarray, y: np.ndarray, sigma: float,
                   alphabet: Sequence[float] = (-1.0, 1.0),
                   prior: Sequence[float] | None = None,
                   max_candidates: int = 1 << 16) -> np.ndarray:
    """
    Marginal-posterior-mode decisions by exhaustive enumeration:
    x_k = argmax_a sum_{x: x_k = a} prior(x) exp(-||y - H x||^2 / (2 sigma^2)).
    """
    H = np.asarray(H, float)
    K = H.shape[1]
    A = np.asarray(alphabet, float)
    if len(A) ** K > max_candidates:
        raise EnumerationOverflowError(f"{len(A)}^{K} candidates exceed {max_candidates}")
    pr = np.full(len(A), 1.0 / len(A)) if prior is None else np.asarray(prior, float)
    idx = np.array(list(itertools.product(range(len(A)), repeat=K)))
    X = A[idx]                                       # candidates x K
    res = y[None, :] - X @ H.T
    logw = -np.sum(res * res, axis=1) / (2 * sigma * sigma) + np.sum(np.log(pr)[idx], axis=1)
    logw -= logw.max()
    w = np.exp(logw)
    out = np.empty(K)
    for k in range(K):
        marg = np.bincount(idx[:, k], weights=w, minlength=len(A))
        out[k] = A[np.argmax(marg)]
    return out
