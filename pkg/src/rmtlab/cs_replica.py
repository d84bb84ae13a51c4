"""
Replica state evolution for l0-regularized (hard-threshold MAP)
compressed sensing, an exhaustive l0 oracle for small instances, and the
limiting laws of the coherence of random matrices with spherical columns.

Load convention: beta = K/N (signal dimension over number of measurements).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import fsolve
from scipy.special import erfc

from .free_calc import FixedPointConfig
from .mc_lab import make_rng

__all__ = [
    "CsProblem", "CsState", "DivergenceError", "scalar_map_l0", "l0_state_evolution",
    "bg_error_terms", "cs_residual", "l0_exhaustive", "l0_oracle_trial",
    "coherence_law_cdf", "coherence_statistic", "coherence_mc", "sparsity_bound",
]


class DivergenceError(ArithmeticError):
    """beta Pr(|z| > threshold) >= 1: the threshold equation has no finite solution."""


@dataclass(frozen=True)
class CsProblem:
    """
    Bernoulli-Gaussian signal: x = 0 with probability 1 - rho, otherwise
    N(0, var).  ``scales`` and ``scale_probs`` give a discrete law for the
    column scales s_j (default s = 1).
    """

    beta: float
    sigma0_sq: float
    gamma: float
    rho: float = 0.1
    var: float = 1.0
    scales: tuple = (1.0,)
    scale_probs: tuple = (1.0,)

    def __post_init__(self):
        if self.gamma <= 0 or self.sigma0_sq < 0 or self.beta < 0:
            raise ValueError("need gamma > 0, sigma0^2 >= 0, beta >= 0")
        if not 0 <= self.rho <= 1 or self.var <= 0:
            raise ValueError("rho in [0, 1] and var > 0 required")
        if abs(sum(self.scale_probs) - 1) > 1e-8 or min(self.scales) <= 0:
            raise ValueError("scale law must be a distribution on s > 0")


@dataclass
class CsState:
    sigma_eff_sq: float
    gamma_p: float
    mse: float
    converged: bool = False
    residual: float = float("inf")
    meta: dict = field(default_factory=lambda: {"ansatz": "RS"})


def scalar_map_l0(z, lam: float):
    """Hard threshold: z where |z| > sqrt(2 lam) (strictly), else 0."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    z = np.asarray(z, float)
    out = np.where(np.abs(z) > math.sqrt(2 * lam), z, 0.0)
    return float(out) if out.ndim == 0 else out


def _Q(x):
    return 0.5 * erfc(x / math.sqrt(2))


def _phi(x):
    return math.exp(-x * x / 2) / math.sqrt(2 * math.pi)


def bg_error_terms(prob: CsProblem, mu: float, lam: float):
    """
    Exact E|x - x_hat|^2 and Pr(|z| > sqrt(2 lam)) for z = x + sqrt(mu) v and
    the hard threshold, x Bernoulli-Gaussian.

    With x = 0, z ~ N(0, mu).  With x ~ N(0, var), z ~ N(0, tau), tau = var + mu,
    and x | z ~ N(var z / tau, var mu / tau); the truncated second moments of
    a Gaussian are closed-form.
    """
    t = math.sqrt(2 * lam)
    rho, v = prob.rho, prob.var
    if mu <= 0:
        e0, p0 = 0.0, 0.0
    else:
        a = t / math.sqrt(mu)
        e0 = mu * 2 * (a * _phi(a) + _Q(a))
        p0 = 2 * _Q(a)
    tau = v + mu
    b = t / math.sqrt(tau)
    z2_out = tau * 2 * (b * _phi(b) + _Q(b))
    p_out = 2 * _Q(b)
    z2_in, p_in = tau - z2_out, 1 - p_out
    c, cv = mu / tau, v * mu / tau
    # kept: error (z - x) has conditional mean c z; zeroed: error x has mean (v/tau) z
    e1 = c * c * z2_out + cv * p_out + (v / tau) ** 2 * z2_in + cv * p_in
    return (1 - rho) * e0 + rho * e1, (1 - rho) * p0 + rho * p_out


def _averages(prob: CsProblem, sig2: float, gp: float):
    """E[s |x - x_hat|^2], Pr(|z| > sqrt(2 lam_p)) and E|x - x_hat|^2 over the scale law."""
    es = pr = mse = 0.0
    for s, w in zip(prob.scales, prob.scale_probs):
        e, p = bg_error_terms(prob, sig2 / s, gp / s)
        es += w * s * e
        pr += w * p
        mse += w * e
    return es, pr, mse


def cs_residual(prob: CsProblem, sig2: float, gp: float) -> float:
    """Max relative residual of the two fixed-point equations."""
    es, pr, _ = _averages(prob, sig2, gp)
    r1 = abs(sig2 - prob.sigma0_sq - prob.beta * es) / max(sig2, 1e-300)
    r2 = abs(gp - prob.gamma - prob.beta * gp * pr) / gp
    return float(max(r1, r2))


def l0_state_evolution(prob: CsProblem, cfg: FixedPointConfig = FixedPointConfig(tol=1e-12),
                       all_branches: bool = False):
    """
    Solve sigma_eff^2 = sigma0^2 + beta E[s |x - x_hat|^2] and
    gamma_p = gamma + beta gamma_p Pr(|z| > sqrt(2 lambda_p)).

    fsolve on (log sigma_eff^2, log gamma_p) from a grid of starts; the
    gamma_p equation is used as gamma_p = gamma / (1 - beta Pr).  When no
    start converges, the plain iteration from (sigma0^2, gamma) is run and
    :class:`DivergenceError` is raised if it reaches beta Pr >= 1.
    Returns the lowest-MSE state, or all distinct states with
    ``all_branches``.
    """
    b = prob.beta
    if b == 0:
        st = CsState(prob.sigma0_sq, prob.gamma, _averages(prob, max(prob.sigma0_sq, 1e-300), prob.gamma)[2],
                     True, 0.0)
        return [st] if all_branches else st

    def fun(v):
        sig2, gp = np.exp(v)
        es, pr, _ = _averages(prob, sig2, gp)
        if b * pr >= 1:
            return [1e3, 1e3]
        return [math.log(prob.sigma0_sq + b * es) - v[0],
                math.log(prob.gamma) - math.log1p(-b * pr) - v[1]]

    s0 = max(prob.sigma0_sq, 1e-12)
    starts = cfg.starts or tuple((m, g) for m in np.logspace(math.log10(s0), math.log10(s0) + 3, 6)
                                 for g in np.logspace(math.log10(prob.gamma), math.log10(prob.gamma) + 2, 5))
    found: list = []
    for m0, g0 in starts:
        v, info, ier, _ = fsolve(fun, [math.log(m0), math.log(g0)], full_output=True, xtol=1e-14)
        sig2, gp = np.exp(v)
        res = cs_residual(prob, sig2, gp)
        if not np.isfinite(res) or res > 1e-6:
            continue
        if any(abs(sig2 - s.sigma_eff_sq) <= 1e-7 * sig2 and abs(gp - s.gamma_p) <= 1e-7 * gp
               for s in found):
            continue
        mse = _averages(prob, sig2, gp)[2]
        found.append(CsState(float(sig2), float(gp), float(mse), res < 10 * cfg.tol, res))
    if not found:
        if _plain_iteration_diverges(prob, cfg.max_iter):
            raise DivergenceError("beta Pr(|z| > threshold) reaches 1: gamma_p diverges")
        raise ArithmeticError("no fixed point found")
    found.sort(key=lambda s: s.mse)
    return found if all_branches else found[0]


def _plain_iteration_diverges(prob: CsProblem, iters: int) -> bool:
    sig2, gp = prob.sigma0_sq, prob.gamma
    for _ in range(iters):
        es, pr, _ = _averages(prob, max(sig2, 1e-300), gp)
        if prob.beta * pr >= 1:
            return True
        sig2, gp = prob.sigma0_sq + prob.beta * es, prob.gamma / (1 - prob.beta * pr)
    return False


# ---------------------------------------------------------------------------
# exhaustive oracle

def l0_exhaustive(A: np.ndarray, y: np.ndarray, gamma: float, kmax: int | None = None) -> np.ndarray:
    """
    argmin_x ||y - A x||^2 / (2 gamma) + ||x||_0 by enumeration of supports
    up to size ``kmax`` (default: number of rows).  Supports of one size
    are handled in a batch of QR factorizations.
    """
    N, K = A.shape
    kmax = N if kmax is None else kmax
    best = float(y @ y) / (2 * gamma)
    bx = np.zeros(K)
    for k in range(1, kmax + 1):
        if k >= best:
            break                      # support cost alone exceeds the best
        idx = np.array(list(itertools.combinations(range(K), k)))
        Q, R = np.linalg.qr(A[:, idx].transpose(1, 0, 2))
        proj = np.einsum("nik,i->nk", Q, y)
        cost = (y @ y - np.sum(proj ** 2, axis=1)) / (2 * gamma) + k
        j = int(np.argmin(cost))
        if cost[j] < best:
            best = float(cost[j])
            bx = np.zeros(K)
            bx[idx[j]] = np.linalg.solve(R[j], proj[j])
    return bx


def l0_oracle_trial(prob: CsProblem, K: int, N: int, seed: int, replicate: int = 0) -> float:
    """
    One instance y = A x + n with A entries N(0, 1/N) (s = 1), x
    Bernoulli-Gaussian and noise variance sigma0^2; returns the per-component
    squared error of the exhaustive l0 estimate.
    """
    rng = make_rng(seed, replicate)
    A = rng.standard_normal((N, K)) / math.sqrt(N)
    x = np.where(rng.random(K) < prob.rho, math.sqrt(prob.var) * rng.standard_normal(K), 0.0)
    y = A @ x + math.sqrt(prob.sigma0_sq) * rng.standard_normal(N)
    xh = l0_exhaustive(A, y, prob.gamma)
    return float(np.mean((x - xh) ** 2))


# ---------------------------------------------------------------------------
# coherence

def coherence_statistic(L, K: int, N: int):
    """N log(1 - L^2) + 4 log K - log log K."""
    L = np.asarray(L, float)
    return N * np.log1p(-L * L) + 4 * math.log(K) - math.log(math.log(K))


def coherence_law_cdf(regime: str, y, alpha: float = 0.0, c: float = 1.0):
    """
    Limiting CDF of the centered coherence statistic.

    ``subexp``: 1 - exp(-e^{y/2}/sqrt(8 pi)); ``transitional``:
    exp(-e^{-(y + 8 alpha^2)/2}/sqrt(8 pi)); ``proportional``:
    1 - exp(-sqrt(c/(2 pi (1 - e^{-4c}))) e^{(y + 8c)/2}).  The
    superexponential regime is not implemented: its closed form, with the
    sign in common use, is not monotone in y.
    """
    y = np.asarray(y, float)
    if regime == "subexp":
        out = -np.expm1(-np.exp(y / 2) / math.sqrt(8 * math.pi))
    elif regime == "transitional":
        if alpha < 0:
            raise ValueError("alpha >= 0")
        out = np.exp(-np.exp(-(y + 8 * alpha * alpha) / 2) / math.sqrt(8 * math.pi))
    elif regime == "proportional":
        if c <= 0:
            raise ValueError("c > 0")
        k = math.sqrt(c / (2 * math.pi * (-math.expm1(-4 * c))))
        out = -np.expm1(-k * np.exp((y + 8 * c) / 2))
    elif regime == "superexp":
        raise NotImplementedError("superexponential law: the known closed form is not a distribution function")
    else:
        raise ValueError(f"unknown regime {regime!r}")
    return float(out) if out.ndim == 0 else out


def coherence_mc(K: int, N: int, trials: int, seed: int = 0) -> np.ndarray:
    """
    Coherence L = max_{i<j} |<h_i, h_j>| of N x K matrices with independent
    columns uniform on the unit sphere; one Philox stream per trial.
    """
    if K < 2 or N < 1 or max(K, N) > 2000:
        raise ValueError("need K >= 2 and K, N <= 2000")
    iu = np.triu_indices(K, 1)
    out = np.empty(trials)
    for t in range(trials):
        H = make_rng(seed, t).standard_normal((N, K))
        H /= np.linalg.norm(H, axis=0)
        out[t] = np.abs((H.T @ H)[iu]).max()
    return out


def sparsity_bound(N: float, K: float) -> float:
    """(1/4) sqrt(N / log K)."""
    if K < 2:
        raise ValueError("K >= 2")
    return 0.25 * math.sqrt(N / math.log(K))
