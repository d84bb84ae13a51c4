"""
Replica-symmetric saddle points of the CDMA detector free energy.

Order parameters follow the usual RS notation: E, F (conjugate fields),
m, q, p, p0 (overlaps) and G = F - E, G0 = 0.  All results are RS; no
replica-symmetry-breaking check is attempted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, fsolve
from scipy.special import erfc

from .free_calc import FixedPointConfig

__all__ = [
    "Prior", "ReplicaProblem", "ReplicaState", "SweepResult", "PrecisionError",
    "gaussian_average", "rs_fixed_point_gaussian", "rs_fixed_point_binary",
    "rs_fixed_point_arbitrary", "binary_matched_solutions", "free_energy_general",
    "residuals", "ber_from_state", "qfunc", "mutual_information_per_user",
    "phase_transition_sweep", "E_MAX",
]

E_MAX = 1e6
_SEEDS = np.logspace(-3, 3, 25)


class PrecisionError(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# Gaussian averages
#
# tanh(z sqrt(F) + E) has poles at distance pi/(2 sqrt F) from the real
# z-axis, which makes Gauss-Hermite converge slowly for E, F of order 10.
# A fine trapezoid rule on [-L, L] converges geometrically with rate set
# by that strip, so it is used instead.

@dataclass(frozen=True)
class _Rule:
    z: np.ndarray
    w: np.ndarray


_RULES: dict = {}


def _rule(n: int, L: float = 12.0) -> _Rule:
    if n not in _RULES:
        z = np.linspace(-L, L, n)
        w = np.exp(-z * z / 2) * (z[1] - z[0]) / math.sqrt(2 * math.pi)
        _RULES[n] = _Rule(z, w / w.sum())
    return _RULES[n]


def gaussian_average(f, nodes: int = 1601) -> float:
    """int f(z) Dz with Dz the standard Gaussian measure."""
    r = _rule(nodes)
    return float(np.sum(r.w * f(r.z)))


def _logcosh(a):
    a = np.abs(a)
    return a + np.log1p(np.exp(-2 * a)) - math.log(2)


def qfunc(x: float) -> float:
    """Gaussian tail int_x^inf Dz."""
    return 0.5 * float(erfc(x / math.sqrt(2)))


# ---------------------------------------------------------------------------
# problem and state

@dataclass(frozen=True)
class Prior:
    """
    Symbol prior.  ``kind`` is ``"gaussian"`` (variance ``var``) or
    ``"discrete"`` (``values`` with probabilities ``probs``).  A sampled
    pdf can be passed as a discrete prior with weights pdf * dx.
    """

    kind: str = "gaussian"
    var: float = 1.0
    values: tuple = ()
    probs: tuple = ()

    def __post_init__(self):
        if self.kind == "gaussian":
            if self.var <= 0:
                raise ValueError("variance must be positive")
        elif self.kind == "discrete":
            if len(self.values) != len(self.probs) or not self.values:
                raise ValueError("values and probs must be nonempty and of equal length")
            if abs(sum(self.probs) - 1) > 1e-8 or min(self.probs) < 0:
                raise ValueError("probs must be a distribution (to 1e-8)")
        else:
            raise ValueError(f"unknown prior kind {self.kind!r}")

    @classmethod
    def binary(cls) -> "Prior":
        return cls("discrete", values=(-1.0, 1.0), probs=(0.5, 0.5))

    @classmethod
    def sampled(cls, x: Sequence[float], pdf: Sequence[float]) -> "Prior":
        x = np.asarray(x, float)
        w = np.asarray(pdf, float) * np.gradient(x)
        w = w / w.sum()
        return cls("discrete", values=tuple(x), probs=tuple(w))

    @property
    def second_moment(self) -> float:
        if self.kind == "gaussian":
            return self.var
        v, p = np.array(self.values), np.array(self.probs)
        return float(np.sum(p * v * v))

    def posterior(self, a: np.ndarray, E: float):
        """
        <x>, <x^2> and log Z under Z(a) = E_prior exp(a x - E x^2/2).
        Discrete priors use a log-sum-exp shift, so large E does not underflow.
        """
        a = np.asarray(a, float)
        if self.kind == "gaussian":
            v = self.var
            d = 1 + E * v
            mean = a * v / d
            return mean, v / d + mean * mean, a * a * v / (2 * d) - 0.5 * math.log(d)
        v = np.asarray(self.values, float)
        lp = np.log(np.asarray(self.probs, float))
        ex = a[..., None] * v - E * v * v / 2 + lp
        mx = ex.max(axis=-1, keepdims=True)
        w = np.exp(ex - mx)
        Z = w.sum(axis=-1)
        mean = (w * v).sum(axis=-1) / Z
        sq = (w * v * v).sum(axis=-1) / Z
        return mean, sq, np.log(Z) + mx[..., 0]


@dataclass(frozen=True)
class ReplicaProblem:
    """Load, assumed and true noise variance, true and assumed prior."""

    beta: float
    sigma_sq: float
    sigma0_sq: float
    prior: str = "gaussian"          # gaussian, binary_uniform or custom
    true_prior: Prior | None = None
    assumed_prior: Prior | None = None

    def __post_init__(self):
        if self.beta < 0 or self.sigma_sq <= 0 or self.sigma0_sq <= 0:
            raise ValueError("need beta >= 0 and positive noise variances")
        if self.prior not in ("gaussian", "binary_uniform", "custom"):
            raise ValueError(f"unknown prior {self.prior!r}")
        if self.prior == "custom" and (self.true_prior is None or self.assumed_prior is None):
            raise ValueError("custom prior needs true_prior and assumed_prior")

    @classmethod
    def matched(cls, beta, sigma0_sq, prior="gaussian"):
        return cls(beta, sigma0_sq, sigma0_sq, prior)

    def priors(self):
        if self.prior == "gaussian":
            return Prior("gaussian"), Prior("gaussian")
        if self.prior == "binary_uniform":
            return Prior.binary(), Prior.binary()
        return self.true_prior, self.assumed_prior


@dataclass
class ReplicaState:
    E: float
    F: float
    m: float
    q: float
    p: float
    p0: float
    free_energy: float = float("nan")
    converged: bool = False
    residual: float = float("inf")
    G: float = field(init=False)
    G0: float = field(init=False, default=0.0)

    def __post_init__(self):
        self.G = self.F - self.E

    @property
    def ber(self) -> float:
        return ber_from_state(self)


# ---------------------------------------------------------------------------
# shared algebra

def _EF_from_overlaps(prob: ReplicaProblem, m, q, p, p0):
    den = prob.sigma_sq + prob.beta * (p - q)
    E = 1.0 / den
    F = (prob.sigma0_sq + prob.beta * (p0 - 2 * m + q)) / den ** 2
    return E, F


def _overlaps(prob: ReplicaProblem, E: float, F: float, nodes: int = 1601):
    """(m, q, p, p0) given the conjugate fields."""
    if E > E_MAX or F > E_MAX:
        raise PrecisionError(f"E = {E:.3g} beyond quadrature range")
    true, assumed = prob.priors()
    r = _rule(nodes)
    if true.kind == "gaussian":
        # a = E x + sqrt(F) z is Gaussian; E[x | a] is linear in a
        v0 = true.var
        sa = math.sqrt(E * E * v0 + F)
        a = sa * r.z
        xa = E * v0 * a / sa ** 2
        mean, sq, logZ = assumed.posterior(a, E)
        m = np.sum(r.w * xa * mean)
        q = np.sum(r.w * mean * mean)
        p = np.sum(r.w * sq)
        lz = np.sum(r.w * logZ)
        p0 = v0
    else:
        vals, probs = np.asarray(true.values), np.asarray(true.probs)
        a = E * vals[:, None] + math.sqrt(F) * r.z[None, :]
        mean, sq, logZ = assumed.posterior(a, E)
        W = probs[:, None] * r.w[None, :]
        m = np.sum(W * vals[:, None] * mean)
        q = np.sum(W * mean * mean)
        p = np.sum(W * sq)
        lz = np.sum(W * logZ)
        p0 = float(np.sum(probs * vals * vals))
    return float(m), float(q), float(p), float(p0), float(lz)


def free_energy_general(prob: ReplicaProblem, st: ReplicaState, logZ: float) -> float:
    """
    Per-user RS free energy

        (1/2b)[log(1 + b(p - q)/s^2) + F/E + b E(2m - p) + b F(p - q)] - E log Z

    which reduces to the matched Gaussian and matched binary expressions.
    """
    b = prob.beta
    br = (math.log1p(b * (st.p - st.q) / prob.sigma_sq) + st.F / st.E
          + b * st.E * (2 * st.m - st.p) + b * st.F * (st.p - st.q))
    return br / (2 * b) - logZ


def residuals(prob: ReplicaProblem, st: ReplicaState, nodes: int = 1601) -> float:
    """Max abs residual of the five RS equations, recomputed from scratch."""
    m, q, p, p0, _ = _overlaps(prob, st.E, st.F, nodes)
    E, F = _EF_from_overlaps(prob, st.m, st.q, st.p, st.p0)
    r = [abs(E - st.E) / max(1, st.E), abs(F - st.F) / max(1, st.F),
         abs(m - st.m), abs(q - st.q), abs(p - st.p), abs(p0 - st.p0)]
    return float(max(r))


def _state(prob, E, F, nodes=1601):
    m, q, p, p0, lz = _overlaps(prob, E, F, nodes)
    st = ReplicaState(E, F, m, q, p, p0)
    st.free_energy = free_energy_general(prob, st, lz)
    st.residual = residuals(prob, st, nodes)
    return st


# ---------------------------------------------------------------------------
# solvers

def rs_fixed_point_gaussian(prob: ReplicaProblem,
                            cfg: FixedPointConfig = FixedPointConfig(tol=1e-13)) -> ReplicaState:
    """
    Gaussian assumed prior (true prior Gaussian, or binary, which gives the
    same equations since only the second moment enters).  Damped
    alternating iteration on (E, F) <-> (m, q, p).
    """
    b, s2, s02 = prob.beta, prob.sigma_sq, prob.sigma0_sq
    if prob.prior == "custom" and prob.assumed_prior.kind != "gaussian":
        raise ValueError("assumed prior must be Gaussian here")
    E, F = 1.0 / s2, s02 / s2 ** 2
    d = cfg.damping
    res = float("inf")
    for _ in range(cfg.max_iter):
        m = E / (1 + E)
        q = (E * E + F) / (1 + E) ** 2
        p = q + 1 / (1 + E)
        En, Fn = _EF_from_overlaps(prob, m, q, p, 1.0)
        res = max(abs(En - E), abs(Fn - F)) / max(1.0, E)
        E, F = (1 - d) * E + d * En, (1 - d) * F + d * Fn
        if res < cfg.tol:
            break
    m = E / (1 + E)
    q = (E * E + F) / (1 + E) ** 2
    p = q + 1 / (1 + E)
    st = ReplicaState(E, F, m, q, p, 1.0)
    st.free_energy = free_energy_general(
        prob, st, 0.5 * (E * E + F) / (1 + E) - 0.5 * math.log1p(E))
    En, Fn = _EF_from_overlaps(prob, m, q, p, 1.0)
    st.residual = max(abs(En - E) / max(1, E), abs(Fn - F) / max(1, F))
    st.converged = st.residual < 10 * cfg.tol * max(1.0, E)
    return st


def _tanh_m(E, nodes=1601):
    r = _rule(nodes)
    return float(np.sum(r.w * np.tanh(r.z * math.sqrt(E) + E)))


def binary_matched_solutions(beta: float, sigma0_sq: float, nodes: int = 1601,
                             grid: np.ndarray | None = None) -> list:
    """
    All roots E of 1/E = sigma0^2 + beta (1 - int tanh(z sqrt(E) + E) Dz),
    found by sign changes on a log grid and refined with brentq.
    """
    if beta == 0:
        return [1.0 / sigma0_sq]
    if grid is None:
        grid = np.logspace(math.log10(0.5 / (sigma0_sq + beta)), math.log10(2 / sigma0_sq), 3000)
    one_m = _one_minus_m_grid(grid, nodes)
    return _roots_from_grid(grid, one_m, beta, sigma0_sq, nodes)


def _one_minus_m_grid(grid, nodes):
    r = _rule(nodes)
    u = np.sqrt(grid)[:, None] * r.z[None, :] + grid[:, None]
    # 1 - tanh(u) = 2 / (1 + e^{2u}), without cancellation for large u
    return np.sum(r.w * (2 / (1 + np.exp(np.clip(2 * u, -700, 700)))), axis=1)


def _roots_from_grid(grid, one_m, beta, sigma0_sq, nodes):
    f = 1 / grid - sigma0_sq - beta * one_m

    def g(E):
        r = _rule(nodes)
        u = r.z * math.sqrt(E) + E
        return 1 / E - sigma0_sq - beta * np.sum(r.w * 2 / (1 + np.exp(np.clip(2 * u, -700, 700))))

    out = []
    for i in np.nonzero(np.sign(f[:-1]) != np.sign(f[1:]))[0]:
        E = brentq(g, grid[i], grid[i + 1], xtol=1e-14, rtol=1e-15)
        if E > E_MAX:
            raise PrecisionError(f"E = {E:.3g} beyond quadrature range")
        if not out or abs(E - out[-1]) > 1e-6 * max(1, E):
            out.append(E)
    return out


def rs_fixed_point_binary(prob: ReplicaProblem, cfg: FixedPointConfig = FixedPointConfig(tol=1e-12),
                          nodes: int = 1601) -> list:
    """
    All RS solutions for the binary uniform prior, sorted by E.

    Matched noise reduces to a scalar equation in E whose roots are
    bracketed exhaustively; mismatched noise runs fsolve on (log E, log F)
    from log-spaced seeds.  Solutions closer than 1e-6 in E are merged.
    The caller picks the one with minimum free energy.
    """
    if prob.prior == "gaussian":
        raise ValueError("use rs_fixed_point_gaussian")
    if prob.sigma_sq == prob.sigma0_sq and prob.prior == "binary_uniform":
        Es = binary_matched_solutions(prob.beta, prob.sigma0_sq, nodes)
        states = [_state(prob, E, E, nodes) for E in Es]
    else:
        states = _multistart(prob, cfg, nodes)
    for st in states:
        st.converged = st.residual < 10 * cfg.tol * max(1.0, st.E)
    return states


def _multistart(prob, cfg, nodes):
    def fun(v):
        E, F = np.exp(v)
        m, q, p, p0, _ = _overlaps(prob, E, F, nodes)
        En, Fn = _EF_from_overlaps(prob, m, q, p, p0)
        return [math.log(En) - v[0], math.log(Fn) - v[1]]

    seeds = cfg.starts or tuple(_SEEDS)
    ratio = prob.sigma0_sq / prob.sigma_sq
    found: list = []
    for E0 in seeds:
        try:
            v, info, ier, _ = fsolve(fun, [math.log(E0), math.log(E0 * ratio)],
                                     full_output=True, xtol=1e-14)
        except (PrecisionError, OverflowError, ValueError):
            continue
        if ier != 1 or not np.all(np.isfinite(v)):
            continue
        E, F = np.exp(v)
        if E > E_MAX:
            continue
        if any(abs(E - s.E) <= 1e-6 * max(1, E) for s in found):
            continue
        found.append(_state(prob, float(E), float(F), nodes))
    found.sort(key=lambda s: s.E)
    return found


def rs_fixed_point_arbitrary(prob: ReplicaProblem, cfg: FixedPointConfig = FixedPointConfig(tol=1e-12),
                             nodes: int = 1601) -> list:
    """
    Custom true/assumed priors: nested quadrature over the true prior and
    the Gaussian field, posterior averages under the assumed prior.
    Returns all solutions found, sorted by E.
    """
    states = _multistart(prob, cfg, nodes)
    for st in states:
        st.converged = st.residual < 10 * cfg.tol * max(1.0, st.E)
    return states


def ber_from_state(st: ReplicaState) -> float:
    """Q(E / sqrt(F)); Q(sqrt(E)) when matched."""
    return qfunc(st.E / math.sqrt(st.F))


def mutual_information_per_user(st: ReplicaState, beta: float) -> float:
    """I/K = free energy per user - 1/(2 beta), in nats."""
    if not st.converged:
        return float("nan")
    return st.free_energy - 1.0 / (2 * beta)


# ---------------------------------------------------------------------------
# phase transition

@dataclass
class SweepResult:
    """
    ``rows``: (beta, branch_id, E, ber, free_energy, selected) per solution;
    branch 0 is the smallest E.  ``window`` is the range of loads with more
    than one solution and ``beta_star`` the load where the free-energy
    minimizer switches branch (None if absent).
    """

    rows: list
    window: tuple | None
    beta_star: float | None


def _matched_binary_fe(E, beta, sigma0_sq, nodes=1601):
    r = _rule(nodes)
    lc = float(np.sum(r.w * _logcosh(r.z * math.sqrt(E) + E)))
    return (sigma0_sq * E - math.log(sigma0_sq * E)) / (2 * beta) + E - lc


def phase_transition_sweep(sigma0_sq: float, betas: Sequence[float], nodes: int = 1601) -> SweepResult:
    """
    Matched binary problem over a load grid.  Roots are bracketed on one
    shared E grid; beta_star is refined by brentq on the free-energy gap
    between the extreme branches.
    """
    betas = np.asarray(betas, float)
    bmax = max(betas.max(), 1e-12)
    grid = np.logspace(math.log10(0.5 / (sigma0_sq + bmax)), math.log10(2 / sigma0_sq), 4000)
    one_m = _one_minus_m_grid(grid, nodes)
    rows, multi, sel = [], [], []
    for b in betas:
        Es = [1 / sigma0_sq] if b == 0 else _roots_from_grid(grid, one_m, b, sigma0_sq, nodes)
        fes = [_matched_binary_fe(E, b, sigma0_sq, nodes) if b > 0 else 0.0 for E in Es]
        k = int(np.argmin(fes))
        for i, (E, fe) in enumerate(zip(Es, fes)):
            rows.append((float(b), i, E, qfunc(math.sqrt(E)), fe, i == k))
        if len(Es) > 1:
            multi.append(b)
        sel.append((b, Es, fes, k))
    window = (float(min(multi)), float(max(multi))) if multi else None
    beta_star = None
    for (b0, E0, f0, k0), (b1, E1, f1, k1) in zip(sel[:-1], sel[1:]):
        if len(E0) > 1 and len(E1) > 1 and k0 != k1:
            def gap(b):
                Es = _roots_from_grid(grid, one_m, b, sigma0_sq, nodes)
                return (_matched_binary_fe(Es[0], b, sigma0_sq, nodes)
                        - _matched_binary_fe(Es[-1], b, sigma0_sq, nodes))
            beta_star = float(brentq(gap, b0, b1, xtol=1e-10))
            break
    return SweepResult(rows, window, beta_star)
