"""
Monte Carlo sampling of the random-matrix ensembles, empirical spectra
and distances to asymptotic laws.

Every sample draws from its own Philox stream keyed by ``(seed, replicate)``,
so results are reproducible and replicates can run in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .spectra import SpectralLaw, UnsupportedLawError, law_cdf, radial_cdf

__all__ = [
    "EnsembleSpec", "EmpiricalSpectrum", "make_rng", "sample", "spectrum",
    "ks_distance", "ks_against_cdf", "radial_ks", "phase_ks",
    "eigenvector_lln", "resolvent_trace", "freeness_check", "median_over_seeds",
    "MAX_DIM",
]

MAX_DIM = 20_000
KINDS = ("iid_gaussian", "iid_pm1", "wigner_sym", "haar_unitary",
         "variance_profile", "product_chain", "block_gaussian")


@dataclass(frozen=True)
class EnsembleSpec:
    """
    Ensemble description.

    ``params`` by kind: ``iid_gaussian``/``iid_pm1``: N, K (and optional
    ``complex``); ``wigner_sym``/``haar_unitary``: N; ``variance_profile``:
    N, K, w; ``product_chain``: dims (K_0..K_N); ``block_gaussian``: a, b,
    n, tau.
    """

    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    replicate: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        dims = [v for k, v in self.params.items() if k in ("N", "K", "n", "a", "b")]
        dims += list(self.params.get("dims", ()))
        if any(int(d) < 1 for d in dims):
            raise ValueError("dimensions must be >= 1")
        if any(int(d) > MAX_DIM for d in dims):
            raise ValueError(f"dimension above {MAX_DIM}")


@dataclass
class EmpiricalSpectrum:
    """Eigenvalues of one sampled matrix (real ones sorted ascending)."""

    values: np.ndarray
    n: int

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    def cdf(self, x):
        if self.is_complex:
            raise UnsupportedLawError("complex spectrum: use radial or phase statistics")
        return np.searchsorted(self.values, x, side="right") / self.n

    def moment(self, k: int) -> float:
        v = np.abs(self.values) if self.is_complex else self.values
        return float(np.mean(v ** k))

    def min_nonzero(self, tol: float = 1e-9) -> float:
        v = self.values[np.abs(self.values) > tol]
        return float(v.min())


def make_rng(seed: int, replicate: int = 0) -> np.random.Generator:
    """Counter-based generator for the stream ``(seed, replicate)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate),))
    return np.random.Generator(np.random.Philox(ss))


def _cgauss(rng, shape, var):
    # complex proper: two independent reals of variance var/2
    s = math.sqrt(var / 2)
    return s * rng.standard_normal(shape) + 1j * s * rng.standard_normal(shape)


def _haar(rng, N):
    H = _cgauss(rng, (N, N), 1.0 / N)
    lam, V = sla.eigh(H.conj().T @ H, driver="evr", check_finite=False)
    return H @ (V * lam ** -0.5) @ V.conj().T


def sample(spec: EnsembleSpec) -> np.ndarray:
    """Draw one matrix of the ensemble, reproducibly."""
    rng = make_rng(spec.seed, spec.replicate)
    p = spec.params
    k = spec.kind
    if k == "iid_gaussian":
        N, K = int(p["N"]), int(p.get("K", p["N"]))
        if p.get("complex", False):
            return _cgauss(rng, (N, K), 1.0 / N)
        return rng.standard_normal((N, K)) / math.sqrt(N)
    if k == "iid_pm1":
        N, K = int(p["N"]), int(p.get("K", p["N"]))
        return rng.choice(np.array([-1.0, 1.0]), size=(N, K)) / math.sqrt(N)
    if k == "wigner_sym":
        N = int(p["N"])
        H = rng.standard_normal((N, N)) / math.sqrt(N)
        return (H + H.T) / math.sqrt(2)
    if k == "haar_unitary":
        return _haar(rng, int(p["N"]))
    if k == "variance_profile":
        N, K = int(p["N"]), int(p["K"])
        x = (np.arange(N) + 0.5) / N
        y = (np.arange(K) + 0.5) / N
        W = np.asarray(p["w"](x[:, None], y[None, :]), float) * np.ones((N, K))
        return rng.standard_normal((N, K)) * np.sqrt(W / N)
    if k == "product_chain":
        dims = [int(d) for d in p["dims"]]
        H = None
        for n in range(1, len(dims)):
            M = rng.standard_normal((dims[n], dims[n - 1])) / math.sqrt(dims[n])
            H = M if H is None else M @ H
        return H
    if k == "block_gaussian":
        a, b, n = int(p["a"]), int(p["b"]), int(p["n"])
        tau = np.asarray(p["tau"], float).reshape(a * b, a * b)
        lam, V = np.linalg.eigh(tau)
        if lam.min() < -1e-10 * max(1.0, lam.max()):
            raise ValueError("tau must be positive semidefinite")
        L = V * np.sqrt(np.clip(lam, 0, None))
        Z = _cgauss(rng, (a * b, n * n), 1.0 / ((a + b) * n))
        E = (L @ Z).reshape(a, b, n, n)
        return E.transpose(0, 2, 1, 3).reshape(a * n, b * n)
    raise ValueError(f"unknown ensemble kind {k!r}")


def spectrum(M: np.ndarray, mode: str = "eig_hermitian") -> EmpiricalSpectrum:
    """
    Full spectrum of ``M``.

    ``singular_sq`` returns the N eigenvalues of ``M M^H`` for an N x K
    matrix: squared singular values padded with exact zeros when K < N.
    ``eig_unitary`` needs a unitary ``M`` without eigenvalue -1 and uses
    one Hermitian eigensolve.
    """
    M = np.asarray(M)
    if mode == "eig_hermitian":
        if M.shape[0] != M.shape[1]:
            raise ValueError("eig_hermitian needs a square matrix")
        v = sla.eigh(M, eigvals_only=True, driver="evr", check_finite=False)
    elif mode == "singular_sq":
        N = M.shape[0]
        sv = sla.svdvals(M, check_finite=False) ** 2
        v = np.sort(np.concatenate([sv, np.zeros(N - len(sv))]))
    elif mode == "eig_unitary":
        # Cayley transform A = i (I + U)^{-1} (I - U) is Hermitian with
        # eigenvalues tan(theta/2) for the eigenphases theta of U
        n = M.shape[0]
        I = np.eye(n)
        A = 1j * sla.solve(I + M, I - M, check_finite=False)
        lam = sla.eigh((A + A.conj().T) / 2, eigvals_only=True, driver="evr", check_finite=False)
        v = np.exp(2j * np.arctan(lam))
    elif mode == "eig_complex":
        if M.shape[0] != M.shape[1]:
            raise ValueError("eig_complex needs a square matrix")
        v = sla.eigvals(M, check_finite=False)
    else:
        raise ValueError(f"unknown spectrum mode {mode!r}")
    return EmpiricalSpectrum(v, len(v))


def ks_against_cdf(values, cdf: Callable, cdf_left: Callable | None = None) -> float:
    """
    sup |F_emp - F| over a sorted real sample, checking both sides of each
    jump.  ``cdf_left`` gives the left limits when F has atoms.
    """
    x = np.sort(np.asarray(values, float))
    n = len(x)
    F = np.asarray(cdf(x), float)
    Fl = F if cdf_left is None else np.asarray(cdf_left(x), float)
    hi = np.searchsorted(x, x, side="right") / n
    lo = np.searchsorted(x, x, side="left") / n
    return float(max(np.max(np.abs(hi - F)), np.max(np.abs(lo - Fl))))


def ks_distance(emp: EmpiricalSpectrum, law: SpectralLaw) -> float:
    """Kolmogorov-Smirnov distance between a real spectrum and a real law."""
    if law.planar or emp.is_complex:
        raise UnsupportedLawError("planar law or complex spectrum: use radial_ks")
    x = np.sort(np.asarray(emp.values, float))
    F = np.asarray(law_cdf(law, x), float)
    Fl = F.copy()
    for loc, m in law.atoms:
        Fl -= m * (x == loc)
    return ks_against_cdf(x, lambda _: F, lambda _: Fl)


def radial_ks(emp: EmpiricalSpectrum, law: SpectralLaw) -> float:
    """KS distance of |eigenvalue| against the radial law of a planar law."""
    if not law.planar:
        raise UnsupportedLawError("radial_ks is for planar laws")
    return ks_against_cdf(np.abs(emp.values), lambda r: radial_cdf(law, r))


def phase_ks(emp: EmpiricalSpectrum) -> float:
    """KS distance of eigenvalue phases against uniform on [0, 2 pi)."""
    ph = np.mod(np.angle(emp.values), 2 * np.pi)
    return ks_against_cdf(ph, lambda t: t / (2 * np.pi))


def eigenvector_lln(H: np.ndarray, x: np.ndarray, t_grid: Sequence[float],
                    weights: Sequence[float] | None = None) -> float:
    """
    max_t |sum_{k <= ceil(tK)} a_k y_k^2 - (1/K) sum_{k <= ceil(tK)} a_k|
    with y = U x and U^T Lambda U = H^T H (eigenvalues ascending).

    Unit weights give the plain law of large numbers.
    """
    H = np.asarray(H)
    if np.iscomplexobj(H):
        raise ValueError("the eigenvector law is stated for real matrices")
    x = np.asarray(x, float)
    K = H.shape[1]
    if x.shape != (K,) or abs(np.linalg.norm(x) - 1) > 1e-10:
        raise ValueError("x must be a unit vector of length K")
    _, V = np.linalg.eigh(H.T @ H)
    y = V.T @ x
    a = np.ones(K) if weights is None else np.asarray(weights, float)
    cy = np.concatenate([[0.0], np.cumsum(a * y * y)])
    ca = np.concatenate([[0.0], np.cumsum(a)]) / K
    idx = np.minimum(np.ceil(np.asarray(t_grid) * K).astype(int), K)
    return float(np.max(np.abs(cy[idx] - ca[idx])))


def resolvent_trace(M: np.ndarray, s, hermitian: bool = True) -> complex:
    """(1/N) tr (M - s I)^{-1} from the eigenvalues."""
    lam = np.linalg.eigvalsh(M) if hermitian else np.linalg.eigvals(M)
    return complex(np.mean(1.0 / (lam - s)))


def freeness_check(N: int, seed: int = 0):
    """
    tr(A C B D) against tr A tr B tr(CD) + tr C tr D tr(AB) - tr A tr B tr C tr D
    for {A, B} built from a Wigner matrix and {C, D} from a Haar-rotated
    diagonal; returns ``(lhs, rhs)`` with normalized traces.
    """
    rng = make_rng(seed, 0)
    W = sample(EnsembleSpec("wigner_sym", {"N": N}, seed, 1))
    A = W + np.eye(N)
    B = W @ W
    U = _haar(rng, N)
    d = rng.uniform(0.5, 2.0, N)
    C = (U * d) @ U.conj().T
    D = (U * d ** 2) @ U.conj().T
    tr = lambda X: np.trace(X).real / N  # noqa: E731
    lhs = tr(A @ C @ B @ D)
    rhs = tr(A) * tr(B) * tr(C @ D) + tr(C) * tr(D) * tr(A @ B) - tr(A) * tr(B) * tr(C) * tr(D)
    return float(lhs), float(rhs)


def median_over_seeds(fn: Callable[[int], float], seeds: Sequence[int]) -> float:
    return float(np.median([fn(s) for s in seeds]))
