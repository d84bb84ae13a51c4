import math

import numpy as np
import pytest
from scipy.optimize import brentq

from rmtlab.cs_replica import (
    CsProblem, DivergenceError, bg_error_terms, coherence_law_cdf, coherence_mc,
    coherence_statistic, cs_residual, l0_exhaustive, l0_oracle_trial, l0_state_evolution,
    scalar_map_l0, sparsity_bound,
)
from rmtlab.mc_lab import make_rng


def test_scalar_map_examples():
    assert scalar_map_l0(1.0, 0.5) == 0.0          # |z| = sqrt(2 lam) is not kept
    assert scalar_map_l0(1.0001, 0.5) == 1.0001
    assert list(scalar_map_l0([-3.0, 0.2], 2.0)) == [-3.0, 0.0]
    with pytest.raises(ValueError):
        scalar_map_l0(1.0, 0.0)


def test_scalar_map_is_the_minimiser():
    lam = 0.7
    x = np.linspace(-4, 4, 80001)
    for z in (-2.0, -0.9, 0.3, 1.1, 1.3, 3.0):
        cost = (z - x) ** 2 / (2 * lam) + (x != 0)
        cost0 = z * z / (2 * lam)
        best = x[np.argmin(cost)] if cost.min() < cost0 else 0.0
        assert scalar_map_l0(z, lam) == pytest.approx(best, abs=1e-4)


def test_error_terms_monte_carlo():
    prob = CsProblem(1.0, 0.01, 0.05, rho=0.2, var=2.0)
    mu, lam = 0.3, 0.4
    rng = make_rng(0)
    n = 400_000
    x = np.where(rng.random(n) < prob.rho, math.sqrt(prob.var) * rng.standard_normal(n), 0.0)
    z = x + math.sqrt(mu) * rng.standard_normal(n)
    xh = scalar_map_l0(z, lam)
    e, p = bg_error_terms(prob, mu, lam)
    assert e == pytest.approx(np.mean((x - xh) ** 2), rel=0.02)
    assert p == pytest.approx(np.mean(xh != 0), rel=0.02)


def test_state_evolution_reference():
    prob = CsProblem(2.0, 0.01, 0.05)
    br = l0_state_evolution(prob, all_branches=True)
    assert len(br) == 2
    st = br[0]
    assert st.mse == pytest.approx(0.005025, rel=1e-3)
    assert st.sigma_eff_sq == pytest.approx(0.02005, rel=1e-3)
    assert st.gamma_p == pytest.approx(0.06036, rel=1e-3)
    assert br[1].mse == pytest.approx(0.007568, rel=1e-3)
    for s in br:
        assert s.converged and cs_residual(prob, s.sigma_eff_sq, s.gamma_p) < 1e-10
    assert st.meta["ansatz"] == "RS"


def test_state_evolution_limits():
    st = l0_state_evolution(CsProblem(0.0, 0.02, 0.05))
    assert st.sigma_eff_sq == 0.02 and st.gamma_p == 0.05
    z = l0_state_evolution(CsProblem(1.0, 0.02, 0.05, rho=0.0))
    assert z.mse == pytest.approx(bg_error_terms(CsProblem(1.0, 0.02, 0.05, rho=0.0),
                                                 z.sigma_eff_sq, z.gamma_p)[0])
    assert z.sigma_eff_sq == pytest.approx(0.02 + z.mse, rel=1e-9)


def test_mse_monotone_in_noise():
    mse = [l0_state_evolution(CsProblem(2.0, s, 0.05)).mse for s in (0.001, 0.002, 0.005, 0.008, 0.01)]
    assert all(b > a for a, b in zip(mse, mse[1:]))


@pytest.mark.parametrize("prob", [CsProblem(50.0, 0.01, 0.05, rho=0.5), CsProblem(2.0, 0.04, 0.05)])
def test_divergence(prob):
    with pytest.raises(DivergenceError):
        l0_state_evolution(prob)


def test_problem_validation():
    with pytest.raises(ValueError):
        CsProblem(1.0, 0.01, 0.0)
    with pytest.raises(ValueError):
        CsProblem(1.0, 0.01, 0.1, scales=(1.0, 2.0), scale_probs=(0.5, 0.4))


def test_exhaustive_vs_brute_force():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((5, 7)) / math.sqrt(5)
    y = rng.standard_normal(5)
    gamma = 0.3
    xh = l0_exhaustive(A, y, gamma)
    cost = lambda x: np.sum((y - A @ x) ** 2) / (2 * gamma) + np.count_nonzero(x)  # noqa: E731
    best = cost(np.zeros(7))
    for mask in range(1, 1 << 7):
        S = [j for j in range(7) if mask >> j & 1]
        if len(S) > 5:
            continue
        x = np.zeros(7)
        x[S] = np.linalg.lstsq(A[:, S], y, rcond=None)[0]
        best = min(best, cost(x))
    assert cost(xh) == pytest.approx(best, rel=1e-10)


def test_oracle_trial_deterministic():
    prob = CsProblem(2.0, 0.01, 0.05)
    assert l0_oracle_trial(prob, 16, 8, 3) == l0_oracle_trial(prob, 16, 8, 3)


def test_coherence_cdfs():
    y = np.linspace(-40, 40, 2001)
    for reg, kw in (("subexp", {}), ("transitional", {"alpha": 0.5}), ("proportional", {"c": 0.3})):
        F = coherence_law_cdf(reg, y, **kw)
        assert np.all(np.diff(F) >= 0)
        assert F[0] < 1e-6 and F[-1] > 1 - 1e-6
    c = 0.3
    k = math.sqrt(c / (2 * math.pi * (1 - math.exp(-4 * c))))
    med = 2 * math.log(math.log(2) / k) - 8 * c
    assert brentq(lambda t: coherence_law_cdf("proportional", t, c=c) - 0.5, -50, 50) == pytest.approx(med)
    with pytest.raises(NotImplementedError):
        coherence_law_cdf("superexp", 0.0)
    with pytest.raises(ValueError):
        coherence_law_cdf("other", 0.0)


def test_coherence_mc():
    a = coherence_mc(20, 30, 5, seed=1)
    assert np.array_equal(a, coherence_mc(20, 30, 5, seed=1))
    assert np.all((a > 0) & (a <= 1))
    # symmetric Gram matrix: the i < j maximum equals the off-diagonal maximum
    H = make_rng(1, 0).standard_normal((30, 20))
    H /= np.linalg.norm(H, axis=0)
    G = np.abs(H.T @ H)
    np.fill_diagonal(G, 0)
    assert a[0] == pytest.approx(G.max(), rel=1e-14)
    with pytest.raises(ValueError):
        coherence_mc(1, 10, 1)


def test_coherence_statistic():
    assert coherence_statistic(0.0, 100, 10) == pytest.approx(4 * math.log(100) - math.log(math.log(100)))


def test_sparsity_bound():
    assert sparsity_bound(100 * math.log(50), 50) == pytest.approx(2.5)
    assert sparsity_bound(10000, 1000) == pytest.approx(9.51, abs=0.005)
    with pytest.raises(ValueError):
        sparsity_bound(10, 1)
