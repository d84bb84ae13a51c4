import math

import numpy as np
import pytest

from rmtlab.free_calc import (
    FixedPointConfig, NormalizationError, VarianceProfile, add_convolution_transform,
    add_free_convolve, analytic_mass, free_clt, free_clt_binary_density,
    free_clt_binary_stieltjes, free_clt_transform, free_log_mgf, girko_profile_solve,
    isi_tau, kronecker_pooling, moments_from_transform, mul_convolution_transform,
    mul_free_convolve, operator_valued_mimo, product_chain_s, product_chain_stieltjes,
    rdiagonal_density, silverstein_bai_sum, silverstein_product,
)
from rmtlab.spectra import (
    binary, discrete, inverse_semicircle, law_density, marchenko_pastur, point_mass,
    semicircle,
)
from rmtlab.transforms import (
    MeanZeroUnsupportedError, s_from_stieltjes, stieltjes_of_law, stieltjes_transform,
)


def mid(lo, hi, n=200):
    return lo + (np.arange(n) + 0.5) * (hi - lo) / n


def l1(x, a, b):
    return float(np.sum(np.abs(a - b)) * (x[1] - x[0]))


def test_binary_plus_binary_is_arcsine():
    x = mid(-2, 2)
    d = add_free_convolve(binary(), binary(), x)
    assert l1(x, d.values, law_density(inverse_semicircle(), x)) < 1e-3


def test_shift_by_point_mass():
    G = add_convolution_transform(semicircle(), point_mass(0.7))
    for s in (0.1 + 0.5j, 1.3 + 0.05j):
        assert G.fn(s) == pytest.approx(stieltjes_of_law(semicircle(), s - 0.7), abs=1e-10)


def test_semicircle_plus_semicircle():
    G = add_convolution_transform(semicircle(), semicircle())
    r2 = math.sqrt(2)
    for s in (0.3 + 0.4j, 2.5 + 0.02j):
        # semicircle with variance 2: G(s) = G_1(s/sqrt2)/sqrt2
        assert G.fn(s) == pytest.approx(stieltjes_of_law(semicircle(), s / r2) / r2, abs=1e-10)


def test_mul_dilation_and_commutativity():
    G = mul_convolution_transform(marchenko_pastur(0.5), point_mass(2.0))
    s = 1.0 + 0.3j
    assert G.fn(s) == pytest.approx(stieltjes_of_law(marchenko_pastur(0.5, 2.0), s), abs=1e-9)
    x = mid(0.05, 6.0, 60)
    a = mul_free_convolve(marchenko_pastur(1.0), marchenko_pastur(2.0), x)
    b = mul_free_convolve(marchenko_pastur(2.0), marchenko_pastur(1.0), x)
    assert np.max(np.abs(a.values - b.values)) < 1e-9
    with pytest.raises(MeanZeroUnsupportedError):
        mul_convolution_transform(binary(), marchenko_pastur(1.0))


def test_mul_mp_moments():
    # free multiplicative moments of MP(1) x MP(1) are the Fuss-Catalan numbers 1, 3, 12, 55
    G = mul_convolution_transform(marchenko_pastur(1.0), marchenko_pastur(1.0))
    m = moments_from_transform(G.fn, 4, radius=30.0)
    assert np.allclose(m, [1, 3, 12, 55], rtol=1e-8)


def test_mul_mp_moments_monte_carlo():
    rng = np.random.default_rng(3)
    N = 1000
    H1 = rng.standard_normal((N, N)) / math.sqrt(N)
    H2 = rng.standard_normal((N, N)) / math.sqrt(N)
    M = H1 @ H1.T @ H2 @ H2.T
    P = np.eye(N)
    for k, target in enumerate([1, 3, 12, 55], 1):
        P = P @ M
        assert np.trace(P) / N == pytest.approx(target, rel=0.03)


def test_free_clt():
    x = mid(-math.sqrt(2), math.sqrt(2))
    d = free_clt(binary(), 2, x)
    # n = 2 gives the arcsine law scaled to |x| < sqrt 2
    ref = law_density(inverse_semicircle(), x * math.sqrt(2)) * math.sqrt(2)
    assert l1(x, d.values, ref) < 2e-3
    assert np.allclose(free_clt_binary_density(2, x), ref, rtol=1e-10)
    G = free_clt_transform(binary(), 5)
    for s in (0.2 + 0.3j, 1.7 + 0.01j):
        assert G.fn(s) == pytest.approx(free_clt_binary_stieltjes(5, s), abs=1e-9)
    x = mid(-2.5, 2.5)
    d, cf = free_clt(binary(), 8, x, closed_form=True)
    assert l1(x, d.values, cf) < 1e-3
    with pytest.raises(ValueError):
        free_clt_transform(marchenko_pastur(1.0), 4)


def test_free_clt_n1_atoms():
    G = free_clt_transform(binary(), 1)
    assert G.fn(1 + 1e-4j).imag * 1e-4 == pytest.approx(0.5, abs=1e-3)


def test_analytic_mass():
    assert analytic_mass(lambda s: stieltjes_of_law(semicircle(), s)) == pytest.approx(1, abs=1e-10)
    with pytest.raises(NormalizationError):
        from rmtlab.free_calc import _check_mass
        _check_mass(lambda s: 2 * stieltjes_of_law(semicircle(), s), "x")


def test_silverstein_product():
    beta = 0.5
    s = 0.8 + 0.4j
    G = silverstein_product(point_mass(1.0), beta, s)
    # with unit-variance columns the fixed point is MP with ratio 1/beta and scale beta
    assert G == pytest.approx(stieltjes_of_law(marchenko_pastur(1 / beta, beta), s), abs=1e-9)
    assert silverstein_product(point_mass(0.0), beta, s) == pytest.approx(-1 / s, abs=1e-12)
    # against the multiplicative convolution with the same Wishart factor
    PX = discrete([1, 3], [0.5, 0.5])
    Gm = mul_convolution_transform(marchenko_pastur(1 / beta, beta), PX)
    assert silverstein_product(PX, beta, s) == pytest.approx(Gm.fn(s), abs=1e-9)


def test_silverstein_bai_and_kronecker():
    beta, s = 0.5, 0.4 + 0.6j
    G = silverstein_bai_sum(lambda z: -1 / z, point_mass(1.0), beta, s)
    assert G == pytest.approx(stieltjes_of_law(marchenko_pastur(beta), s), abs=1e-9)
    GX = stieltjes_transform(semicircle())
    assert silverstein_bai_sum(GX, point_mass(0.0), beta, s) == pytest.approx(GX.fn(s), abs=1e-12)
    PY = discrete([1, 2], [0.5, 0.5])
    assert kronecker_pooling(PY, beta, 1, s) == pytest.approx(
        silverstein_bai_sum(lambda z: -1 / z, PY, beta, s), abs=1e-12)
    assert kronecker_pooling(PY, 1.0, 2, s) == pytest.approx(kronecker_pooling(PY, 0.5, 1, s), abs=1e-12)
    assert kronecker_pooling(point_mass(1.0), 1.0, 2, 1j) == pytest.approx(
        stieltjes_of_law(marchenko_pastur(0.5), 1j), abs=1e-9)


def test_girko():
    s = 0.7 + 0.3j
    x, u, G = girko_profile_solve(VarianceProfile(lambda a, b: 1.0 + 0 * a * b, 0.5), s)
    assert np.ptp(u.real) < 1e-12 and np.ptp(u.imag) < 1e-12
    assert G == pytest.approx(stieltjes_of_law(marchenko_pastur(0.5), s), abs=1e-9)
    _, _, G0 = girko_profile_solve(VarianceProfile(lambda a, b: 0 * a * b, 1.0), s)
    assert G0 == pytest.approx(-1 / s, abs=1e-12)


def test_product_chain():
    assert product_chain_s([0.5, 1.0], 0.3) == pytest.approx(1 / (0.3 + 0.5))
    assert product_chain_s([1, 1, 1], 1.0) == pytest.approx(0.25)
    # N = 1 agrees with the S-transform of MP(chi)
    G = stieltjes_transform(marchenko_pastur(0.5))
    assert product_chain_s([0.5, 1.0], 0.3) == pytest.approx(s_from_stieltjes(G, 0.3), abs=1e-10)
    s = 0.9 + 0.2j
    assert product_chain_stieltjes([0.5, 1.0], s) == pytest.approx(
        stieltjes_of_law(marchenko_pastur(0.5), s), abs=1e-10)
    y = 1e6
    assert (-1j * y * product_chain_stieltjes([1, 1, 1], 1j * y)).real == pytest.approx(1, abs=1e-6)
    with pytest.raises(ValueError):
        product_chain_s([1.0, 0.5], 0.1)


def test_free_log_mgf():
    assert free_log_mgf([0, 0], lambda w: w) == 0
    assert free_log_mgf([2.0], lambda w: w) == pytest.approx(2.0)
    assert free_log_mgf([0.5], lambda w: 1 / (1 - w)) == pytest.approx(math.log(2))


def test_operator_valued_trivial_cases():
    c = 0.8
    z = 1.1 + 0.3j
    _, G = operator_valued_mimo(np.full((1, 1, 1, 1), c), 1, 1, z)
    assert G == pytest.approx(stieltjes_of_law(marchenko_pastur(1.0, c / 2), z), abs=1e-9)
    G1, G = operator_valued_mimo(np.zeros((2, 2, 2, 2)), 2, 2, z)
    assert np.allclose(G1, np.eye(2) / z)
    assert G == pytest.approx(-1 / z)


def test_operator_valued_isi_monte_carlo():
    from rmtlab.mc_lab import EnsembleSpec, sample
    tau = isi_tau(2)
    H = sample(EnsembleSpec("block_gaussian", {"a": 2, "b": 2, "n": 400, "tau": tau}, 7))
    lam = np.linalg.eigvalsh(H @ H.conj().T)
    for z in (0.5 + 0.2j, 1.5 + 0.2j):
        _, G = operator_valued_mimo(tau, 2, 2, z)
        assert G == pytest.approx(np.mean(1 / (lam - z)), abs=1e-2)


def test_rdiagonal():
    f = lambda z: 1 / (1 + z)  # noqa: E731
    assert rdiagonal_density(f, 0.5) == pytest.approx(1 / math.pi, rel=1e-6)
    assert rdiagonal_density(f, 1.2) == 0.0
    f2 = lambda z: 1 / (1 + z) ** 2  # noqa: E731
    for r in (0.3, 0.7):
        assert rdiagonal_density(f2, r) == pytest.approx(1 / (2 * math.pi * r), rel=1e-5)


def test_fixed_point_config_validation():
    with pytest.raises(ValueError):
        FixedPointConfig(tol=0)
    with pytest.raises(ValueError):
        FixedPointConfig(damping=1.5)
