import math

import numpy as np
import pytest

from rmtlab.mc_lab import (
    EnsembleSpec, EmpiricalSpectrum, eigenvector_lln, freeness_check, ks_against_cdf,
    ks_distance, make_rng, median_over_seeds, phase_ks, radial_ks, resolvent_trace,
    sample, spectrum,
)
from rmtlab.spectra import (
    UnsupportedLawError, full_circle, law_cdf, law_quantile,
    marchenko_pastur, semicircle,
)
from rmtlab.transforms import stieltjes_of_law


def test_determinism_and_streams():
    a = sample(EnsembleSpec("iid_gaussian", {"N": 50}, seed=4, replicate=2))
    b = sample(EnsembleSpec("iid_gaussian", {"N": 50}, seed=4, replicate=2))
    c = sample(EnsembleSpec("iid_gaussian", {"N": 50}, seed=4, replicate=3))
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)
    assert make_rng(1, 0).random() == make_rng(1, 0).random()


def test_spec_validation():
    with pytest.raises(ValueError):
        EnsembleSpec("nope", {"N": 3})
    with pytest.raises(ValueError):
        EnsembleSpec("wigner_sym", {"N": 0})
    with pytest.raises(ValueError):
        EnsembleSpec("wigner_sym", {"N": 30000})


def test_ensemble_shapes_and_structure():
    W = sample(EnsembleSpec("wigner_sym", {"N": 40}))
    assert np.array_equal(W, W.T)
    U = sample(EnsembleSpec("haar_unitary", {"N": 60}, 1))
    assert np.max(np.abs(U.conj().T @ U - np.eye(60))) < 1e-10
    B = sample(EnsembleSpec("iid_pm1", {"N": 10, "K": 7}))
    assert B.shape == (10, 7) and set(np.unique(np.abs(B) * math.sqrt(10)).round(12)) == {1.0}
    P = sample(EnsembleSpec("product_chain", {"dims": (5, 6, 7)}))
    assert P.shape == (7, 5)
    G = sample(EnsembleSpec("iid_gaussian", {"N": 300, "complex": True}))
    assert np.mean(np.abs(G) ** 2) * 300 == pytest.approx(1, abs=0.02)
    with pytest.raises(ValueError):
        sample(EnsembleSpec("block_gaussian", {"a": 1, "b": 1, "n": 3, "tau": [[-1.0]]}))


def test_wigner_ks():
    emp = spectrum(sample(EnsembleSpec("wigner_sym", {"N": 1000})))
    assert ks_distance(emp, semicircle()) < 0.02


def test_mp_edges_and_atom():
    H = sample(EnsembleSpec("iid_gaussian", {"N": 1000, "K": 500}))
    emp = spectrum(H, "singular_sq")
    assert emp.n == 1000
    assert np.sum(emp.values == 0) == 500
    # edge fluctuations at N = 1000 are a few percent
    assert emp.min_nonzero() == pytest.approx((1 - math.sqrt(0.5)) ** 2, abs=0.01)
    assert emp.values.max() == pytest.approx((1 + math.sqrt(0.5)) ** 2, abs=0.15)
    assert ks_distance(emp, marchenko_pastur(0.5)) < 0.02


def test_unitary_modes_agree():
    U = sample(EnsembleSpec("haar_unitary", {"N": 200}, 5))
    a = spectrum(U, "eig_unitary").values
    b = spectrum(U, "eig_complex").values
    assert np.max(np.min(np.abs(a[:, None] - b[None, :]), axis=1)) < 1e-9
    emp = spectrum(U, "eig_unitary")
    assert phase_ks(emp) < 0.05
    assert np.max(np.abs(np.abs(emp.values) - 1)) < 1e-12


def test_circle_radial():
    emp = spectrum(sample(EnsembleSpec("iid_gaussian", {"N": 600, "complex": True})), "eig_complex")
    assert radial_ks(emp, full_circle()) < 0.05
    with pytest.raises(UnsupportedLawError):
        ks_distance(emp, semicircle())
    with pytest.raises(UnsupportedLawError):
        emp.cdf(0.0)


def test_spectrum_mode_errors():
    with pytest.raises(ValueError):
        spectrum(np.ones((2, 3)), "eig_hermitian")
    with pytest.raises(ValueError):
        spectrum(np.eye(2), "bogus")


def test_ks_of_quantile_sample():
    n = 2000
    u = (np.arange(n) + 0.5) / n
    x = law_quantile(semicircle(), u)
    d = ks_against_cdf(x, lambda t: law_cdf(semicircle(), t))
    assert d == pytest.approx(0.5 / n, abs=1e-6)


def test_empirical_spectrum_helpers():
    emp = EmpiricalSpectrum(np.array([0.0, 1.0, 2.0]), 3)
    assert emp.moment(2) == pytest.approx(5 / 3)
    assert emp.min_nonzero() == 1.0
    assert list(emp.cdf([0.5, 2.0])) == [1 / 3, 1.0]


def test_eigenvector_lln():
    H = sample(EnsembleSpec("iid_gaussian", {"N": 400, "K": 200}))
    x = np.zeros(200)
    x[0] = 1.0
    assert eigenvector_lln(H, x, np.linspace(0, 1, 21)) < 0.1
    with pytest.raises(ValueError):
        eigenvector_lln(H, 2 * x, [0.5])


def test_resolvent_trace_vs_law():
    W = sample(EnsembleSpec("wigner_sym", {"N": 1000}, 2))
    s = 0.5 + 0.5j
    assert resolvent_trace(W, s) == pytest.approx(stieltjes_of_law(semicircle(), s), abs=1e-2)


def test_freeness_relation():
    lhs, rhs = freeness_check(300, seed=1)
    assert lhs == pytest.approx(rhs, rel=0.03)


def test_median_over_seeds():
    assert median_over_seeds(lambda s: float(s), [3, 1, 2]) == 2.0
