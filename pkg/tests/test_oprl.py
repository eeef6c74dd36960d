import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import eigh_tridiagonal

from specrule import oprl
from specrule.measures import LINE, SpectralMeasure, semicircle, semicircle_density


def random_jacobi(rng, n):
    return oprl.JacobiParams(rng.uniform(0.3, 2.0, n - 1), rng.normal(0, 1, n))


def random_perturbation(rng, rmax=5):
    r = int(rng.integers(1, rmax + 1))
    return oprl.FiniteRankPerturbation(rng.uniform(0.5, 2.0, r), rng.normal(0, 1.2, r))


def test_params_validation():
    with pytest.raises(ValueError):
        oprl.JacobiParams([0.0], [0, 0])
    with pytest.raises(ValueError):
        oprl.JacobiParams([1.0, 1.0], [0, 0])
    p = oprl.FiniteRankPerturbation(b=[1.5])
    assert p.r == 1 and p.a[0] == 1.0
    p = oprl.FiniteRankPerturbation(a=[0.5, 2.0], b=[1.0])
    np.testing.assert_array_equal(p.b, [1.0, 0.0])


def test_free_polynomials_are_chebyshev_u():
    j = oprl.JacobiParams(np.ones(7), np.zeros(8))
    theta = np.array([0.3, 1.1, 2.5])
    p = oprl.p_eval(j, 2 * np.cos(theta), 8)
    k = np.arange(9)[:, None]
    np.testing.assert_allclose(p, np.sin((k + 1) * theta) / np.sin(theta), atol=1e-12)
    assert np.all(p[0] == 1.0)
    with pytest.raises(IndexError):
        oprl.p_eval(j, 0.0, 9)


@pytest.mark.parametrize("n", range(1, 7))
def test_gram_matrix(n):
    rng = np.random.default_rng(n)
    j = random_jacobi(rng, n)
    mu = oprl.jacobi_to_measure(j)
    p = oprl.p_eval(j, mu.positions, n - 1)
    np.testing.assert_allclose((p * mu.weights) @ p.T, np.eye(n), atol=1e-9)


def test_jacobi_to_measure_small():
    mu = oprl.jacobi_to_measure(oprl.JacobiParams([], [0.7]))
    assert mu.positions[0] == 0.7 and mu.weights[0] == 1.0
    mu = oprl.jacobi_to_measure(oprl.JacobiParams([1.0], [0.0, 0.0]))
    np.testing.assert_allclose(mu.positions, [-1, 1], atol=1e-15)
    np.testing.assert_allclose(mu.weights, [0.5, 0.5], atol=1e-15)


@pytest.mark.parametrize("n", range(1, 13))
def test_round_trip(n):
    rng = np.random.default_rng(40 + n)
    for _ in range(10):
        j = random_jacobi(rng, n)
        mu = oprl.jacobi_to_measure(j)
        assert abs(mu.weights.sum() - 1) < 1e-10
        back = oprl.measure_to_jacobi(mu, n)
        np.testing.assert_allclose(back.b, j.b, atol=1e-9)
        np.testing.assert_allclose(back.a, j.a, atol=1e-9)


def test_measure_to_jacobi_examples():
    j = oprl.measure_to_jacobi(SpectralMeasure.atomic(LINE, [0.0], [1.0]), 1)
    np.testing.assert_array_equal(j.b, [0.0])
    j = oprl.measure_to_jacobi(SpectralMeasure.atomic(LINE, [-1.0, 1.0], [0.5, 0.5]), 2)
    np.testing.assert_allclose(j.b, [0, 0], atol=1e-15)
    np.testing.assert_allclose(j.a, [1], atol=1e-15)
    j = oprl.measure_to_jacobi(semicircle(), 6)
    np.testing.assert_allclose(j.a, 1, atol=1e-8)
    np.testing.assert_allclose(j.b, 0, atol=1e-8)
    with pytest.raises(ValueError):
        oprl.measure_to_jacobi(SpectralMeasure.atomic(LINE, [0.0], [1.0]), 2)


def test_eigensolve_examples():
    vals, comp = oprl.tridiag_eigensolve(oprl.JacobiParams([1.0], [0.0, 0.0]))
    np.testing.assert_allclose(vals, [-1, 1], atol=1e-15)
    np.testing.assert_allclose(comp, [0.5, 0.5], atol=1e-15)
    vals, comp = oprl.tridiag_eigensolve(oprl.JacobiParams([1e-300, 1e-300], [3.0, 1.0, 2.0]))
    np.testing.assert_allclose(np.sort(vals), [1, 2, 3])
    # the first-component weight concentrates on the b_1 eigenvalue
    assert comp[np.argmin(np.abs(vals - 3.0))] == pytest.approx(1.0)


@pytest.mark.parametrize("n", range(1, 9))
def test_eigensolve_moments(n):
    rng = np.random.default_rng(60 + n)
    j = random_jacobi(rng, n)
    vals, comp = oprl.tridiag_eigensolve(j)
    assert abs(comp.sum() - 1) < 1e-10
    jm = j.matrix()
    v = np.eye(n)[0]
    for k in range(7):
        np.testing.assert_allclose(np.sum(comp * vals**k), v @ np.linalg.matrix_power(jm, k) @ v,
                                   atol=1e-10 * max(1, np.linalg.norm(jm, 2) ** k))


def test_eigenvalues_are_roots_of_p_n():
    rng = np.random.default_rng(5)
    for n in range(2, 10):
        j = random_jacobi(rng, n)
        vals, _ = oprl.tridiag_eigensolve(j)
        grid = np.linspace(vals.min(), vals.max(), 2001)
        scale = np.max(np.abs(oprl.p_eval(j, grid, n)[n]))
        assert np.max(np.abs(oprl.p_eval(j, vals, n)[n])) <= 1e-8 * scale
        np.testing.assert_allclose(vals, np.linalg.eigvalsh(j.matrix()), atol=1e-12 * np.abs(vals).max())


def test_christoffel_matches_first_components():
    rng = np.random.default_rng(8)
    j = random_jacobi(rng, 9)
    _, comp = oprl.tridiag_eigensolve(j)
    np.testing.assert_allclose(oprl.jacobi_to_measure(j).weights, comp, atol=1e-12)


# free m-function ------------------------------------------------------------------


def test_free_m_values():
    assert oprl.free_m_function(3.0).real == pytest.approx((-3 + np.sqrt(5)) / 2, abs=1e-15)
    z = 1e6 * np.exp(0.7j)
    assert abs(oprl.free_m_function(z) / (-1 / z) - 1) < 1e-9
    with pytest.raises(ValueError):
        oprl.free_m_function(1.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 5), st.floats(1e-3, 5))
def test_free_m_fixed_point(x, y):
    z = complex(x, y)
    m = oprl.free_m_function(z)
    assert abs(m - 1 / (-z - m)) <= 1e-12 * max(1, abs(m))
    assert m.imag > 0


def test_free_m_is_semicircle_stieltjes_transform():
    from specrule.measures import integrate_against
    z = 0.4 + 0.9j
    val = integrate_against(semicircle(), lambda x: 1 / (x - z))
    assert abs(val - oprl.free_m_function(z)) < 1e-11


# finite-rank perturbations ----------------------------------------------------------------


def test_free_case_density():
    d = oprl.perturbed_spectral_data(oprl.FiniteRankPerturbation())
    assert len(d.eigenvalues) == 0
    x = np.linspace(-1.99, 1.99, 101)
    np.testing.assert_allclose(d.density(x), semicircle_density(x), atol=1e-14)


def test_single_site_eigenvalue():
    d = oprl.perturbed_spectral_data(oprl.FiniteRankPerturbation(b=[1.5]))
    np.testing.assert_allclose(d.eigenvalues, [1.5 + 1 / 1.5], atol=1e-12)
    # weight 1 - 1/b^2 for a single diagonal perturbation
    np.testing.assert_allclose(d.weights, [1 - 1 / 1.5**2], atol=1e-12)


def test_perturbed_normalization():
    rng = np.random.default_rng(9)
    for _ in range(10):
        d = oprl.perturbed_spectral_data(random_perturbation(rng))
        assert np.all(d.values >= 0)
        assert abs(d.measure().total_mass() - 1) < 1e-8


def test_perturbed_matches_large_truncation():
    rng = np.random.default_rng(10)
    for _ in range(10):
        p = random_perturbation(rng)
        d = oprl.perturbed_spectral_data(p)
        j = p.truncation(2000)
        vals, vecs = eigh_tridiagonal(j.b, j.a)
        out = np.abs(vals) > 2
        np.testing.assert_allclose(d.eigenvalues, vals[out], atol=1e-6)
        np.testing.assert_allclose(d.weights, vecs[0, out] ** 2, atol=1e-10)


def test_residue_by_finite_difference():
    p = oprl.FiniteRankPerturbation(a=[1.3, 0.8], b=[1.0, -2.5])
    d = oprl.perturbed_spectral_data(p)
    assert len(d.eigenvalues) >= 1
    for e, w in zip(d.eigenvalues, d.weights):
        assert oprl.residue_weight(p, e) == pytest.approx(w, rel=1e-7)


def test_m_function_matches_spectral_measure():
    p = oprl.FiniteRankPerturbation(a=[1.3, 0.8], b=[1.0, -2.5])
    mu = oprl.perturbed_spectral_data(p).measure()
    from specrule.measures import integrate_against
    for z in (3.5 + 0.5j, -0.3 + 1.2j):
        val = integrate_against(mu, lambda x: 1 / (x - z))
        assert abs(val - oprl.continued_fraction_m(p, z)) < 1e-10
