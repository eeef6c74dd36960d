import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from specrule import opuc
from specrule.measures import (
    CIRCLE,
    LINE,
    BinnedMeasure,
    SpectralMeasure,
    bin_levels,
    bin_project,
    cluster_grid,
    entropy_ac,
    integrate_against,
    lebesgue_circle,
    monotone_binned_entropy,
    reversed_kl,
    semicircle,
    weak_distance,
)

LOG43 = math.log(4 / 3)


def bs_half():
    return opuc.bernstein_szego_measure([0.5])


def random_atomic(rng, domain, n):
    pos = rng.uniform(0, 2 * np.pi, n) if domain == CIRCLE else rng.uniform(-3, 3, n)
    w = rng.uniform(0.1, 1, n)
    return SpectralMeasure.atomic(domain, pos, w / w.sum())


# construction -------------------------------------------------------------------------


def test_validation():
    with pytest.raises(ValueError):
        SpectralMeasure.atomic(LINE, [0.0, 0.0], [0.5, 0.5])
    with pytest.raises(ValueError):
        SpectralMeasure.atomic(LINE, [0.0], [0.0])
    with pytest.raises(ValueError):
        SpectralMeasure("sphere")
    with pytest.raises(ValueError):
        SpectralMeasure.atomic(LINE, [0.0], [0.5]).check_mass()


def test_circle_positions_wrapped():
    mu = SpectralMeasure.atomic(CIRCLE, [-np.pi / 2, 2 * np.pi], [0.5, 0.5])
    np.testing.assert_allclose(np.sort(mu.positions), [0.0, 1.5 * np.pi])


def test_masses():
    assert lebesgue_circle().total_mass() == pytest.approx(1.0, abs=1e-13)
    assert semicircle().total_mass() == pytest.approx(1.0, abs=1e-12)
    assert bs_half().total_mass() == pytest.approx(1.0, abs=1e-12)


def test_cluster_grid():
    g = cluster_grid(-2, 2, 16)
    assert g[0] == -2 and g[-1] == 2 and len(g) == 18
    assert np.all(np.diff(g) > 0)
    # Chebyshev clustering: end cells are the smallest
    assert np.diff(g)[0] < np.diff(g)[len(g) // 2] / 10


def test_integrate_semicircle_moments():
    mom = integrate_against(semicircle(), lambda x: np.vstack([x**k for k in range(7)]))
    # Catalan numbers at even orders
    np.testing.assert_allclose(mom, [1, 0, 1, 0, 2, 0, 5], atol=1e-12)


def test_tabulated_density_interpolated():
    x = np.linspace(-1, 1, 101)
    from specrule.measures import ACPart
    mu = SpectralMeasure(LINE, ac=ACPart(x, np.full_like(x, 0.5)))
    assert mu.total_mass() == pytest.approx(1.0, abs=1e-14)


# binning ------------------------------------------------------------------------------


@pytest.mark.parametrize("j", [0, 1, 5, 12])
def test_bin_lebesgue(j):
    b = bin_project(lebesgue_circle(), j)
    np.testing.assert_allclose(b.masses, 2.0**-j, atol=1e-15)


def test_bin_atoms():
    d0 = SpectralMeasure.atomic(CIRCLE, [0.0], [1.0])
    np.testing.assert_array_equal(bin_project(d0, 1).masses, [1.0, 0.0])
    # an atom on an interior edge goes to the bin it opens
    dpi = SpectralMeasure.atomic(CIRCLE, [np.pi], [1.0])
    np.testing.assert_array_equal(bin_project(dpi, 1).masses, [0.0, 1.0])
    np.testing.assert_array_equal(bin_project(dpi, 2).masses, [0.0, 0.0, 1.0, 0.0])


def test_line_overflow():
    mu = SpectralMeasure.atomic(LINE, [-5.0, 0.5, 4.0], [0.25, 0.5, 0.25])
    b = bin_project(mu, 2)
    np.testing.assert_array_equal(b.masses, [0.0, 0.0, 0.5, 0.0])
    assert b.overflow == 0.5
    assert b.all_masses().sum() == 1.0


def test_refinement_consistency():
    rng = np.random.default_rng(0)
    for mu in (bs_half(), random_atomic(rng, CIRCLE, 20), semicircle()):
        levels = bin_levels(mu, 10)
        for j in range(10):
            np.testing.assert_array_equal(levels[j].masses, levels[j + 1].coarsen().masses)
            np.testing.assert_array_equal(bin_project(mu, j).masses, levels[j].masses)


def test_coarsen_children():
    b = BinnedMeasure(2, np.array([0.1, 0.2, 0.3, 0.4]))
    np.testing.assert_allclose(b.coarsen().masses, [0.3, 0.7])


def test_bin_mass_preserved():
    rng = np.random.default_rng(1)
    for mu in (random_atomic(rng, CIRCLE, 50), random_atomic(rng, LINE, 50)):
        for j in (0, 3, 9):
            assert abs(bin_project(mu, j).all_masses().sum() - 1) < 1e-14
    assert abs(bin_project(bs_half(), 8).masses.sum() - 1) < 1e-12


def test_bin_level_cap():
    with pytest.raises(ValueError):
        bin_project(lebesgue_circle(), 21)


# reversed KL --------------------------------------------------------------------------


def test_reversed_kl_examples():
    u = BinnedMeasure(1, np.array([0.5, 0.5]))
    assert reversed_kl(u, u) == 0.0
    assert reversed_kl(u, BinnedMeasure(1, np.array([1.0, 0.0]))) == math.inf
    val = reversed_kl(u, BinnedMeasure(1, np.array([0.25, 0.75])))
    assert val == pytest.approx(0.5 * math.log(4 / 3), abs=1e-15)
    assert val == pytest.approx(0.14384, abs=1e-5)
    # nu empty where mu is empty: no contribution
    assert reversed_kl(BinnedMeasure(1, np.array([1.0, 0.0])),
                       BinnedMeasure(1, np.array([1.0, 0.0]))) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=8, max_size=8),
       st.lists(st.floats(1e-3, 1), min_size=8, max_size=8))
def test_reversed_kl_nonnegative(p, q):
    p = np.array(p)
    if p.sum() == 0:
        p[0] = 1.0
    p, q = p / p.sum(), np.array(q) / np.sum(q)
    val = reversed_kl(BinnedMeasure(3, p), BinnedMeasure(3, q))
    assert val >= -1e-15
    assert reversed_kl(BinnedMeasure(3, q), BinnedMeasure(3, q)) == 0.0


# entropy ------------------------------------------------------------------------------


def test_entropy_examples():
    leb = lebesgue_circle()
    assert abs(entropy_ac(leb, leb)) < 1e-14
    assert abs(entropy_ac(leb, bs_half()) - LOG43) < 1e-10


def test_entropy_atom_shift():
    mu = bs_half()
    with_atom = mu.with_atoms([1.0], [0.3], scale_ac=0.7)
    assert abs(with_atom.total_mass() - 1) < 1e-12
    diff = entropy_ac(lebesgue_circle(), with_atom) - entropy_ac(lebesgue_circle(), mu)
    assert abs(diff + math.log(0.7)) < 1e-10


def test_entropy_infinite_on_gap():
    arc = SpectralMeasure.circle_density(lambda t: np.where(np.asarray(t) < np.pi, 2.0, 0.0))
    assert entropy_ac(lebesgue_circle(), arc) == math.inf
    assert entropy_ac(lebesgue_circle(), SpectralMeasure.atomic(CIRCLE, [0.0], [1.0])) == math.inf


@pytest.mark.parametrize("n", [1, 3, 6])
def test_entropy_bernstein_szego_jensen(n):
    # Jensen: -int log w = -sum log(1 - |alpha_j|^2)
    rng = np.random.default_rng(n)
    alpha = rng.uniform(0, 0.8, n) * np.exp(2j * np.pi * rng.uniform(size=n))
    exact = -math.fsum(np.log1p(-np.abs(alpha) ** 2))
    assert abs(entropy_ac(lebesgue_circle(), opuc.bernstein_szego_measure(alpha)) - exact) < 1e-9


def test_monotone_binned_entropy():
    leb = lebesgue_circle()
    seq = monotone_binned_entropy(leb, bs_half(), 12)
    assert np.all(np.diff(seq) >= -1e-12)
    assert seq[-1] <= LOG43 + 1e-10
    assert LOG43 - seq[-1] < 1e-3
    assert all(v == 0 for v in monotone_binned_entropy(leb, leb, 6))


def test_monotone_binned_entropy_ignores_singular_part():
    leb = lebesgue_circle()
    mu = bs_half()
    mixed = mu.with_atoms([0.7, 2.0], [0.05, 0.05], scale_ac=0.9)
    seq = monotone_binned_entropy(leb, mixed, 14)
    limit = entropy_ac(leb, mixed)
    assert np.all(np.diff(seq) >= -1e-12)
    assert seq[-1] <= limit + 1e-10
    # limit equals that of the pure a.c. measure with the same w
    assert abs(limit - (LOG43 - math.log(0.9))) < 1e-9
    assert limit - seq[-1] < 1e-3


def test_line_binned_entropy_against_semicircle():
    sc = semicircle()
    seq = monotone_binned_entropy(sc, sc, 5)
    assert max(abs(v) for v in seq) < 1e-14


# weak distance ------------------------------------------------------------------------


def test_weak_distance_examples():
    d1 = SpectralMeasure.atomic(CIRCLE, [0.0], [1.0])
    dm1 = SpectralMeasure.atomic(CIRCLE, [np.pi], [1.0])
    assert weak_distance(d1, d1) == 0.0
    assert weak_distance(d1, dm1) == pytest.approx(2.0, abs=1e-14)
    assert weak_distance(lebesgue_circle(), lebesgue_circle()) == 0.0


def test_weak_distance_metric():
    rng = np.random.default_rng(3)
    for domain in (CIRCLE, LINE):
        for _ in range(20):
            a, b, c = (random_atomic(rng, domain, 5) for _ in range(3))
            dab, dbc, dac = weak_distance(a, b), weak_distance(b, c), weak_distance(a, c)
            assert dab == pytest.approx(weak_distance(b, a), abs=1e-15)
            assert dac <= dab + dbc + 1e-14
            assert dab > 0


def test_weak_distance_domain_mismatch():
    with pytest.raises(ValueError):
        weak_distance(lebesgue_circle(), semicircle())
