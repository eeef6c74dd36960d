import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats
from scipy.integrate import quad

from specrule import ldplab as ld
from specrule.measures import CIRCLE, LINE, SpectralMeasure, lebesgue_circle, semicircle
from specrule.rng import RngStream
from specrule.sumrules import ks_F

PHI2 = 1 - math.log(2)


# cgfs and closed forms ----------------------------------------------------------------


def test_cgf_exponential():
    assert ld.cgf_exponential(0.0) == 0.0
    assert ld.cgf_exponential(0.5) == pytest.approx(math.log(2), abs=1e-15)
    assert ld.cgf_exponential(1.0) == math.inf
    assert ld.cgf_exponential(3.0) == math.inf


def test_rate_phi_values():
    assert ld.rate_phi(1.0) == 0.0
    assert ld.rate_phi(2.0) == pytest.approx(PHI2, abs=1e-15)
    assert ld.rate_phi(0.0) == math.inf and ld.rate_phi(-1.0) == math.inf
    assert ld.rate_phi_alpha(3.0, 3.0) == 0.0
    assert ld.rate_phi_alpha(1.0, 2.0) == pytest.approx(2 * math.log(2) - 1, abs=1e-15)
    with pytest.raises(ValueError):
        ld.rate_phi_alpha(1.0, 0.0)


# Legendre transform -----------------------------------------------------------------------


def test_legendre_exponential():
    rf = ld.legendre_transform(ld.cgf_exponential, [1.0, 2.0])
    assert abs(rf.values[0]) < 1e-12
    assert abs(rf.values[1] - PHI2) < 1e-10
    assert abs(rf.argmax[1] - 0.5) < 1e-6
    assert rf.minimizer == 1.0


def test_legendre_exponential_matches_phi():
    x = np.linspace(0.05, 6, 120)
    rf = ld.legendre_transform(ld.cgf_exponential, x)
    np.testing.assert_allclose(rf.values, ld.rate_phi(x), atol=1e-9)
    # argmax is lambda_x = 1 - 1/x, where Lambda'(lambda_x) = x
    np.testing.assert_allclose(rf.argmax, 1 - 1 / x, atol=1e-5)


def test_legendre_exponential_infinite_off_domain():
    rf = ld.legendre_transform(ld.cgf_exponential, [-1.0, 0.0])
    assert np.all(rf.values == math.inf)


def test_legendre_gaussian():
    x = np.linspace(-4, 4, 81)
    rf = ld.legendre_transform(ld.cgf_gaussian, x)
    np.testing.assert_allclose(rf.values, x**2 / 2, atol=1e-9)
    assert rf.minimizer == 0.0


def test_legendre_convex_on_grid():
    x = np.linspace(0.2, 5, 97)
    for cgf in (ld.cgf_exponential, ld.cgf_gaussian):
        v = ld.legendre_transform(cgf, x).values
        assert np.all(v[:-2] + v[2:] - 2 * v[1:-1] >= -1e-9)
        assert np.all(v >= 0)


# Monte Carlo ------------------------------------------------------------------------------


def test_mc_tail_rate_t2():
    est = ld.mc_tail_estimate(RngStream(1), 2.0, [200], 10**5)
    assert abs(est.per_n_rate[0] - PHI2) / PHI2 < 0.1
    assert not est.flagged[0]


def test_mc_tail_extrapolated_rate():
    est = ld.mc_tail_estimate(RngStream(2), 2.0, [25, 50, 100, 200, 400], 10**5)
    assert np.all(np.diff(est.n) > 0) and np.all(np.isfinite(est.stderr))
    assert abs(est.rate - PHI2) < max(0.02, 4 * est.rate_stderr)


def test_mc_tail_lln_regime():
    est = ld.mc_tail_estimate(RngStream(3), 1.0, [50, 100, 200, 400], 10**4)
    assert abs(est.rate) < 0.01


def test_mc_naive_fails_at_large_deviation():
    est = ld.mc_tail_estimate(RngStream(4), 2.0, [200], 10**5, tilt=0.0)
    assert est.log_p_hat[0] == -math.inf
    assert est.flagged[0]


def test_mc_unbiased_against_naive():
    a = ld.mc_tail_estimate(RngStream(5), 1.2, [50], 10**5)
    b = ld.mc_tail_estimate(RngStream(6), 1.2, [50], 10**5, tilt=0.0)
    pa, pb = math.exp(a.log_p_hat[0]), math.exp(b.log_p_hat[0])
    se = math.hypot(pa * a.stderr[0], pb * b.stderr[0])
    assert abs(pa - pb) <= 3 * se


@pytest.mark.parametrize("t, n", [(0.5, 100), (2.0, 50), (3.0, 30)])
def test_mc_matches_exact_gamma_tail(t, n):
    # S_n ~ Gamma(n, 1): exact log tail probabilities
    est = ld.mc_tail_estimate(RngStream(7), t, [n], 10**5)
    g = stats.gamma(n)
    exact = g.logcdf(n * t) if t < 1 else g.logsf(n * t)
    assert abs(math.exp(est.log_p_hat[0] - exact) - 1) <= 3 * est.stderr[0]


def test_mc_independent_of_workers():
    kw = dict(samples=5000, chunk=1000)
    a = ld.mc_tail_estimate(RngStream(8), 1.5, [20, 40], workers=1, **kw)
    b = ld.mc_tail_estimate(RngStream(8), 1.5, [20, 40], workers=4, **kw)
    np.testing.assert_array_equal(a.log_p_hat, b.log_p_hat)
    np.testing.assert_array_equal(a.stderr, b.stderr)


def test_mc_validation():
    with pytest.raises(ValueError):
        ld.mc_tail_estimate(RngStream(0), 2.0, [10, 10], 1000)
    with pytest.raises(ValueError):
        ld.mc_tail_estimate(RngStream(0), 2.0, [10], 1000, tilt=1.0)


# Coulomb energy ---------------------------------------------------------------------------


def F2(t):
    """Second antiderivative of log|t| vanishing at 0."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 0.5 * t * t * np.log(np.abs(t)) - 0.75 * t * t
    return np.where(t == 0, 0.0, out)


def cell_energy(edges, heights):
    """-sum_ij h_i h_j int_{cell i} int_{cell j} log|x - y|, exact per cell pair."""
    a, b = edges[:-1, None], edges[1:, None]
    c, d = edges[None, :-1], edges[None, 1:]
    block = F2(b - c) - F2(a - c) - F2(b - d) + F2(a - d)
    return -float(heights @ block @ heights)


def test_coulomb_uniform_interval_cell_exact():
    mu = SpectralMeasure.line_density(lambda x: np.where(np.abs(x) <= 1, 0.5, 0.0), -1, 1)
    ref = cell_energy(np.array([-1.0, 1.0]), np.array([0.5]))
    assert ref == pytest.approx(1.5 - math.log(2), abs=1e-15)
    assert abs(ld.coulomb_energy(mu) - ref) < 1e-10


def test_coulomb_semicircle_cell_oracle():
    # cell averages of the semicircle, Richardson-extrapolated in the cell width
    vals = []
    for n in (800, 1600):
        edges = np.linspace(-2, 2, n + 1)
        g = lambda x: (x * np.sqrt(4 - x * x) / 2 + 2 * np.arcsin(x / 2)) / (2 * np.pi)
        heights = np.diff(g(edges)) / np.diff(edges)
        vals.append(cell_energy(edges, heights))
    ref = (4 * vals[1] - vals[0]) / 3
    e = ld.coulomb_energy(semicircle())
    assert abs(e - ref) < 1e-6
    assert abs(e - 0.25) < 1e-10


def test_coulomb_circle():
    assert abs(ld.coulomb_energy(lebesgue_circle())) < 1e-14
    w = lambda t: 1 + np.cos(t)
    mu = SpectralMeasure.circle_density(w)

    def inner(t):
        f = lambda s: -math.log(abs(2 * math.sin((t - s) / 2))) * w(s) / (2 * math.pi)
        return quad(f, 0, 2 * math.pi, points=[t], limit=200, epsabs=1e-12)[0]

    ref = quad(lambda t: inner(t) * w(t) / (2 * math.pi), 0, 2 * math.pi, epsabs=1e-10)[0]
    assert abs(ld.coulomb_energy(mu) - ref) < 1e-8
    assert abs(ld.coulomb_energy(mu) - 0.25) < 1e-12


@pytest.mark.parametrize("n", [2, 3, 8, 50])
def test_coulomb_roots_of_unity(n):
    mu = SpectralMeasure.atomic(CIRCLE, 2 * np.pi * np.arange(n) / n, np.full(n, 1 / n))
    assert abs(ld.coulomb_energy(mu, empirical=True) + math.log(n) / n) < 1e-12
    assert ld.coulomb_energy(mu) == math.inf


def test_coulomb_coincident_atoms():
    mu = SpectralMeasure.atomic(LINE, [0.0, 1.0], [0.5, 0.5])
    assert ld.coulomb_energy(mu, empirical=True) == pytest.approx(0.0, abs=1e-15)
    # measures cannot hold coincident atoms; the point-level helper reports +inf
    assert ld._empirical_energy(np.array([0.3, 0.3, 1.0])) == math.inf


def test_coulomb_iid_circle_points_shrink():
    def avg_abs(m):
        out = []
        for s in range(20):
            th = 2 * np.pi * RngStream(90, s).uniform(m)
            mu = SpectralMeasure.atomic(CIRCLE, th, np.full(m, 1 / m))
            out.append(abs(ld.coulomb_energy(mu, empirical=True)))
        return np.mean(out)

    assert avg_abs(256) < avg_abs(64)


# field potential and equilibrium -----------------------------------------------------------


def test_field_potential_matches_ks_F():
    e = np.concatenate([np.linspace(2.001, 6, 40), [2 + 1e-6, 3.0]])
    np.testing.assert_allclose(ld.field_potential_F(e), ks_F(e), atol=1e-6)
    np.testing.assert_allclose(ld.field_potential_F(-e), ld.field_potential_F(e), atol=1e-12)
    assert abs(ld.field_potential_F(3.0) - 0.714634) < 1e-5
    assert abs(ld.field_potential_F(2 + 1e-9)) < 1e-6
    with pytest.raises(ValueError):
        ld.field_potential_F(1.0)


def test_log_potential_quadrature_oracle():
    for x in (-1.3, 0.0, 0.7, 2.5):
        ref = sum(quad(lambda y: math.log(abs(x - y)) * math.sqrt(4 - y * y) / (2 * math.pi),
                       lo, hi, limit=200, epsabs=1e-13)[0]
                  for lo, hi in ((-2, min(x, 2)), (min(x, 2), 2)) if hi > lo)
        assert abs(ld.log_potential(x) - ref) < 1e-9


def test_equilibrium_semicircle():
    assert ld.equilibrium_check() <= 1e-3


def test_equilibrium_perturbed():
    z = quad(lambda x: (1 + 0.1 * x) * math.sqrt(4 - x * x) / (2 * math.pi), -2, 2)[0]

    def dens(x):
        x = np.asarray(x)
        return (1 + 0.1 * x) * np.sqrt(np.clip(4 - x * x, 0, None)) / (2 * np.pi) / z

    assert ld.equilibrium_check(dens) > 1e-2
    with pytest.raises(ValueError):
        ld.equilibrium_check(grid_points=100)


def test_equilibrium_constant_continues_as_F():
    k = np.arange(1, 129)
    x = -2 * np.cos(np.pi * k / 129)
    const = np.mean(x * x / 4 - ld.log_potential(x))
    for e in (2.5, 4.0):
        outside = e * e / 4 - ld.log_potential(e) - const
        assert abs(outside - ld.field_potential_F(e)) < 1e-8


# binned rate ------------------------------------------------------------------------------


def test_binned_rate_examples():
    assert ld.binned_rate([0.25] * 4) == pytest.approx((0.0, 0.0, 0.0), abs=1e-15)
    total, mass, ent = ld.binned_rate([0.25, 0.75])
    assert mass == 0.0
    assert ent == pytest.approx(0.143841, abs=1e-6)
    assert ent == pytest.approx(0.5 * math.log(2) + 0.5 * math.log(2 / 3), abs=1e-15)
    assert abs(total - ent) < 1e-15
    with pytest.raises(ValueError):
        ld.binned_rate([1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        ld.binned_rate([1.0, 0.0])


def test_binned_rate_identity_random():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        j = int(rng.integers(0, 6))
        b = rng.uniform(0.01, 3, 2**j)
        total, mass, ent = ld.binned_rate(b)
        assert abs(total - (mass + ent)) < 1e-12
        # direct sum of phi_{2^-j}
        assert abs(total - float(np.sum(ld.rate_phi_alpha(b, 2.0**-j)))) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.01, 5), min_size=4, max_size=4), st.floats(0.05, 20))
def test_binned_rate_scaling(beta, c):
    t1, m1, e1 = ld.binned_rate(beta)
    t2, m2, e2 = ld.binned_rate(np.array(beta) * c)
    assert abs(e2 - e1) < 1e-12
    tot = sum(beta)
    assert abs((m2 - m1) - (tot * c - tot - math.log(c))) < 1e-10
