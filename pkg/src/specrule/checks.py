"""The invariant suite behind ``specrule check all``.

Each check exercises one documented invariant on fixed-seed random
instances and reports the worst deviation found. Numerical tolerances are
multiplied by ``tol_scale``; statistical thresholds (KS levels, sigma
bands) are fixed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats
from scipy.integrate import quad

from . import ensembles as ens
from . import ldplab, oprl, opuc, serialize, sumrules
from .errors import NumericalError
from .measures import (CIRCLE, SpectralMeasure, bin_project, entropy_ac, lebesgue_circle,
                       monotone_binned_entropy, reversed_kl, semicircle, BinnedMeasure)
from .rng import RngStream

KS_1PCT = 1.63


@dataclass
class CheckResult:
    name: str
    module: str
    passed: bool
    value: float
    limit: float
    seconds: float
    error: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        msg = self.error or f"worst {self.value:.3g} (limit {self.limit:.3g})"
        return f"{status}  {self.module:<10} {self.name:<44} {msg}  [{self.seconds:.1f}s]"


_CHECKS: list[tuple[str, str, Callable]] = []


def check(module, name):
    def deco(fn):
        _CHECKS.append((module, name, fn))
        return fn
    return deco


def _unit_disc(rng, n, rmax=0.9):
    return rng.uniform(0, rmax, n) * np.exp(2j * np.pi * rng.uniform(size=n))


def _terminated(rng, n):
    a = _unit_disc(rng, n, 0.95)
    a[-1] = np.exp(2j * np.pi * rng.uniform())
    return opuc.VerblunskySeq(a, opuc.TERMINATED)


# opuc ---------------------------------------------------------------------------------


@check("opuc", "verblunsky <-> measure round trip (N <= 12)")
def _opuc_round_trip(s):
    rng, worst = np.random.default_rng(100), 0.0
    for n in range(1, 13):
        for _ in range(5):
            a = _terminated(rng, n)
            back = opuc.measure_to_verblunsky(opuc.verblunsky_to_measure(a), n)
            worst = max(worst, float(np.max(np.abs(back.coeffs - a.coeffs))))
    return worst, 1e-9 * s


@check("opuc", "Christoffel weights positive, sum to 1")
def _opuc_weights(s):
    rng, worst = np.random.default_rng(101), 0.0
    for n in range(1, 13):
        mu = opuc.verblunsky_to_measure(_terminated(rng, n))
        if np.any(mu.weights <= 0):
            return math.inf, 1e-10 * s
        worst = max(worst, abs(math.fsum(mu.weights) - 1))
    return worst, 1e-10 * s


@check("opuc", "structured matrices unitary, CMV sparsity")
def _opuc_structured(s):
    rng, worst = np.random.default_rng(102), 0.0
    for _ in range(40):
        a = _terminated(rng, int(rng.integers(1, 11)))
        for which in ("L", "M", "CMV", "AltCMV", "GGT"):
            worst = max(worst, opuc.unitarity_defect(opuc.build_structured(a, which)))
        c = opuc.build_structured(a, "CMV")
        if np.any(c[~opuc.cmv_sparsity_mask(len(a))] != 0):
            return math.inf, 1e-12 * s
    return worst, 1e-12 * s


@check("opuc", "CMV and GGT factorization residuals")
def _opuc_factorization(s):
    rng, worst = np.random.default_rng(103), 0.0
    for _ in range(100):
        a = _terminated(rng, int(rng.integers(2, 11)))
        worst = max(worst, opuc.check_cmv_factorization(a, "CMV"),
                    opuc.check_cmv_factorization(a, "GGT"))
    return worst, 1e-12 * s


@check("opuc", "coefficient stripping shifts the sequence")
def _opuc_strip(s):
    rng, worst = np.random.default_rng(104), 0.0
    stream = RngStream(104)
    for _ in range(100):
        n = int(rng.integers(2, 9))
        at = complex(_unit_disc(rng, 1, 0.95)[0])
        up = ens.sample_haar_unitary(stream, n - 1)
        full = opuc.unitary_verblunsky(opuc.compose_theta(at, up)).coeffs
        tail = opuc.unitary_verblunsky(up).coeffs if n > 2 else [np.conj(up[0, 0])]
        worst = max(worst, float(np.max(np.abs(full - np.concatenate([[at], tail])))))
    return worst, 1e-9 * s


@check("opuc", "sigma(f) is an involution (real f_1)")
def _opuc_sigma(s):
    # Theta(beta) squares to I only for real beta, so f_1 is rotated onto the axis
    stream, worst = RngStream(105), 0.0
    for n in range(2, 9):
        for _ in range(10):
            f = ens.sample_sphere(stream, n)
            f[0] = abs(f[0])
            sg = opuc.sigma(f)
            worst = max(worst, float(np.max(np.abs(sg @ sg - np.eye(n)))))
    return worst, 1e-12 * s


# oprl ---------------------------------------------------------------------------------


def _jacobi(rng, n):
    return oprl.JacobiParams(rng.uniform(0.3, 2.0, n - 1), rng.normal(0, 1, n))


@check("oprl", "jacobi <-> measure round trip (n <= 12)")
def _oprl_round_trip(s):
    rng, worst = np.random.default_rng(110), 0.0
    for n in range(1, 13):
        for _ in range(5):
            j = _jacobi(rng, n)
            back = oprl.measure_to_jacobi(oprl.jacobi_to_measure(j), n)
            worst = max(worst, float(np.max(np.abs(back.b - j.b), initial=0.0)),
                        float(np.max(np.abs(back.a - j.a), initial=0.0)))
    return worst, 1e-9 * s


@check("oprl", "perturbed spectral data: mass 1, w >= 0")
def _oprl_mass(s):
    rng, worst = np.random.default_rng(111), 0.0
    for _ in range(8):
        r = int(rng.integers(1, 4))
        d = oprl.perturbed_spectral_data(
            oprl.FiniteRankPerturbation(rng.uniform(0.5, 2, r), rng.normal(0, 1.2, r)))
        if np.any(d.values < 0):
            return math.inf, 1e-8 * s
        worst = max(worst, abs(d.measure().total_mass() - 1))
    return worst, 1e-8 * s


@check("oprl", "eigenvalues match size-2000 truncation")
def _oprl_truncation(s):
    from scipy.linalg import eigh_tridiagonal
    rng, worst = np.random.default_rng(112), 0.0
    for _ in range(5):
        r = int(rng.integers(1, 4))
        p = oprl.FiniteRankPerturbation(rng.uniform(0.5, 2, r), rng.normal(0, 1.5, r))
        d = oprl.perturbed_spectral_data(p)
        j = p.truncation(2000)
        vals = eigh_tridiagonal(j.b, j.a, eigvals_only=True)
        out = vals[np.abs(vals) > 2]
        if len(out) != len(d.eigenvalues):
            return math.inf, 1e-6 * s
        worst = max(worst, float(np.max(np.abs(np.sort(out) - np.sort(d.eigenvalues)),
                                        initial=0.0)))
    return worst, 1e-6 * s


@check("oprl", "eigenvalues are zeros of p_n")
def _oprl_roots(s):
    rng, worst = np.random.default_rng(113), 0.0
    for n in range(2, 10):
        j = _jacobi(rng, n)
        vals, _ = oprl.tridiag_eigensolve(j)
        grid = np.linspace(vals.min(), vals.max(), 2001)
        scale = np.max(np.abs(oprl.p_eval(j, grid, n)[n]))
        worst = max(worst, float(np.max(np.abs(oprl.p_eval(j, vals, n)[n])) / scale))
    return worst, 1e-8 * s


# measures -------------------------------------------------------------------------------


def _random_circle_atomic(rng, n):
    w = rng.uniform(0.1, 1, n)
    return SpectralMeasure.atomic(CIRCLE, rng.uniform(0, 2 * np.pi, n), w / w.sum())


@check("measures", "binning preserves mass, refines consistently")
def _measures_binning(s):
    rng, worst = np.random.default_rng(120), 0.0
    for _ in range(10):
        mu = _random_circle_atomic(rng, 30)
        for j in (0, 4, 9):
            b = bin_project(mu, j)
            worst = max(worst, abs(b.masses.sum() - 1))
            if not np.array_equal(bin_project(mu, j + 1).coarsen().masses, b.masses):
                return math.inf, 1e-14 * s
    return worst, 1e-14 * s


@check("measures", "reversed KL nonnegative, zero on equal input")
def _measures_kl(s):
    rng, worst = np.random.default_rng(121), 0.0
    for _ in range(500):
        p, q = rng.dirichlet(np.ones(8)), rng.dirichlet(np.ones(8))
        worst = max(worst, -reversed_kl(BinnedMeasure(3, p), BinnedMeasure(3, q)))
        worst = max(worst, abs(reversed_kl(BinnedMeasure(3, p), BinnedMeasure(3, p))))
    return max(worst, 0.0), 1e-15 * s


@check("measures", "binned entropy monotone, bounded by entropy")
def _measures_monotone(s):
    rng, worst = np.random.default_rng(122), 0.0
    leb = lebesgue_circle()
    for _ in range(5):
        mu = opuc.bernstein_szego_measure(_unit_disc(rng, int(rng.integers(1, 4)), 0.7))
        seq = np.array(monotone_binned_entropy(leb, mu, 12))
        limit = entropy_ac(leb, mu)
        worst = max(worst, float(np.max(-np.diff(seq))), seq[-1] - limit)
    return max(worst, 0.0), 1e-10 * s


@check("measures", "entropy ignores singular part")
def _measures_singular(s):
    leb, mu = lebesgue_circle(), opuc.bernstein_szego_measure([0.5])
    mixed = mu.with_atoms([1.0, 4.0], [0.2, 0.1], scale_ac=0.7)
    return abs(entropy_ac(leb, mixed) - entropy_ac(leb, mu) + math.log(0.7)), 1e-9 * s


# sum rules ------------------------------------------------------------------------------


@check("sumrules", "Szego-Verblunsky equality (n <= 8)")
def _sr_szego(s):
    rng, worst = np.random.default_rng(130), 0.0
    for _ in range(30):
        rep = sumrules.szego_report(_unit_disc(rng, int(rng.integers(1, 9))))
        if rep.min_term() < -1e-12:
            return math.inf, 1e-7 * s
        worst = max(worst, abs(rep.difference))
    return worst, 1e-7 * s


@check("sumrules", "Killip-Simon equality (r <= 3)")
def _sr_ks(s):
    rng, worst = np.random.default_rng(131), 0.0
    for _ in range(10):
        r = int(rng.integers(1, 4))
        rep = sumrules.ks_report(
            oprl.FiniteRankPerturbation(rng.uniform(0.5, 2, r), rng.uniform(-2, 2, r)))
        if rep.min_term() < -1e-12:
            return math.inf, 1e-5 * s
        worst = max(worst, abs(rep.difference))
    return worst, 1e-5 * s


@check("sumrules", "G(a) = phi(a^2)")
def _sr_g(s):
    a = np.linspace(0.05, 4, 400)
    return float(np.max(np.abs(sumrules.ks_G(a) - ldplab.rate_phi(a * a)))), 1e-12 * s


@check("sumrules", "F closed form matches quadrature on [2, 10]")
def _sr_f(s):
    worst = abs(float(sumrules.ks_F(2.0)))
    for e in np.linspace(2.0, 10.0, 41)[1:]:
        ref = quad(lambda x: 0.5 * math.sqrt(max(x * x - 4, 0.0)), 2, e,
                   epsabs=1e-13, epsrel=1e-13)[0]
        worst = max(worst, abs(float(sumrules.ks_F(e)) - ref), abs(float(sumrules.ks_F(-e)) - ref))
    return worst, 1e-10 * s


@check("sumrules", "Q = H(nu0 | mu) / 2")
def _sr_q(s):
    rng, worst = np.random.default_rng(132), 0.0
    for _ in range(3):
        r = int(rng.integers(1, 3))
        d = oprl.perturbed_spectral_data(
            oprl.FiniteRankPerturbation(rng.uniform(0.7, 1.4, r), rng.uniform(-0.5, 0.5, r)))
        worst = max(worst, abs(sumrules.ks_Q(d) - 0.5 * entropy_ac(semicircle(), d.measure())))
    return worst, 1e-7 * s


# ensembles ------------------------------------------------------------------------------


@check("ensembles", "samplers are deterministic per stream")
def _ens_determinism(s):
    for kind in (ens.CUE_ALPHA, ens.CUE_MEASURE, ens.GUE_JACOBI, ens.HAAR_UNITARY):
        a = serialize.dumps(ens.sample(kind, 7, 3, 5))
        b = serialize.dumps(ens.sample(kind, 7, 3, 5))
        if a != b:
            return math.inf, 0.0
    return 0.0, 0.0


@check("ensembles", "sample payloads satisfy their invariants")
def _ens_payloads(s):
    stream, worst = RngStream(140), 0.0
    for n in (1, 2, 5, 12):
        worst = max(worst, opuc.unitarity_defect(ens.sample_haar_unitary(stream, n)))
        a = ens.sample_cue_verblunsky(stream, n)
        worst = max(worst, abs(abs(a.coeffs[-1]) - 1))
        mu = ens.sample_cue_spectral_measure(stream, n)
        worst = max(worst, abs(math.fsum(mu.weights) - 1))
    return worst, 1e-12 * s


@check("ensembles", "Haar and CUE Verblunsky laws agree (n = 3, 5)")
def _ens_cross(s):
    worst_ratio = 0.0
    for n in (3, 5):
        stream, m = RngStream(141, n), 3000
        haar = np.array([opuc.unitary_verblunsky(ens.sample_haar_unitary(stream, n)).coeffs
                         for _ in range(m)])
        cue = np.array([ens.sample_cue_verblunsky(stream, n).coeffs for _ in range(m)])
        for j in range(n - 1):
            stat = stats.ks_2samp(np.abs(haar[:, j]), np.abs(cue[:, j])).statistic
            # two-sample 1% critical value
            crit = KS_1PCT * math.sqrt(2.0 / m)
            worst_ratio = max(worst_ratio, stat / crit)
    return worst_ratio, 1.0


@check("ensembles", "GUE spectrum approaches the semicircle")
def _ens_semicircle(s):
    stream = RngStream(142)
    ev = np.concatenate([oprl.tridiag_eigensolve(ens.sample_gue_jacobi(stream, 200))[0]
                         for _ in range(20)])

    def cdf(x):
        x = np.clip(x, -2, 2)
        return 0.5 + (x * np.sqrt(4 - x * x) / 2 + 2 * np.arcsin(x / 2)) / (2 * np.pi)

    return float(stats.kstest(ev, cdf).statistic), 0.05


# ldplab -------------------------------------------------------------------------------


@check("ldplab", "Legendre transform convex, zero at the mean")
def _ld_legendre(s):
    x = np.linspace(0.2, 5, 97)
    rf = ldplab.legendre_transform(ldplab.cgf_exponential, x)
    v = rf.values
    conv = float(np.max(-(v[:-2] + v[2:] - 2 * v[1:-1])))
    at_mean = float(ldplab.legendre_transform(ldplab.cgf_exponential, [1.0]).values[0])
    return max(conv, abs(at_mean), 0.0), 1e-9 * s


@check("ldplab", "tilted and naive tail estimates agree")
def _ld_unbiased(s):
    a = ldplab.mc_tail_estimate(RngStream(150), 1.2, [50], 50000)
    b = ldplab.mc_tail_estimate(RngStream(151), 1.2, [50], 50000, tilt=0.0)
    pa, pb = math.exp(a.log_p_hat[0]), math.exp(b.log_p_hat[0])
    se = math.hypot(pa * a.stderr[0], pb * b.stderr[0])
    return abs(pa - pb) / se, 3.0


@check("ldplab", "binned rate decomposition identity")
def _ld_binned(s):
    rng, worst = np.random.default_rng(152), 0.0
    for _ in range(1000):
        total, mass, ent = ldplab.binned_rate(rng.uniform(0.01, 3, 2 ** int(rng.integers(0, 6))))
        worst = max(worst, abs(total - mass - ent))
    return worst, 1e-12 * s


@check("ldplab", "field potential equals Killip-Simon F")
def _ld_field(s):
    e = np.linspace(2.04, 6, 100)
    return float(np.max(np.abs(ldplab.field_potential_F(e) - sumrules.ks_F(e)))), 1e-6 * s


@check("ldplab", "iid circle energy shrinks with m")
def _ld_coulomb(s):
    def avg(m):
        vals = []
        for k in range(10):
            th = 2 * np.pi * RngStream(153, k).uniform(m)
            mu = SpectralMeasure.atomic(CIRCLE, th, np.full(m, 1.0 / m))
            vals.append(abs(ldplab.coulomb_energy(mu, empirical=True)))
        return float(np.mean(vals))

    # ratio < 1 means the energy at m = 256 is closer to 0 than at m = 64
    return avg(256) / avg(64), 1.0


# serialization --------------------------------------------------------------------------


@check("cli", "JSON artifacts round-trip bit-identically")
def _cli_round_trip(s):
    stream = RngStream(160)
    objs = [ens.sample_cue_verblunsky(stream, 5), ens.sample_haar_unitary(stream, 3),
            ens.sample_gue_jacobi(stream, 6), oprl.FiniteRankPerturbation([1.3], [0.4]),
            ens.sample_cue_spectral_measure(stream, 4), opuc.bernstein_szego_measure([0.5]),
            sumrules.szego_report([0.5]), ens.sample(ens.GUE_MEASURE, 4, 1)]
    for o in objs:
        text = serialize.dumps(o)
        if serialize.dumps(serialize.loads(text)) != text:
            return math.inf, 0.0
    return 0.0, 0.0


# runner ---------------------------------------------------------------------------------


def names():
    return [f"{m}: {n}" for m, n, _ in _CHECKS]


def run_all(tol_scale=1.0, report=None):
    """Run every check; ``report`` (if given) is called with each result."""
    out = []
    for module, name, fn in _CHECKS:
        t0 = time.perf_counter()
        try:
            value, limit = fn(tol_scale)
            passed = bool(value <= limit)
            res = CheckResult(name, module, passed, float(value), float(limit),
                              time.perf_counter() - t0)
        except NumericalError as exc:
            op = exc.operation or "unknown operation"
            res = CheckResult(name, module, False, math.nan, math.nan,
                              time.perf_counter() - t0, error=f"numerical failure in {op}: {exc}")
        out.append(res)
        if report is not None:
            report(res)
    return out
