"""Large-deviation tools.

Cumulant generating functions and their Legendre transforms, tilted
Monte-Carlo tail estimates, logarithmic (Coulomb) energies, the semicircle
log-potential with its external field, and rate functions of binned
measures.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
from scipy.special import logsumexp

from . import _quad
from .ensembles import sample_gamma
from .errors import NumericalError
from .measures import CIRCLE, TWO_PI, semicircle_density
from .rng import RngStream

INF_CUTOFF = 1e12
LAMBDA_START = 8.0
EDGE_MARGIN = 1e-9
CHUNK = 16384
ESS_MIN = 30.0


# cumulant generating functions -----------------------------------------------------------


def cgf_exponential(lam):
    """Lambda(lam) = -log(1 - lam) for lam < 1, +inf otherwise."""
    lam = np.asarray(lam, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(lam < 1.0, -np.log1p(-np.minimum(lam, 1.0)), np.inf)
    return out[()] if out.ndim == 0 else out


def cgf_gaussian(lam):
    lam = np.asarray(lam, dtype=float)
    out = 0.5 * lam * lam
    return out[()] if out.ndim == 0 else out


def rate_phi(x):
    """phi(x) = x - 1 - log x, +inf for x <= 0."""
    x = np.asarray(x, dtype=float)
    pos = x > 0
    safe = np.where(pos, x, 1.0)
    out = np.where(pos, safe - 1.0 - np.log(safe), np.inf)
    return out[()] if out.ndim == 0 else out


def rate_phi_alpha(y, alpha):
    """phi_alpha(y) = alpha phi(y / alpha) = y - alpha - alpha log(y / alpha)."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    y = np.asarray(y, dtype=float)
    pos = y > 0
    safe = np.where(pos, y, alpha)
    out = np.where(pos, safe - alpha - alpha * np.log(safe / alpha), np.inf)
    return out[()] if out.ndim == 0 else out


# Legendre transform -----------------------------------------------------------------------


@dataclass
class RateFunction1D:
    x: np.ndarray
    values: np.ndarray
    argmax: np.ndarray
    minimizer: float

    def __call__(self, x):
        return np.interp(x, self.x, self.values)


def _domain_edge(cgf, direction):
    """Edge of {Lambda < inf} in the given direction from 0 (inf if none found)."""
    inside = 0.0
    step = 1.0
    while step <= INF_CUTOFF:
        probe = direction * step
        if not np.isfinite(cgf(probe)):
            lo, hi = inside, probe
            while abs(hi - lo) > 1e-13 * max(1.0, abs(hi)):
                mid = 0.5 * (lo + hi)
                if np.isfinite(cgf(mid)):
                    lo = mid
                else:
                    hi = mid
            return hi
        inside = probe
        step *= 2.0
    return direction * math.inf


def _sup_one(cgf, x, lo_edge, hi_edge):
    def g(lam):
        return lam * x - float(cgf(lam))

    lo = max(-LAMBDA_START, lo_edge + EDGE_MARGIN) if np.isfinite(lo_edge) else -LAMBDA_START
    hi = min(LAMBDA_START, hi_edge - EDGE_MARGIN) if np.isfinite(hi_edge) else LAMBDA_START
    while True:
        pts = np.linspace(lo, hi, 9)
        vals = np.array([g(p) for p in pts])
        k = int(np.argmax(vals))
        if np.max(vals) > INF_CUTOFF:
            return math.inf, math.copysign(math.inf, pts[k])
        if 0 < k < 8:
            break
        if k == 0:
            if lo <= -INF_CUTOFF or (np.isfinite(lo_edge) and lo <= lo_edge + EDGE_MARGIN):
                return (math.inf, -math.inf) if not np.isfinite(lo_edge) else (vals[0], lo)
            lo = max(lo - 2.0 * max(1.0, abs(lo)), lo_edge + EDGE_MARGIN)
        else:
            if hi >= INF_CUTOFF or (np.isfinite(hi_edge) and hi >= hi_edge - EDGE_MARGIN):
                return (math.inf, math.inf) if not np.isfinite(hi_edge) else (vals[-1], hi)
            hi = min(hi + 2.0 * max(1.0, abs(hi)), hi_edge - EDGE_MARGIN)
    lam = _golden_max(g, pts[k - 1], pts[k + 1])
    return g(lam), lam


def _golden_max(g, a, b, tol=1e-10):
    """Maximizer of a unimodal ``g`` on [a, b] by golden-section search."""
    r = 0.5 * (math.sqrt(5.0) - 1.0)
    c, d = b - r * (b - a), a + r * (b - a)
    gc, gd = g(c), g(d)
    while b - a > tol * max(1.0, abs(a) + abs(b)):
        if gc >= gd:
            b, d, gd = d, c, gc
            c = b - r * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + r * (b - a)
            gd = g(d)
    return 0.5 * (a + b)


def legendre_transform(cgf, xgrid):
    """I(x) = sup_lam (lam x - Lambda(lam)) on ``xgrid``.

    Golden-section search inside a bracket that starts at [-8, 8] (clipped
    to the domain of Lambda) and grows until it holds the maximizer. The
    value is +inf once the objective passes 1e12 or the bracket passes
    |lam| = 1e12.
    """
    x = np.asarray(xgrid, dtype=float)
    lo_edge = _domain_edge(cgf, -1.0)
    hi_edge = _domain_edge(cgf, 1.0)
    vals = np.empty_like(x)
    lam = np.empty_like(x)
    for i, xi in enumerate(x):
        vals[i], lam[i] = _sup_one(cgf, xi, lo_edge, hi_edge)
    vals = np.maximum(vals, 0.0)
    return RateFunction1D(x, vals, lam, float(x[int(np.argmin(vals))]))


# tilted Monte Carlo ------------------------------------------------------------------------


@dataclass
class RateEstimate:
    """Per-n tail estimates and the 1/n-extrapolated rate."""

    event: str
    n: np.ndarray
    a_n: np.ndarray
    log_p_hat: np.ndarray
    stderr: np.ndarray
    ess: np.ndarray
    flagged: np.ndarray
    rate: float
    rate_stderr: float
    metadata: dict = field(default_factory=dict)

    @property
    def per_n_rate(self):
        return -self.log_p_hat / self.a_n


def max_workers():
    env = os.environ.get("SPECRULE_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            pass
    return cap


def _chunk_stats(seed, stream, n, t, lam, count, upper):
    """Log-sums of the weighted indicators over one chunk of tilted draws."""
    rng = RngStream(seed, stream)
    s = sample_gamma(rng, n, 1.0 - lam, size=count)
    hit = s >= n * t if upper else s <= n * t
    lw = -lam * s[hit] + n * float(cgf_exponential(lam))
    if lw.size == 0:
        return -math.inf, -math.inf, 0
    return float(logsumexp(lw)), float(logsumexp(2.0 * lw)), int(hit.sum())


def _fit_rate(n, r, sr):
    x = 1.0 / np.asarray(n, dtype=float)
    ok = np.isfinite(r) & np.isfinite(sr) & (sr > 0)
    if ok.sum() == 0:
        return math.nan, math.nan
    if ok.sum() == 1:
        return float(r[ok][0]), float(sr[ok][0])
    w = 1.0 / sr[ok] ** 2
    a = np.column_stack([np.ones(ok.sum()), x[ok]])
    cov = np.linalg.inv(a.T @ (a * w[:, None]))
    coef = cov @ (a.T @ (w * r[ok]))
    return float(coef[0]), float(math.sqrt(cov[0, 0]))


def mc_tail_estimate(rng, t, n_list, samples, tilt="auto", *, chunk=CHUNK, workers=None):
    """Importance-sampled P(S_n / n >= t) (t > 1) or P(S_n / n <= t) (t < 1).

    S_n is a sum of n unit exponentials. Under the tilt lam the sum is
    Gamma(n, rate 1 - lam) and the likelihood ratio is
    exp(-lam S + n Lambda(lam)); ``tilt="auto"`` uses lam = 1 - 1/t and
    ``tilt=0`` is the naive estimator. Chunks of ``chunk`` draws use
    independent streams keyed by (n index, chunk index), so results do not
    depend on the number of workers.
    """
    if not t > 0:
        raise ValueError("threshold must be positive")
    lam = 1.0 - 1.0 / t if tilt == "auto" else float(tilt)
    if not lam < 1.0:
        raise ValueError("tilt must be < 1")
    upper = t >= 1.0
    n_list = np.asarray(sorted(int(n) for n in n_list))
    if np.any(np.diff(n_list) <= 0) or n_list[0] < 1:
        raise ValueError("n_list must be distinct positive integers")
    samples = int(samples)
    nchunks = -(-samples // chunk)
    sizes = [min(chunk, samples - c * chunk) for c in range(nchunks)]
    workers = min(max_workers() if workers is None else workers, nchunks)
    logp = np.empty(len(n_list))
    se = np.empty(len(n_list))
    ess = np.empty(len(n_list))
    for i, n in enumerate(n_list):
        jobs = [(rng.seed, ((rng.stream & 0xFFFFFFFF) << 32) | (i << 20) | c, int(n), t, lam,
                 sizes[c], upper) for c in range(nchunks)]
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                parts = list(pool.map(lambda a: _chunk_stats(*a), jobs))
        else:
            parts = [_chunk_stats(*a) for a in jobs]
        l1 = logsumexp([p[0] for p in parts]) if any(p[2] for p in parts) else -math.inf
        l2 = logsumexp([p[1] for p in parts]) if any(p[2] for p in parts) else -math.inf
        logp[i] = l1 - math.log(samples)
        if np.isfinite(l1):
            rel_var = math.exp(l2 - 2.0 * l1 + math.log(samples)) - 1.0
            se[i] = math.sqrt(max(rel_var, 0.0) / samples)
            ess[i] = math.exp(2.0 * l1 - l2)
        else:
            se[i] = math.inf
            ess[i] = 0.0
    a_n = n_list.astype(float)
    rate, rate_se = _fit_rate(n_list, -logp / a_n, se / a_n)
    side = ">=" if upper else "<="
    return RateEstimate(
        event=f"mean of n exponentials {side} {t!r}", n=n_list, a_n=a_n, log_p_hat=logp,
        stderr=se, ess=ess, flagged=ess < ESS_MIN, rate=rate, rate_stderr=rate_se,
        metadata={"tilt": lam, "samples": samples, "chunk": chunk, "seed": rng.seed,
                  "stream": rng.stream})


# Coulomb energy and log potentials ----------------------------------------------------------


def _empirical_energy(z):
    z = np.asarray(z)
    n = len(z)
    d = np.abs(z[:, None] - z[None, :])
    off = ~np.eye(n, dtype=bool)
    if np.any(d[off] == 0):
        return math.inf
    return float(-np.sum(np.log(d[off])) / n**2)


def _series_energy(coeffs_fn, tol=1e-12, start=1024, max_n=2**20):
    prev = None
    n = start
    while n <= max_n:
        val = coeffs_fn(n)
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return val
        prev = val
        n *= 2
    raise NumericalError("Coulomb series did not converge", operation="coulomb_energy")


def coulomb_energy(mu, empirical=False):
    """I(mu) = -int int log|z - w| dmu(z) dmu(w).

    ``empirical=True`` treats the atoms as n eigenvalues and returns
    -(1/n^2) sum_{i != j} log|z_i - z_j| (ignoring weights). Otherwise a
    measure with atoms has infinite energy, and an a.c. measure is
    expanded in the logarithmic kernel's eigenbasis: on the circle
    -log|e^{it} - e^{is}| = sum_k cos(k(t - s)) / k gives sum_k |mu_k|^2 / k;
    on [c - h, c + h] the Chebyshev expansion gives
    -log(h/2) + 2 sum_k c_k^2 / k with c_k = int T_k((x - c)/h) dmu.
    """
    if empirical or mu.ac is None:
        if not empirical:
            return math.inf if mu.n_atoms else 0.0
        return _empirical_energy(mu.points())
    if mu.n_atoms:
        return math.inf
    ac = mu.ac
    if mu.domain == CIRCLE:
        def energy(n):
            theta = TWO_PI * np.arange(n) / n
            mk = scipy.fft.fft(ac(theta)) / n
            k = np.arange(1, n // 2)
            return float(np.sum(np.abs(mk[1:n // 2]) ** 2 / k))
        return _series_energy(energy)
    lo, hi = ac.support
    c, h = 0.5 * (lo + hi), 0.5 * (hi - lo)

    def energy(n):
        # c_k = int T_k((x - c)/h) dmu by graded GL in x = c + h cos(phi);
        # unlike a DCT this stays accurate when w does not vanish at the ends
        edges = _quad.graded_edges(0.0, np.pi, n, 12, (), (True, True))
        phi, wphi = _quad.panel_rule(edges)
        m = ac(c + h * np.cos(phi)) * h * np.sin(phi) * wphi
        k = np.arange(1, n // 2)
        ck = np.concatenate([np.cos(kb[:, None] * phi[None, :]) @ m
                             for kb in np.array_split(k, max(1, k.size // 256))])
        return float(-math.log(h / 2.0) + 2.0 * np.sum(ck**2 / k))

    return _series_energy(energy, start=256, max_n=2**14)


def log_potential(x, density=semicircle_density, support=(-2.0, 2.0), tol=1e-11):
    """U(x) = int log|x - y| w(y) dy by graded quadrature in y = c + h cos(phi)."""
    lo, hi = support
    c, h = 0.5 * (lo + hi), 0.5 * (hi - lo)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xs)
    for i, xi in enumerate(xs):
        s = (xi - c) / h
        inside = -1.0 < s < 1.0
        phi0 = float(np.arccos(s)) if inside else 0.0
        grade = (s >= 1.0 - 1e-2, s <= -1.0 + 1e-2)

        def f(phi, xi=xi, inside=inside, phi0=phi0):
            y = c + h * np.cos(phi)
            # x - y = 2h sin((phi + phi0)/2) sin((phi - phi0)/2), no cancellation near phi0
            d = 2 * h * np.sin(0.5 * (phi + phi0)) * np.sin(0.5 * (phi - phi0)) if inside else xi - y
            with np.errstate(divide="ignore"):
                return np.log(np.abs(d)) * density(y) * h * np.sin(phi)

        out[i] = _quad.integrate(f, 0.0, np.pi, tol=tol, points=(phi0,) if inside else (),
                                 grade_ends=grade, panels=8, levels=14, operation="log_potential")
    return out[0] if np.ndim(x) == 0 else out


def field_potential_F(e):
    """E^2/4 - 1/2 - int log|E - y| dnu_0(y) for the [-2, 2] semicircle nu_0."""
    e = np.asarray(e, dtype=float)
    if np.any(np.abs(e) <= 2.0):
        raise ValueError("field potential is evaluated off the support, |E| > 2")
    out = e * e / 4.0 - 0.5 - log_potential(e)
    return out[()] if np.ndim(out) == 0 else out


def equilibrium_check(density=semicircle_density, grid_points=512, support=(-2.0, 2.0)):
    """Max deviation of x^2/4 - int log|x - y| w(y) dy from its mean over the support.

    The potential is sampled at ``grid_points`` Chebyshev-clustered
    interior points; it is constant there exactly when w is the
    equilibrium measure of the field x^2/4.
    """
    if grid_points < 512:
        raise ValueError("grid_points must be >= 512")
    lo, hi = support
    k = np.arange(1, grid_points + 1)
    x = 0.5 * (lo + hi) - 0.5 * (hi - lo) * np.cos(np.pi * k / (grid_points + 1))
    v = x * x / 4.0 - log_potential(x, density, support)
    return float(np.max(np.abs(v - np.mean(v))))


# binned rates ---------------------------------------------------------------------------


def binned_rate(beta):
    """Rate at a binned point: total, and its split into mass and entropy parts.

    total = sum_l phi_{2^-j}(beta_l); mass part = beta - 1 - log beta with
    beta = sum beta_l; entropy part = sum 2^-j log(2^-j / s_l) with
    s = beta_vec / beta.
    """
    b = np.asarray(beta, dtype=float)
    m = b.size
    if m == 0 or m & (m - 1):
        raise ValueError("beta must have length 2^j")
    if np.any(~(b > 0)):
        raise ValueError("all beta entries must be positive")
    p = 1.0 / m
    total = math.fsum((b - p) - p * np.log(m * b))
    tot = math.fsum(b)
    mass = tot - 1.0 - math.log(tot)
    s = b / tot
    ent = math.fsum(p * np.log(p / s))
    return total, mass, ent
