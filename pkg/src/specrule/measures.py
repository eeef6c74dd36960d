"""Probability measures on the unit circle and the real line.

A :class:`SpectralMeasure` is a finite list of atoms plus an optional
absolutely continuous part. Circle positions are angles theta in [0, 2pi)
and circle densities are taken with respect to dtheta/2pi; line densities
are taken with respect to dx.

The a.c. part is either a callable density (exact, used by quadrature) or a
tabulated grid (linear interpolation). Callable densities also carry a
tabulation so they can be serialized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from . import _quad
from .errors import QuadratureError

CIRCLE = "circle"
LINE = "line"
DOMAINS = (CIRCLE, LINE)

TWO_PI = 2.0 * np.pi
MASS_TOL = 1e-8
BIN_BASE_LEVEL = 14
BIN_LEVEL_CAP = 20
LINE_WINDOW = 4.0


def _wrap_angle(theta):
    t = np.mod(np.asarray(theta, dtype=float), TWO_PI)
    return np.where(t >= TWO_PI, 0.0, t)


def cluster_grid(lo, hi, k=4096):
    """Chebyshev-clustered grid on [lo, hi], endpoints included, increasing."""
    c, h = 0.5 * (lo + hi), 0.5 * (hi - lo)
    x = c - h * np.cos(np.pi * np.arange(k + 2) / (k + 1))
    x[0], x[-1] = lo, hi
    return x


@dataclass(frozen=True)
class ACPart:
    """Absolutely continuous part of a measure.

    ``values`` tabulate the density on ``grid``. When ``density`` is given it
    is the authoritative evaluator; otherwise the table is interpolated
    linearly (periodically on the circle) and is zero outside the grid on
    the line.
    """

    grid: np.ndarray
    values: np.ndarray
    density: Optional[Callable] = field(default=None, compare=False, repr=False)
    periodic: bool = False

    @property
    def support(self):
        if self.periodic:
            return (0.0, TWO_PI)
        return (float(self.grid[0]), float(self.grid[-1]))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.density is not None:
            with np.errstate(all="ignore"):
                return np.asarray(self.density(x), dtype=float) * np.ones_like(x)
        if self.periodic:
            return np.interp(np.mod(x, TWO_PI), self.grid, self.values, period=TWO_PI)
        return np.interp(x, self.grid, self.values, left=0.0, right=0.0)

    def discretize(self, level=0):
        """Quadrature nodes and masses representing this part.

        Callable circle densities use 256 * 2**level GL panels; callable line
        densities use the cosine substitution on the support with graded
        ends; tabulated densities use GL on every grid cell, split 2**level
        times.
        """
        if self.density is not None:
            if self.periodic:
                theta, w = _quad.circle_rule(256 * 2**level)
                return theta, self(theta) * w
            lo, hi = self.support
            x, w = _quad.cos_substitution_rule(lo, hi, 64 * 2**level, levels=8 + 2 * level)
            return x, self(x) * w
        edges = self.grid
        if self.periodic:
            edges = np.append(edges, edges[0] + TWO_PI)
        if level:
            sub = 2**level
            t = np.linspace(0.0, 1.0, sub + 1)[:-1]
            d = np.diff(edges)
            edges = np.append((edges[:-1, None] + d[:, None] * t[None, :]).ravel(), edges[-1])
        x, w = _quad.panel_rule(edges, 4)
        if self.periodic:
            return np.mod(x, TWO_PI), self(x) * w / TWO_PI
        return x, self(x) * w


@dataclass(frozen=True)
class SpectralMeasure:
    """Probability measure on the circle or line: atoms plus optional a.c. part."""

    domain: str
    positions: np.ndarray = field(default_factory=lambda: np.zeros(0))
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ac: Optional[ACPart] = None

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ValueError(f"unknown domain {self.domain!r}")
        pos = np.atleast_1d(np.asarray(self.positions, dtype=float))
        wts = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if pos.shape != wts.shape or pos.ndim != 1:
            raise ValueError("atom positions and weights must be 1-d of equal length")
        if self.domain == CIRCLE:
            pos = _wrap_angle(pos)
        if np.any(~np.isfinite(pos)) or np.any(~np.isfinite(wts)):
            raise ValueError("atom data must be finite")
        if np.any(wts <= 0):
            raise ValueError("atom weights must be positive")
        if len(np.unique(pos)) != len(pos):
            raise ValueError("atoms must be distinct")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", wts)
        if self.ac is not None:
            g, v = np.asarray(self.ac.grid, float), np.asarray(self.ac.values, float)
            if g.ndim != 1 or g.shape != v.shape or len(g) < 2:
                raise ValueError("a.c. grid and values must be 1-d of equal length >= 2")
            if np.any(np.diff(g) <= 0):
                raise ValueError("a.c. grid must be strictly increasing")
            if np.any(~np.isfinite(v)) or np.any(v < 0):
                raise ValueError("a.c. values must be finite and nonnegative")
            if self.ac.periodic != (self.domain == CIRCLE):
                raise ValueError("a.c. part periodicity does not match the domain")

    # constructors -------------------------------------------------------

    @classmethod
    def atomic(cls, domain, positions, weights):
        return cls(domain, np.asarray(positions, float), np.asarray(weights, float))

    @classmethod
    def circle_density(cls, density, atoms=(), atom_weights=(), grid_points=1024):
        """Circle measure with a callable density w.r.t. dtheta/2pi."""
        grid = np.linspace(0.0, TWO_PI, grid_points, endpoint=False)
        with np.errstate(all="ignore"):
            vals = np.asarray(density(grid), float) * np.ones_like(grid)
        ac = ACPart(grid, vals, density, periodic=True)
        return cls(CIRCLE, np.asarray(atoms, float), np.asarray(atom_weights, float), ac)

    @classmethod
    def line_density(cls, density, lo, hi, atoms=(), atom_weights=(), grid_points=4096):
        """Line measure with a callable density w.r.t. dx supported in [lo, hi]."""
        grid = cluster_grid(lo, hi, grid_points)
        with np.errstate(all="ignore"):
            vals = np.asarray(density(grid), float) * np.ones_like(grid)
        vals = np.where(np.isfinite(vals), vals, 0.0)
        ac = ACPart(grid, np.maximum(vals, 0.0), density, periodic=False)
        return cls(LINE, np.asarray(atoms, float), np.asarray(atom_weights, float), ac)

    # queries ------------------------------------------------------------

    @property
    def n_atoms(self):
        return len(self.positions)

    @property
    def is_atomic(self):
        return self.ac is None

    def points(self):
        """Atom locations as complex unit numbers (circle) or reals (line)."""
        if self.domain == CIRCLE:
            return np.exp(1j * self.positions)
        return self.positions.copy()

    def ac_mass(self, tol=1e-12):
        if self.ac is None:
            return 0.0
        return float(integrate_against(self, lambda x: np.ones_like(x), tol=tol, atoms=False))

    def total_mass(self):
        return float(math.fsum(self.weights)) + self.ac_mass()

    def check_mass(self, tol=MASS_TOL):
        m = self.total_mass()
        if abs(m - 1.0) > tol:
            raise ValueError(f"total mass {m!r} differs from 1 by more than {tol}")
        return m

    def with_atoms(self, positions, weights, scale_ac=1.0):
        """Copy with new atoms and the a.c. density multiplied by ``scale_ac``."""
        ac = self.ac
        if ac is not None and scale_ac != 1.0:
            dens = None if ac.density is None else (lambda x, d=ac.density: scale_ac * d(x))
            ac = ACPart(ac.grid, ac.values * scale_ac, dens, ac.periodic)
        return SpectralMeasure(self.domain, np.asarray(positions, float),
                               np.asarray(weights, float), ac)


def lebesgue_circle():
    """Normalized arc length dtheta/2pi."""
    return SpectralMeasure.circle_density(lambda t: np.ones_like(t))


def semicircle_density(x):
    x = np.asarray(x, dtype=float)
    return np.sqrt(np.clip(4.0 - x * x, 0.0, None)) / (2.0 * np.pi)


def semicircle():
    """Wigner semicircle law sqrt(4 - x^2)/(2pi) dx on [-2, 2]."""
    return SpectralMeasure.line_density(semicircle_density, -2.0, 2.0)


def integrate_against(mu, g, *, tol=1e-12, atoms=True, max_level=12):
    """``sum_atoms g + int g w``; ``g`` may return shape (..., npoints).

    The a.c. integral is refined by doubling until every component changes
    by less than ``tol`` (absolute, relative to max(1, |value|)).
    """
    total = 0.0
    if atoms and mu.n_atoms:
        total = np.sum(np.asarray(g(mu.positions)) * mu.weights, axis=-1)
    if mu.ac is None:
        return total
    prev = None
    for level in range(max_level + 1):
        x, m = mu.ac.discretize(level)
        val = np.sum(np.asarray(g(x)) * m, axis=-1)
        if prev is not None:
            err = np.max(np.abs(val - prev) / np.maximum(1.0, np.abs(val)))
            if err <= tol:
                return total + val
        prev = val
        if mu.ac.density is None and level >= 2:
            # linear interpolant: GL-4 per cell is already exact up to rounding
            return total + val
    raise QuadratureError(
        "integrate_against: a.c. quadrature did not converge",
        last_values=(prev, val), operation="integrate_against")


# dyadic binning ---------------------------------------------------------------


@dataclass(frozen=True)
class BinnedMeasure:
    """Masses of a measure on the 2**level dyadic bins.

    Circle bins are [2pi(k-1)/2^j, 2pi k/2^j). Line bins split
    [-window, window] uniformly; mass outside the window sits in ``overflow``.
    """

    level: int
    masses: np.ndarray
    domain: str = CIRCLE
    overflow: float = 0.0
    window: float = LINE_WINDOW

    def all_masses(self):
        if self.domain == LINE:
            return np.append(self.masses, self.overflow)
        return self.masses

    def coarsen(self):
        if self.level == 0:
            raise ValueError("cannot coarsen level 0")
        m = self.masses[0::2] + self.masses[1::2]
        return BinnedMeasure(self.level - 1, m, self.domain, self.overflow, self.window)


def _bin_index(frac, nbins):
    r = frac * nbins
    near = np.rint(r)
    snap = np.abs(r - near) <= 1e-9 * np.maximum(1.0, np.abs(r))
    return np.where(snap, near, np.floor(r)).astype(np.int64)


def _base_bins(mu, level, window, order=8):
    nb = 2**level
    masses = np.zeros(nb)
    overflow = 0.0
    if mu.domain == CIRCLE:
        edges = np.linspace(0.0, TWO_PI, nb + 1)
        if mu.ac is not None:
            x, w = _quad.panel_rule(edges, order)
            masses += (mu.ac(x) * w).reshape(nb, order).sum(axis=1) / TWO_PI
        if mu.n_atoms:
            idx = _bin_index(mu.positions / TWO_PI, nb) % nb
            np.add.at(masses, idx, mu.weights)
        return masses, 0.0
    edges = np.linspace(-window, window, nb + 1)
    if mu.ac is not None:
        lo, hi = mu.ac.support
        a = np.clip(edges[:-1], lo, hi)
        b = np.clip(edges[1:], lo, hi)
        gx, gw = _quad.gauss_legendre(order)
        half = 0.5 * (b - a)
        x = a[:, None] + half[:, None] * (gx[None, :] + 1.0)
        masses += (mu.ac(x.ravel()).reshape(nb, order) * gw[None, :]).sum(axis=1) * half
        if lo < -window or hi > window:
            for s, t in ((lo, min(hi, -window)), (max(lo, window), hi)):
                if t > s:
                    xs, ws = _quad.panel_rule(np.linspace(s, t, 65), order)
                    overflow += float(np.sum(mu.ac(xs) * ws))
    if mu.n_atoms:
        frac = (mu.positions + window) / (2 * window)
        inside = (frac >= 0) & (frac < 1)
        idx = np.clip(_bin_index(frac[inside], nb), 0, nb - 1)
        np.add.at(masses, idx, mu.weights[inside])
        overflow += float(np.sum(mu.weights[~inside]))
    return masses, overflow


def bin_project(mu, j, *, window=LINE_WINDOW, base_level=BIN_BASE_LEVEL):
    """Masses ``mu(I_k)`` of the 2**j dyadic bins.

    Bins are computed at level ``max(j, base_level)`` and summed pairwise
    down to ``j``, so ``bin_project(mu, j)`` equals the coarsening of
    ``bin_project(mu, j + 1)`` bit-for-bit whenever ``j < base_level``.
    """
    if not 0 <= j <= BIN_LEVEL_CAP:
        raise ValueError(f"bin level must lie in [0, {BIN_LEVEL_CAP}], got {j}")
    return bin_levels(mu, j, window=window, base_level=base_level)[j]


def bin_levels(mu, jmax, *, window=LINE_WINDOW, base_level=BIN_BASE_LEVEL):
    """``[bin_project(mu, j) for j in 0..jmax]`` from a single base pass."""
    base = max(jmax, base_level)
    masses, overflow = _base_bins(mu, base, window)
    b = BinnedMeasure(base, masses, mu.domain, overflow, window)
    out = {}
    while True:
        if b.level <= jmax:
            out[b.level] = b
        if b.level == 0:
            break
        b = b.coarsen()
    return [out[j] for j in range(jmax + 1)]


def reversed_kl(nu, mu):
    """KL divergence ``sum nu_k log(nu_k / mu_k)`` of two binned measures.

    This is H(nu|mu), the negative of the relative entropy S(nu|mu). Returns
    ``inf`` when nu charges a bin that mu does not.
    """
    if nu.level != mu.level or nu.domain != mu.domain:
        raise ValueError("binned measures must share level and domain")
    p, q = nu.all_masses(), mu.all_masses()
    pos = p > 0
    if np.any(q[pos] <= 0):
        return math.inf
    return float(np.sum(p[pos] * np.log(p[pos] / q[pos])))


# entropy functionals ------------------------------------------------------------


def _sharp_points(f, samples=4096, keep=16):
    """Interior locations of the sharpest extrema of a periodic f on [0, 2pi).

    Narrow peaks (e.g. w near a zero of a polynomial close to the circle)
    defeat uniform panels; grading toward them restores fast convergence.
    """
    t = np.arange(samples) * (TWO_PI / samples)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.asarray(f(t), dtype=float)
    if not np.all(np.isfinite(y)):
        return ()
    curv = np.abs(np.roll(y, 1) - 2 * y + np.roll(y, -1))
    ext = (y - np.roll(y, 1)) * (np.roll(y, -1) - y) <= 0
    idx = np.flatnonzero(ext & (curv > 1e-3 * max(curv.max(), 1e-300)))
    idx = idx[np.argsort(curv[idx])[::-1][:keep]]
    h = TWO_PI / samples
    out = []
    for i in idx:
        sign = -1.0 if y[i] >= y[(i + 1) % samples] else 1.0
        res = minimize_scalar(lambda s: sign * float(np.asarray(f(np.array([s % TWO_PI])))[0]),
                              bounds=(t[i] - h, t[i] + h), method="bounded",
                              options={"xatol": 1e-14})
        s = float(res.x) % TWO_PI
        if 0.0 < s < TWO_PI:
            out.append(s)
    return tuple(out)


def entropy_ac(nu, mu, *, tol=1e-11, inf_threshold=1e6):
    """H(nu|mu) = int log(nu'/w) dnu, reading only the a.c. part w of mu.

    ``nu`` must be a purely a.c. probability measure with a callable or
    tabulated density. Returns ``inf`` when w vanishes on a set of positive
    nu-measure (detected as divergence past ``inf_threshold``).
    """
    if nu.domain != mu.domain:
        raise ValueError("measures live on different domains")
    if nu.ac is None or nu.n_atoms:
        raise ValueError("reference measure must be purely absolutely continuous")
    if mu.ac is None:
        return math.inf

    def kernel(x):
        p = nu.ac(x)
        w = mu.ac(x)
        out = np.zeros_like(p)
        pos = p > 0
        with np.errstate(divide="ignore"):
            out[pos] = p[pos] * (np.log(p[pos]) - np.log(w[pos]))
        return out

    if nu.domain == CIRCLE:
        val = _quad.integrate(kernel, 0.0, TWO_PI, tol=tol, panels=64,
                              points=_sharp_points(kernel), grade_ends=(True, True),
                              inf_threshold=inf_threshold * TWO_PI,
                              operation="entropy_ac")
        return val / TWO_PI if np.isfinite(val) else math.inf
    lo, hi = nu.ac.support
    c, h = 0.5 * (lo + hi), 0.5 * (hi - lo)

    def integrand(phi):
        return kernel(c + h * np.cos(phi)) * h * np.sin(phi)

    return _quad.integrate(integrand, 0.0, np.pi, tol=tol, panels=16,
                           grade_ends=(True, True), inf_threshold=inf_threshold,
                           operation="entropy_ac")


def monotone_binned_entropy(nu, mu, jmax, *, window=LINE_WINDOW):
    """``[H(pi_j nu | pi_j mu) for j = 0..jmax]`` (nondecreasing in j)."""
    if not 0 <= jmax <= 16:
        raise ValueError("jmax must lie in [0, 16]")
    bn = bin_levels(nu, jmax, window=window)
    bm = bin_levels(mu, jmax, window=window)
    return [reversed_kl(a, b) for a, b in zip(bn, bm)]


# weak distance ------------------------------------------------------------------


def family_moments(mu, degree=16, window=LINE_WINDOW):
    """Moments of the weak-distance test family.

    Circle: int e^{ik theta} dmu, k = 0..degree. Line: int T_k(x/window) dmu.
    """
    if mu.domain == CIRCLE:
        k = np.arange(degree + 1)[:, None]

        def g(t):
            return np.exp(1j * k * np.asarray(t)[None, :])
    else:
        def g(x):
            return np.polynomial.chebyshev.chebvander(np.asarray(x) / window, degree).T
    return np.asarray(integrate_against(mu, g, tol=1e-12))


def weak_distance(mu1, mu2, degree=16, window=LINE_WINDOW):
    """Sup of |int f dmu1 - int f dmu2| over the unit ball of the test family.

    The family is trigonometric polynomials (circle) or Chebyshev series on
    [-window, window] (line) of degree <= ``degree`` with coefficient
    1-norm <= 1. By l1/l-infinity duality the sup is the largest moment gap.
    """
    if mu1.domain != mu2.domain:
        raise ValueError("measures live on different domains")
    d = family_moments(mu1, degree, window) - family_moments(mu2, degree, window)
    return float(np.max(np.abs(d)))
