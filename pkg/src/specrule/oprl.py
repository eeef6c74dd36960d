"""Orthogonal polynomials on the real line.

Jacobi matrices, the Jacobi <-> measure maps for finite measures, and exact
spectral data for finite-rank perturbations of the free Jacobi matrix
(a_n = 1, b_n = 0) through a continued fraction that ends in the free
m-function.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NumericalError
from .measures import LINE, SpectralMeasure, cluster_grid

EDGE = 2.0
ROOT_TOL = 1e-12


@dataclass(frozen=True)
class JacobiParams:
    """Off-diagonal ``a`` (length n-1, positive) and diagonal ``b`` (length n)."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float)).copy()
        b = np.atleast_1d(np.asarray(self.b, dtype=float)).copy()
        if len(b) < 1:
            raise ValueError("need n >= 1")
        if len(a) != len(b) - 1:
            raise ValueError(f"|a| must be |b| - 1, got {len(a)} and {len(b)}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("Jacobi parameters must be finite")
        if np.any(a <= 0):
            raise ValueError("off-diagonal entries must be positive")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self):
        return len(self.b)

    def matrix(self):
        return np.diag(self.b) + np.diag(self.a, 1) + np.diag(self.a, -1)


@dataclass(frozen=True)
class FiniteRankPerturbation:
    """Jacobi parameters that equal a_n = 1, b_n = 0 beyond a finite prefix.

    ``a[k]`` couples sites k and k+1 (0-based); the prefix length is
    ``r = max(len(a), len(b))`` and the shorter list is padded with its free
    value, so ``a[r-1]`` couples the prefix to the free tail.
    """

    a: np.ndarray = field(default_factory=lambda: np.zeros(0))
    b: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        r = max(len(a), len(b))
        a = np.concatenate([a, np.ones(r - len(a))])
        b = np.concatenate([b, np.zeros(r - len(b))])
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("Jacobi parameters must be finite")
        if np.any(a <= 0):
            raise ValueError("off-diagonal entries must be positive")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def r(self):
        return len(self.b)

    def truncation(self, n):
        """The top-left n x n block (n >= r) as JacobiParams."""
        if n < max(self.r, 1):
            raise ValueError("truncation must contain the prefix")
        a = np.ones(n - 1)
        b = np.zeros(n)
        k = min(self.r, n - 1)
        a[:k] = self.a[:k]
        b[: self.r] = self.b
        return JacobiParams(a, b)

    def sup_norm_bound(self):
        """Upper bound on |E| for the spectrum (row sums of |J|)."""
        a = np.concatenate([[0.0], self.a, [1.0]])
        b = np.concatenate([self.b, [0.0]])
        return float(max(np.max(np.abs(b) + a[:-1] + a[1:]), EDGE))


def p_eval(j, x, upto):
    """Orthonormal p_0..p_upto at ``x`` (array over the leading axis).

    For ``upto = n`` the missing a_n is taken to be 1, so p_n is the monic
    characteristic polynomial of J divided by a_1 ... a_{n-1}.
    """
    if not 0 <= upto <= j.n:
        raise IndexError(f"degree {upto} outside 0..{j.n}")
    x = np.asarray(x, dtype=float)
    a = np.append(j.a, 1.0)
    out = np.empty((upto + 1,) + x.shape)
    out[0] = 1.0
    prev = np.zeros_like(x)
    for k in range(upto):
        nxt = ((x - j.b[k]) * out[k] - (a[k - 1] if k else 0.0) * prev) / a[k]
        prev = out[k]
        out[k + 1] = nxt
    return out


def tridiag_eigensolve(j):
    """Eigenvalues of J and squared first components of its eigenvectors."""
    if j.n == 1:
        return np.array([float(j.b[0])]), np.ones(1)
    try:
        vals, vecs = scipy.linalg.eigh_tridiagonal(j.b, j.a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(str(exc), operation="tridiag_eigensolve") from exc
    return vals, vecs[0] ** 2


def jacobi_to_measure(j):
    """The n-atom measure with Jacobi parameters ``j``.

    Atoms are the eigenvalues of J; the weight at x_k is the Christoffel
    number ``1 / sum_{i<n} p_i(x_k)^2``.
    """
    x, _ = tridiag_eigensolve(j)
    p = p_eval(j, x, j.n - 1)
    w = 1.0 / np.sum(p**2, axis=0)
    if not np.all(w > 0) or abs(w.sum() - 1.0) > 1e-10:
        raise NumericalError("Christoffel weights lost positivity or normalization",
                             operation="jacobi_to_measure")
    return SpectralMeasure.atomic(LINE, x, w)


def _lanczos(x, w, m, operation="measure_to_jacobi"):
    """Lanczos on diag(x) from start vector sqrt(w), with full reorthogonalization."""
    q = np.sqrt(w)
    q = q / np.linalg.norm(q)
    basis = [q]
    a = np.empty(max(m - 1, 0))
    b = np.empty(m)
    for k in range(m):
        v = x * basis[-1]
        b[k] = basis[-1] @ v
        if k == m - 1:
            break
        qs = np.array(basis)
        for _ in range(2):
            v = v - qs.T @ (qs @ v)
        beta = np.linalg.norm(v)
        if not beta > 1e-13 * max(1.0, np.max(np.abs(x))):
            raise NumericalError(f"loss of positivity at step {k + 1} (a = {beta!r})",
                                 operation=operation)
        a[k] = beta
        basis.append(v / beta)
    return JacobiParams(a, b)


def measure_to_jacobi(mu, m, *, tol=1e-12, max_level=6):
    """First m diagonal and m-1 off-diagonal Jacobi parameters of a line measure.

    Atomic measures are used as they are; an a.c. part is discretized and
    refined until the parameters move by less than ``tol``.
    """
    if mu.domain != LINE:
        raise ValueError("measure must live on the line")
    if mu.ac is None:
        if m > mu.n_atoms:
            raise ValueError(f"an {mu.n_atoms}-atom measure has only {mu.n_atoms} parameters")
        return _lanczos(mu.positions, mu.weights, m)
    prev = None
    for level in range(max_level + 1):
        xs, ws = mu.ac.discretize(level)
        keep = ws > 0
        x = np.concatenate([xs[keep], mu.positions])
        w = np.concatenate([ws[keep], mu.weights])
        cur = _lanczos(x, w, m)
        if prev is not None:
            diff = max(np.max(np.abs(cur.a - prev.a), initial=0.0),
                       np.max(np.abs(cur.b - prev.b)))
            if diff < tol:
                return cur
        prev = cur
    return prev


# free m-function and finite-rank perturbations --------------------------------------


def free_m_function(z):
    """m_0(z) = (-z + sqrt(z - 2) sqrt(z + 2)) / 2, the Stieltjes transform of the semicircle."""
    z = np.asarray(z, dtype=complex)
    if np.any((np.abs(z.imag) <= 1e-14) & (np.abs(z.real) <= EDGE)):
        raise ValueError("z lies on [-2, 2]")
    # -2 / (z + s) equals (-z + s) / 2 and avoids cancellation for large |z|
    out = -2.0 / (z + np.sqrt(z - EDGE) * np.sqrt(z + EDGE))
    return out[()] if out.ndim == 0 else out


def free_m_boundary(x):
    """Boundary value m_0(x + i0) for x in [-2, 2]."""
    x = np.asarray(x, dtype=float)
    return 0.5 * (-x + 1j * np.sqrt(np.clip(4.0 - x * x, 0.0, None)))


def continued_fraction_m(p, z, tail=None):
    """m(z) = <delta_1, (J - z)^{-1} delta_1> by backward continued fraction.

    ``tail`` overrides the free m-function value used at the end (e.g. the
    boundary value on the cut).
    """
    z = np.asarray(z, dtype=complex)
    m = free_m_function(z) if tail is None else np.asarray(tail, dtype=complex)
    for k in range(p.r - 1, -1, -1):
        m = 1.0 / (p.b[k] - z - p.a[k] ** 2 * m)
    return m


def _char_det(p, e, m0):
    """Sign-reliable det(J_r - E - a_r^2 m0 e_r e_r^T) by the continuant recursion."""
    e = np.asarray(e, dtype=float)
    r = p.r
    prev = np.ones_like(e)
    cur = p.b[0] - e - (p.a[0] ** 2 * m0 if r == 1 else 0.0)
    for k in range(1, r):
        diag = p.b[k] - e - (p.a[k] ** 2 * m0 if k == r - 1 else 0.0)
        cur, prev = diag * cur - p.a[k - 1] ** 2 * prev, cur
        scale = np.maximum(np.abs(cur), np.abs(prev))
        scale = np.where(scale > 0, scale, 1.0)
        cur, prev = cur / scale, prev / scale
    return cur


def _inv_m(p, z):
    """1/m(z) for real z outside [-2, 2]."""
    z = np.asarray(z, dtype=float)
    m = free_m_function(z).real
    for k in range(p.r - 1, 0, -1):
        m = 1.0 / (p.b[k] - z - p.a[k] ** 2 * m)
    return p.b[0] - z - p.a[0] ** 2 * m


def _bisect(f, lo, hi, flo):
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
        if abs(hi - lo) <= ROOT_TOL * 1e-3:
            break
    return 0.5 * (lo + hi)


def _eigenvalues_one_side(p, sign, bound, grid_size):
    # E = sign (u + 1/u), u in (0, 1), and m0(E) = -sign u
    umin = 0.5 * (bound - np.sqrt(bound * bound - 4.0)) if bound > EDGE else 1.0
    umin = max(umin * 0.5, 1e-300)
    s = np.unique(np.concatenate([
        np.geomspace(1e-9, 1.0 - umin, grid_size),
        np.linspace(0.0, 1.0 - umin, grid_size)[1:],
    ]))
    u = 1.0 - s

    def d(uu):
        return _char_det(p, sign * (uu + 1.0 / uu), -sign * uu)

    vals = d(u)
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        # bisect in E so the tolerance is on the eigenvalue
        elo, ehi = sign * (u[i] + 1 / u[i]), sign * (u[i + 1] + 1 / u[i + 1])

        def f(e):
            uu = 0.5 * (abs(e) - np.sqrt(e * e - 4.0))
            return float(d(np.array([uu]))[0])

        roots.append(_bisect(f, elo, ehi, vals[i]))
    roots += [sign * (uu + 1 / uu) for uu in u[vals == 0]]
    return roots


@dataclass(frozen=True)
class PerturbedSpectrum:
    """Spectral data of a finite-rank perturbation of the free Jacobi matrix."""

    perturbation: FiniteRankPerturbation
    eigenvalues: np.ndarray
    weights: np.ndarray
    grid: np.ndarray

    def density(self, x):
        """a.c. density w(x) = Im m(x + i0) / pi on [-2, 2], zero outside."""
        x = np.asarray(x, dtype=float)
        inside = np.abs(x) < EDGE
        xi = np.where(inside, x, 0.0)
        m = continued_fraction_m(self.perturbation, xi + 0j, tail=free_m_boundary(xi))
        return np.where(inside, np.clip(m.imag / np.pi, 0.0, None), 0.0)

    @property
    def values(self):
        return self.density(self.grid)

    def measure(self):
        return SpectralMeasure.line_density(
            self.density, -EDGE, EDGE, self.eigenvalues, self.weights,
            grid_points=len(self.grid))


def perturbed_spectral_data(p, *, grid_points=4096, search_grid=4000):
    """Density, eigenvalues outside [-2, 2] and their weights for ``p``.

    Eigenvalues are the zeros of det(J_r - E - a_r^2 m_0(E) e_r e_r^T) on
    each side of the interval, bracketed on a grid in E = +-(u + 1/u) and
    bisected to 1e-12. The weight of eigenvalue E (the residue of m) is
    psi_1^2 / |psi|^2 for its eigenvector, whose tail is geometric; see
    :func:`residue_weight` for the finite-difference alternative.
    """
    if not isinstance(p, FiniteRankPerturbation):
        raise TypeError("expected a FiniteRankPerturbation")
    eig = []
    if p.r:
        bound = p.sup_norm_bound() + 1.0
        for sign in (-1.0, 1.0):
            eig += _eigenvalues_one_side(p, sign, bound, search_grid)
    eig = np.sort(np.array(eig, dtype=float))
    eig = eig[np.abs(eig) > EDGE]
    w = np.array([eigenvector_weight(p, e) for e in eig])
    if not np.all(w > 0):
        raise NumericalError("non-positive eigenvalue weight", operation="perturbed_spectral_data")
    return PerturbedSpectrum(p, eig, w, cluster_grid(-EDGE, EDGE, grid_points))


def residue_weight(p, e, rel_step=1e-6):
    """Residue weight -1 / (d(1/m)/dz) at E by a central difference.

    Unreliable when a zero of m lies within the step of E, which happens
    for eigenvalues of very small weight.
    """
    h = rel_step * abs(e)
    return -2.0 * h / (_inv_m(p, e + h) - _inv_m(p, e - h))


def eigenvector_weight(p, e):
    """Exact weight of an eigenvalue from its eigenvector (tail decays like u^n)."""
    u = 0.5 * (abs(e) - np.sqrt(e * e - 4.0))
    r = p.r
    psi = np.zeros(r + 1)
    psi[0] = 1.0
    a = np.append(p.a, 1.0)
    prev = 0.0
    for k in range(r):
        # a_k psi_{k+1} = (E - b_k) psi_k - a_{k-1} psi_{k-1}
        nxt = ((e - p.b[k]) * psi[k] - (a[k - 1] if k else 0.0) * prev) / a[k]
        prev = psi[k]
        psi[k + 1] = nxt
    # beyond the prefix psi_{r+n} = psi_r (sign u)^n
    tail = psi[r] ** 2 * u * u / (1.0 - u * u)
    return psi[0] ** 2 / (np.sum(psi**2) + tail)
