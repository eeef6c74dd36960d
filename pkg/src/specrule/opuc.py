"""Orthogonal polynomials on the unit circle.

Szego recursion, the Verblunsky coefficient <-> measure maps for finite
measures, the CMV / alternate CMV / GGT matrices with their LM and
Householder factorizations, and the Householder coset machinery used to
build Haar unitaries one column at a time.

Conventions: inner products are ``<f, g> = int conj(f) g dmu``; the monic
polynomials obey ``Phi_{n+1} = z Phi_n - conj(alpha_n) Phi*_n`` and
``Phi*_{n+1} = Phi*_n - alpha_n z Phi_n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _quad
from .errors import CyclicityError, NumericalError
from .measures import CIRCLE, SpectralMeasure, integrate_against

INTERIOR = "interior"
TERMINATED = "terminated"
UNIT_TOL = 1e-12
UNITARY_TOL = 1e-12
KRYLOV_TOL = 1e-8


@dataclass(frozen=True)
class VerblunskySeq:
    """Finite list of Verblunsky coefficients.

    ``interior``: every |alpha_j| < 1 (an implicit zero tail follows).
    ``terminated``: |alpha_j| < 1 for j < N-1 and |alpha_{N-1}| = 1; this is
    the coefficient sequence of an N-point measure. The final coefficient is
    renormalized to modulus one exactly.
    """

    coeffs: np.ndarray
    kind: str = INTERIOR

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.coeffs, dtype=complex)).copy()
        if a.ndim != 1:
            raise ValueError("coefficients must be one-dimensional")
        if not np.all(np.isfinite(a)):
            raise ValueError("coefficients must be finite")
        mod = np.abs(a)
        if self.kind == INTERIOR:
            if np.any(mod >= 1.0):
                raise ValueError("interior sequence needs every |alpha_j| < 1")
        elif self.kind == TERMINATED:
            if len(a) < 1:
                raise ValueError("terminated sequence needs N >= 1")
            if np.any(mod[:-1] >= 1.0):
                raise ValueError("terminated sequence needs |alpha_j| < 1 before the end")
            if abs(mod[-1] - 1.0) > UNIT_TOL:
                raise ValueError(f"last coefficient has modulus {mod[-1]!r}, expected 1")
            # leave already-unit values alone so that re-parsing is bit-stable
            if abs(mod[-1] - 1.0) > 4 * np.finfo(float).eps:
                a[-1] = a[-1] / mod[-1]
        else:
            raise ValueError(f"unknown kind {self.kind!r}")
        a.setflags(write=False)
        object.__setattr__(self, "coeffs", a)

    def __len__(self):
        return len(self.coeffs)

    @property
    def terminated(self):
        return self.kind == TERMINATED

    @classmethod
    def terminated_from(cls, coeffs):
        return cls(np.asarray(coeffs, dtype=complex), TERMINATED)

    def rho(self):
        return np.sqrt(np.clip(1.0 - np.abs(self.coeffs) ** 2, 0.0, None))


def _as_seq(alpha):
    if isinstance(alpha, VerblunskySeq):
        return alpha
    a = np.atleast_1d(np.asarray(alpha, dtype=complex))
    kind = TERMINATED if len(a) and abs(abs(a[-1]) - 1.0) <= UNIT_TOL else INTERIOR
    return VerblunskySeq(a, kind)


# polynomials --------------------------------------------------------------------


def szego_polys(alpha, z, upto):
    """Arrays ``Phi[k]``, ``PhiStar[k]`` for k = 0..upto evaluated at ``z``."""
    alpha = _as_seq(alpha)
    if not 0 <= upto <= len(alpha):
        raise IndexError(f"degree {upto} outside 0..{len(alpha)}")
    z = np.asarray(z, dtype=complex)
    phi = np.empty((upto + 1,) + z.shape, dtype=complex)
    phis = np.empty_like(phi)
    phi[0] = 1.0
    phis[0] = 1.0
    for k in range(upto):
        a = alpha.coeffs[k]
        phi[k + 1] = z * phi[k] - np.conj(a) * phis[k]
        phis[k + 1] = phis[k] - a * z * phi[k]
    return phi, phis


def szego_eval(alpha, z, n):
    """Monic ``Phi_n(z)`` and reversed ``Phi*_n(z)`` by the Szego recursion."""
    phi, phis = szego_polys(alpha, z, n)
    return phi[n], phis[n]


def orthonormal_eval(alpha, z, upto):
    """Orthonormal ``phi_0(z), ..., phi_upto(z)``, phi_k = Phi_k / prod_{j<k} rho_j.

    A terminated sequence of length N has orthonormal polynomials only up to
    degree N - 1.
    """
    alpha = _as_seq(alpha)
    limit = len(alpha) - 1 if alpha.terminated else len(alpha)
    if not 0 <= upto <= limit:
        raise IndexError(f"orthonormal degree {upto} outside 0..{limit}")
    phi, _ = szego_polys(alpha, z, upto)
    kappa = np.concatenate([[1.0], np.cumprod(1.0 / alpha.rho()[:upto])])
    kappa = kappa.reshape((-1,) + (1,) * np.ndim(z))
    return phi * kappa


# Verblunsky <-> measure -----------------------------------------------------------


def bernstein_szego_measure(alpha):
    """a.c. measure dtheta / (2pi |phi_n(e^{i theta})|^2) with the given coefficients.

    Its Verblunsky coefficients are ``alpha`` followed by zeros.
    """
    alpha = _as_seq(alpha)
    if alpha.terminated:
        raise ValueError("Bernstein-Szego measures need an interior sequence")
    n = len(alpha)
    scale = float(np.prod(1.0 - np.abs(alpha.coeffs) ** 2))

    def density(theta):
        z = np.exp(1j * np.asarray(theta, dtype=float))
        phin, _ = szego_eval(alpha, z, n)
        return scale / np.abs(phin) ** 2

    return SpectralMeasure.circle_density(density)


def verblunsky_to_measure(alpha):
    """The N-atom measure on the circle whose coefficients are ``alpha``.

    Atoms are eigenvalues of the CMV matrix (= zeros of Phi_N); the weight at
    z_j is the Christoffel number ``1 / sum_{k<N} |phi_k(z_j)|^2``.
    """
    alpha = _as_seq(alpha)
    if not alpha.terminated:
        raise ValueError("only a terminated sequence has a finite measure")
    n = len(alpha)
    z = np.linalg.eigvals(build_structured(alpha, "CMV"))
    z = z / np.abs(z)
    resid = np.abs(szego_eval(alpha, z, n)[0])
    if np.any(resid > 1e-8):
        raise NumericalError(
            f"CMV eigenvalues are not zeros of Phi_N (max residual {resid.max():.3g})",
            operation="verblunsky_to_measure")
    phi = orthonormal_eval(alpha, z, n - 1)
    w = 1.0 / np.sum(np.abs(phi) ** 2, axis=0)
    theta = np.mod(np.angle(z), 2 * np.pi)
    order = np.argsort(theta)
    return SpectralMeasure.atomic(CIRCLE, theta[order], w[order])


def _verblunsky_recursion(zmul, inner, one, count, support, operation):
    """Szego recursion in L^2(mu) realized by an operator ``zmul``.

    ``support`` is the number of support points (None when infinite); the
    coefficient at index support - 1 is projected onto the unit circle.
    """
    phi = one.copy()
    phis = one.copy()
    out = np.empty(count, dtype=complex)
    for k in range(count):
        norm2 = inner(phi, phi).real
        zphi = zmul(phi)
        a = np.conj(inner(one, zphi)) / norm2
        if support is not None and k == support - 1:
            if abs(abs(a) - 1.0) > 1e-6:
                raise NumericalError(
                    f"final coefficient has modulus {abs(a)!r}, expected 1",
                    operation=operation)
            out[k] = a / abs(a)
            return VerblunskySeq(out[: k + 1], TERMINATED)
        if not abs(a) < 1.0 or norm2 <= 0.0:
            raise NumericalError(
                f"moment problem numerically singular at step {k} (|alpha|={abs(a)!r})",
                operation=operation)
        out[k] = a
        phi, phis = zphi - np.conj(a) * phis, phis - a * zphi
    return VerblunskySeq(out, INTERIOR)


def _discrete_verblunsky(z, w, count, support, operation="measure_to_verblunsky"):
    w = np.asarray(w, dtype=float)
    return _verblunsky_recursion(
        lambda f: z * f,
        lambda f, g: np.sum(np.conj(f) * g * w),
        np.ones(len(z), dtype=complex), count, support, operation)


def measure_to_verblunsky(mu, count, *, method="recursion", tol=1e-12, max_panels=2**15):
    """First ``count`` Verblunsky coefficients of a circle measure.

    ``method="recursion"`` runs the Szego recursion on the measure itself
    (atoms plus a GL discretization of the a.c. part, panels doubled from
    2048 until the coefficients move by less than ``tol``);
    ``method="levinson"`` runs the Levinson-Durbin recursion on the
    moments ``c_k = int z^{-k} dmu``. An N-atom measure yields a terminated
    sequence and ``count`` may not exceed N.
    """
    if mu.domain != CIRCLE:
        raise ValueError("measure must live on the circle")
    support = mu.n_atoms if mu.ac is None else None
    if support is not None and count > support:
        raise ValueError(f"an {support}-atom measure has only {support} coefficients")
    if method == "levinson":
        moments = circle_moments(mu, count + 1)
        return levinson_verblunsky(moments, count, support=support)
    if method != "recursion":
        raise ValueError(f"unknown method {method!r}")
    if mu.ac is None:
        return _discrete_verblunsky(mu.points(), mu.weights, count, support)
    prev = None
    panels = 2048
    while panels <= max_panels:
        theta, q = _quad.circle_rule(panels)
        z = np.concatenate([np.exp(1j * theta), mu.points()])
        w = np.concatenate([mu.ac(theta) * q, mu.weights])
        cur = _discrete_verblunsky(z, w, count, None)
        if prev is not None and np.max(np.abs(cur.coeffs - prev.coeffs), initial=0.0) < tol:
            return cur
        prev = cur
        panels *= 2
    return prev


def circle_moments(mu, m):
    """``c_k = int z^{-k} dmu`` for k = 0..m-1."""
    k = np.arange(m)[:, None]
    return np.asarray(integrate_against(mu, lambda t: np.exp(-1j * k * np.asarray(t)[None, :])))


def levinson_verblunsky(moments, count, support=None):
    """Verblunsky coefficients from moments ``c_k = int z^{-k} dmu`` (Levinson-Durbin)."""
    c = np.asarray(moments, dtype=complex)
    if len(c) < count + 1:
        raise ValueError("need count + 1 moments")
    # coefficient arrays of Phi_n in increasing powers
    phi = np.array([1.0 + 0j])
    norm2 = c[0].real
    out = np.empty(count, dtype=complex)
    for k in range(count):
        # int z Phi_k dmu = sum_j phi_j int z^{j+1} dmu = sum_j phi_j conj(c_{j+1})
        s = np.sum(phi * np.conj(c[1:k + 2]))
        a = np.conj(s) / norm2
        if support is not None and k == support - 1:
            out[k] = a / abs(a)
            return VerblunskySeq(out[: k + 1], TERMINATED)
        if not abs(a) < 1.0:
            raise NumericalError(
                f"moment matrix numerically singular at step {k}",
                operation="levinson_verblunsky")
        out[k] = a
        star = np.conj(phi[::-1])
        phi = np.concatenate([[0.0], phi]) - np.conj(a) * np.concatenate([star, [0.0]])
        norm2 *= 1.0 - abs(a) ** 2
    return VerblunskySeq(out, INTERIOR)


# structured matrices ----------------------------------------------------------------


def theta_block(beta):
    """The 2x2 block [[conj b, rho], [rho, -b]], or the 1x1 block (conj b) when |b| = 1."""
    beta = complex(beta)
    m = abs(beta)
    if m > 1.0 + UNIT_TOL:
        raise ValueError(f"|beta| = {m!r} exceeds 1")
    if abs(m - 1.0) <= UNIT_TOL:
        return np.array([[np.conj(beta / m)]])
    rho = math.sqrt(max(0.0, 1.0 - m * m))
    return np.array([[np.conj(beta), rho], [rho, -beta]])


def _direct_sum(blocks, n):
    out = np.zeros((n, n), dtype=complex)
    i = 0
    for b in blocks:
        k = b.shape[0]
        out[i:i + k, i:i + k] = b
        i += k
    if i != n:
        raise AssertionError("block sizes do not add up")
    return out


def _lm_factors(alpha):
    a = alpha.coeffs
    n = len(a)
    blocks = [theta_block(x) for x in a]
    lblocks = blocks[0::2]
    mblocks = [np.eye(1, dtype=complex)] + blocks[1::2]
    return _direct_sum(lblocks, n), _direct_sum(mblocks, n)


def _embedded(alpha, j):
    """Theta(alpha_j) acting on coordinates j, j+1 (or j alone if unimodular)."""
    n = len(alpha)
    out = np.eye(n, dtype=complex)
    b = theta_block(alpha.coeffs[j])
    k = b.shape[0]
    out[j:j + k, j:j + k] = b
    return out


def build_structured(alpha, which="CMV"):
    """L, M, CMV = LM, alternate CMV = ML, or GGT for a terminated sequence."""
    alpha = _as_seq(alpha)
    if not alpha.terminated:
        raise ValueError("structured matrices are built from terminated sequences")
    which = which.upper()
    if which in ("L", "M", "CMV", "ALTCMV"):
        lmat, mmat = _lm_factors(alpha)
        return {"L": lmat, "M": mmat, "CMV": lmat @ mmat, "ALTCMV": mmat @ lmat}[which]
    if which == "GGT":
        g = np.eye(len(alpha), dtype=complex)
        for j in range(len(alpha)):
            g = g @ _embedded(alpha, j)
        return g
    raise ValueError(f"unknown matrix kind {which!r}")


def cmv_sparsity_mask(n):
    """Boolean mask of entries allowed to be nonzero in an n x n CMV matrix."""
    a = np.full(n, 0.5 + 0.5j)
    a[-1] = 1.0
    lmat, mmat = _lm_factors(VerblunskySeq(a, TERMINATED))
    return ((np.abs(lmat) > 0).astype(int) @ (np.abs(mmat) > 0).astype(int)) > 0


def check_cmv_factorization(alpha, which="CMV"):
    """Max-norm residual of C(a0, a1, ...) = [Theta(a0) + I][I_1 + C~(a1, ...)].

    With ``which="GGT"`` the identity checked is the AGR factorization
    G(a0, a1, ...) = [Theta(a0) + I][I_1 + G(a1, ...)].
    """
    alpha = _as_seq(alpha)
    n = len(alpha)
    if n < 2:
        raise ValueError("factorization needs N >= 2")
    tail = VerblunskySeq(alpha.coeffs[1:], TERMINATED)
    left = _direct_sum([theta_block(alpha.coeffs[0]), np.eye(n - 2)], n)
    if which.upper() == "GGT":
        lhs = build_structured(alpha, "GGT")
        inner = build_structured(tail, "GGT")
    else:
        lhs = build_structured(alpha, "CMV")
        inner = build_structured(tail, "AltCMV")
    right = _direct_sum([np.eye(1), inner], n)
    return float(np.max(np.abs(lhs - left @ right)))


# Householder cosets and coefficient stripping --------------------------------------


def unitarity_defect(u):
    u = np.asarray(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])), initial=0.0))


def _require_unitary(u, what="matrix"):
    d = unitarity_defect(u)
    if d > 1e-10:
        raise ValueError(f"{what} is not unitary (defect {d:.3g})")


def sigma(f):
    """Coset representative sigma(f) with sigma(f) e_1 = f.

    For f not colinear with e_1 this is Theta(beta) on span{e_1, e_2} and the
    identity on its complement, where beta = conj(f_1) and e_2 is the unit
    vector along f - f_1 e_1. For f = lam e_1 it is lam * I.
    """
    f = np.asarray(f, dtype=complex)
    n = len(f)
    if abs(np.linalg.norm(f) - 1.0) > 1e-12:
        raise ValueError("f must be a unit vector")
    r = f.copy()
    r[0] = 0.0
    kappa = np.linalg.norm(r)
    if kappa == 0.0:
        return f[0] * np.eye(n, dtype=complex)
    e = np.zeros((n, 2), dtype=complex)
    e[0, 0] = 1.0
    e[:, 1] = r / kappa
    beta = np.conj(f[0])
    th = np.array([[np.conj(beta), kappa], [kappa, -beta]])
    return np.eye(n, dtype=complex) + e @ (th - np.eye(2)) @ e.conj().T


def haar_compose(f, w):
    """sigma(f) (I_1 + W)."""
    f = np.asarray(f, dtype=complex)
    w = np.atleast_2d(np.asarray(w, dtype=complex)) if len(f) > 1 else np.zeros((0, 0))
    if w.shape != (len(f) - 1, len(f) - 1):
        raise ValueError("W must be (n-1) x (n-1)")
    if w.size:
        _require_unitary(w, "W")
    return sigma(f) @ _direct_sum([np.eye(1), w], len(f)) if w.size else sigma(f)


def haar_decompose(u):
    """Inverse of :func:`haar_compose`: returns (f, W) with U = sigma(f)(I_1 + W)."""
    u = np.asarray(u, dtype=complex)
    _require_unitary(u, "U")
    f = u[:, 0].copy()
    f /= np.linalg.norm(f)
    rest = sigma(f).conj().T @ u
    return f, rest[1:, 1:]


def is_cyclic(u, e1=None, tol=KRYLOV_TOL):
    """Whether the Krylov vectors U^k e_1, k < n, have full numerical rank."""
    u = np.asarray(u, dtype=complex)
    n = u.shape[0]
    v = np.zeros(n, dtype=complex) if e1 is None else np.asarray(e1, dtype=complex)
    if e1 is None:
        v[0] = 1.0
    cols = [v]
    for _ in range(n - 1):
        cols.append(u @ cols[-1])
    s = np.linalg.svd(np.column_stack(cols), compute_uv=False)
    return bool(s[-1] > tol * s[0])


def compose_theta(alpha_tilde, u_prime):
    """[Theta(a~) + I_{n-2}][I_1 + U'] in the standard basis."""
    u_prime = np.atleast_2d(np.asarray(u_prime, dtype=complex))
    n = u_prime.shape[0] + 1
    left = _direct_sum([theta_block(alpha_tilde), np.eye(n - 2)], n)
    return left @ _direct_sum([np.eye(1), u_prime], n)


def strip_coefficient(u, return_basis=False):
    """Split U as [Theta(a~) + I][I_1 + U'] with a~ = conj(<e_1, U e_1>).

    ``U'`` is expressed in an orthonormal basis of [e_1]^perp whose first
    vector is e_2, the unit vector along U e_1 - <e_1, U e_1> e_1 (so that
    <U e_1, e_2> > 0). The basis, as columns of an n x n unitary whose first
    two columns are e_1 and e_2, is returned as well when requested.
    """
    u = np.asarray(u, dtype=complex)
    n = u.shape[0]
    _require_unitary(u, "U")
    if n < 2:
        raise ValueError("need n >= 2 to strip a coefficient")
    if not is_cyclic(u):
        raise CyclicityError("e_1 is not cyclic for U", operation="strip_coefficient")
    f = u[:, 0]
    at = complex(np.conj(f[0]))
    r = f.copy()
    r[0] = 0.0
    kappa = np.linalg.norm(r)
    if kappa <= 1e-14:
        raise CyclicityError("<U e_1, e_1> has modulus one", operation="strip_coefficient")
    t = (r / kappa)[1:]
    if np.linalg.norm(t - np.eye(n - 1)[0]) < 1e-15:
        qc = np.eye(n - 1, dtype=complex)
    else:
        # first QR column is t up to a phase; the rest span its complement
        qc = scipy.linalg.qr(np.column_stack([t, np.eye(n - 1)]))[0][:, : n - 1]
        qc[:, 0] = t
    basis = _direct_sum([np.eye(1), qc], n)
    ut = basis.conj().T @ u @ basis
    th = _direct_sum([theta_block(at), np.eye(n - 2)], n)
    x = th.conj().T @ ut
    u_prime = x[1:, 1:]
    if return_basis:
        return at, u_prime, basis
    return at, u_prime


def unitary_verblunsky(u):
    """Verblunsky coefficients of the spectral measure of (U, e_1).

    Runs the Szego recursion with ``z`` acting as U on vectors Phi_k(U) e_1,
    so no eigendecomposition is needed.
    """
    u = np.asarray(u, dtype=complex)
    n = u.shape[0]
    if not is_cyclic(u):
        raise CyclicityError("e_1 is not cyclic for U", operation="unitary_verblunsky")
    e1 = np.zeros(n, dtype=complex)
    e1[0] = 1.0
    return _verblunsky_recursion(lambda v: u @ v, np.vdot, e1, n, n, "unitary_verblunsky")


def unitary_spectral_measure(u):
    """Spectral measure of (U, e_1): eigenvalues with weights |<v_j, e_1>|^2."""
    t, z = scipy.linalg.schur(np.asarray(u, dtype=complex), output="complex")
    lam = np.diag(t)
    w = np.abs(z[0, :]) ** 2
    theta = np.mod(np.angle(lam), 2 * np.pi)
    order = np.argsort(theta)
    return SpectralMeasure.atomic(CIRCLE, theta[order], w[order])
