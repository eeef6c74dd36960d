"""Seeded samplers for the random-matrix ensembles.

All randomness is drawn from an :class:`~specrule.rng.RngStream`, so a
given ``(seed, stream)`` reproduces every sample bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import opuc
from .measures import SpectralMeasure, LINE
from .oprl import JacobiParams, jacobi_to_measure, tridiag_eigensolve
from .rng import RngStream

CUE_ALPHA = "CueAlpha"
CUE_MEASURE = "CueMeasure"
GUE_JACOBI = "GueJacobi"
GUE_MEASURE = "GueMeasure"
HAAR_UNITARY = "HaarUnitary"
CUE_MEASURE_MAX_N = 64


@dataclass
class EnsembleSample:
    kind: str
    payload: Any
    n: int
    seed: int
    stream: int
    extra: dict = field(default_factory=dict)


# scalar generators ----------------------------------------------------------------------


def sample_exponential(rng, size=None):
    """Unit-rate exponentials, -log U."""
    return -np.log(rng.uniform(size))


def _gamma_at_least_one(rng, shape):
    # Marsaglia-Tsang squeeze/rejection; shape is an array of values >= 1
    d = shape - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty(shape.size)
    todo = np.arange(shape.size)
    while todo.size:
        m = todo.size
        z = rng.standard_normal(m)
        u = rng.uniform(m)
        v = (1.0 + c[todo] * z) ** 3
        ok = v > 0
        with np.errstate(invalid="ignore", divide="ignore"):
            lv = np.where(ok, np.log(np.where(ok, v, 1.0)), -np.inf)
            accept = ok & ((u < 1.0 - 0.0331 * z**4)
                           | (np.log(u) < 0.5 * z * z + d[todo] * (1.0 - v + lv)))
        out[todo[accept]] = d[todo[accept]] * v[accept]
        todo = todo[~accept]
    return out


def sample_gamma(rng, shape, rate=1.0, size=None):
    """Gamma(shape, rate) draws with density rate^a x^(a-1) e^(-rate x) / Gamma(a).

    Marsaglia-Tsang rejection; shapes below one are boosted by
    Gamma(a) = Gamma(a + 1) U^(1/a). ``shape`` and ``rate`` broadcast
    against ``size``.
    """
    shape_arr, rate_arr = np.broadcast_arrays(np.asarray(shape, float), np.asarray(rate, float))
    if not (np.all(shape_arr > 0) and np.all(rate_arr > 0)):
        raise ValueError("shape and rate must be positive")
    out_shape = shape_arr.shape if size is None else (size if isinstance(size, tuple) else (size,))
    a = np.broadcast_to(shape_arr, out_shape).ravel()
    small = a < 1.0
    g = _gamma_at_least_one(rng, np.where(small, a + 1.0, a))
    if np.any(small):
        g[small] *= rng.uniform(int(small.sum())) ** (1.0 / a[small])
    g = g.reshape(out_shape) / np.broadcast_to(rate_arr, out_shape)
    return float(g) if size is None and g.ndim == 0 else g


# Verblunsky ensembles --------------------------------------------------------------------


def sample_kappa(rng, ell, size=None):
    """Draws from kappa_ell: density (ell+1)/pi (1-|a|^2)^ell on the disc, or uniform on the circle for ell = -1.

    ``ell`` may be an array, broadcast against ``size``.
    """
    ell = np.asarray(ell)
    if np.any(ell < -1):
        raise ValueError("ell must be >= -1")
    if size is None and ell.ndim:
        size = ell.shape
    phase = rng.phase(size)
    u = rng.uniform(size)
    with np.errstate(divide="ignore"):
        # |a|^2 ~ Beta(1, ell + 1), by inversion
        r = np.sqrt(-np.expm1(np.log(u) / (ell + 1.0)))
    out = np.where(ell == -1, 1.0, r) * phase
    return complex(out) if np.ndim(out) == 0 else out


def sample_cue_verblunsky(rng, n):
    """Terminated coefficients with alpha_j ~ kappa_{n-2-j} independently."""
    if n < 1:
        raise ValueError("n must be >= 1")
    a = np.asarray(sample_kappa(rng, n - 2 - np.arange(n)), dtype=complex)
    a[-1] = a[-1] / abs(a[-1])
    return opuc.VerblunskySeq(a, opuc.TERMINATED)


def sample_cue_spectral_measure(rng, n):
    """Spectral measure (eigenvalues and weights) of a CUE(n) matrix at e_1."""
    if n > CUE_MEASURE_MAX_N:
        raise ValueError(f"n must be <= {CUE_MEASURE_MAX_N}")
    return opuc.verblunsky_to_measure(sample_cue_verblunsky(rng, n))


def sample_simplex_weights(rng, n):
    """Uniform point of the simplex: normalized exponentials, summing to 1 exactly."""
    if n < 1:
        raise ValueError("n must be >= 1")
    e = sample_exponential(rng, n)
    w = e / math.fsum(e)
    w[-1] = 1.0 - math.fsum(w[:-1])
    return w


def sample_sphere(rng, n):
    """Uniform unit vector in C^n."""
    z = rng.complex_normal(n)
    return z / np.linalg.norm(z)


def sample_haar_unitary(rng, n):
    """Haar unitary built column by column: U_k = sigma(f_k)(I_1 + U_{k-1})."""
    if n < 1:
        raise ValueError("n must be >= 1")
    u = np.array([[complex(rng.phase())]])
    for k in range(2, n + 1):
        u = opuc.haar_compose(sample_sphere(rng, k), u)
    return u


# GUE ----------------------------------------------------------------------------------


def sample_gue_jacobi(rng, n):
    """Tridiagonal GUE scaled to spectrum [-2, 2].

    b_k ~ N(0, 1/n) and a_k^2 ~ Gamma(shape n - k, scale 1/n), k = 1..n-1.
    This is the Householder tridiagonalization of a Hermitian matrix with
    E M_ii^2 = E |M_ij|^2 = 1/n.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    b = rng.standard_normal(n) / math.sqrt(n)
    a2 = sample_gamma(rng, n - np.arange(1.0, n), n)
    return JacobiParams(np.sqrt(a2), b)


def sample_gue_dense(rng, n):
    """Dense Hermitian matrix with E M_ii^2 = 1/n and E (Re M_ij)^2 = E (Im M_ij)^2 = 1/(2n)."""
    d = rng.standard_normal(n) / math.sqrt(n)
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    off = np.triu(g, 1) / math.sqrt(2.0 * n)
    return np.diag(d).astype(complex) + off + off.conj().T


def sample_gue_spectral_measure(rng, n):
    """Spectral measure at e_1 of a tridiagonal GUE draw (weights from eigenvectors)."""
    j = sample_gue_jacobi(rng, n)
    if n <= 12:
        return jacobi_to_measure(j)
    x, w = tridiag_eigensolve(j)
    return SpectralMeasure.atomic(LINE, x, w / math.fsum(w))


def sample(kind, n, seed, stream=0):
    """Dispatch used by the CLI: one :class:`EnsembleSample` of the given kind."""
    rng = RngStream(seed, stream)
    makers = {
        CUE_ALPHA: sample_cue_verblunsky,
        CUE_MEASURE: sample_cue_spectral_measure,
        GUE_JACOBI: sample_gue_jacobi,
        GUE_MEASURE: sample_gue_spectral_measure,
        HAAR_UNITARY: sample_haar_unitary,
    }
    if kind not in makers:
        raise ValueError(f"unknown ensemble {kind!r}")
    return EnsembleSample(kind, makers[kind](rng, n), n, rng.seed, rng.stream)
