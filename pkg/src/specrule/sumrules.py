"""Both sides of the Szego-Verblunsky and Killip-Simon sum rules.

Szego-Verblunsky (circle)::

    -sum_j log(1 - |alpha_j|^2) = -int log w dtheta/2pi

Killip-Simon (line)::

    Q(mu) + sum_n F(E_n) = sum_n [b_n^2 / 4 + G(a_n) / 2]

with G(a) = a^2 - 1 - log a^2, F(E) = (1/2) int_2^|E| sqrt(x^2 - 4) dx and
Q(mu) = (1/4pi) int log(sqrt(4 - x^2) / (2pi w)) sqrt(4 - x^2) dx. All terms
on both sides are nonnegative.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _quad
from .measures import CIRCLE, cluster_grid, entropy_ac, lebesgue_circle
from .oprl import FiniteRankPerturbation, JacobiParams, PerturbedSpectrum, perturbed_spectral_data
from .opuc import VerblunskySeq, bernstein_szego_measure

SZEGO = "SzegoVerblunsky"
KILLIP_SIMON = "KillipSimon"
GAP_TOL = 1e-3
SUPPORT_GRID = 4096


@dataclass
class SumRuleReport:
    """Both sides of a sum rule with their labeled nonnegative terms."""

    rule: str
    measure_side: float
    coefficient_side: float
    measure_terms: dict = field(default_factory=dict)
    coefficient_terms: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def difference(self):
        if math.isinf(self.measure_side) and math.isinf(self.coefficient_side):
            return 0.0
        return self.measure_side - self.coefficient_side

    def min_term(self):
        vals = [np.min(np.atleast_1d(v)) for d in (self.measure_terms, self.coefficient_terms)
                for v in d.values() if np.size(v)]
        return float(min(vals)) if vals else 0.0

    def to_dict(self):
        def enc(x):
            if isinstance(x, (list, tuple, np.ndarray)):
                return [enc(v) for v in np.asarray(x, dtype=float).tolist()]
            x = float(x)
            return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")

        return {
            "v": 1,
            "type": "SumRuleReport",
            "rule": self.rule,
            "measure_side": enc(self.measure_side),
            "coefficient_side": enc(self.coefficient_side),
            "measure_terms": {k: enc(v) for k, v in self.measure_terms.items()},
            "coefficient_terms": {k: enc(v) for k, v in self.coefficient_terms.items()},
            "metadata": self.metadata,
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    def render(self):
        """Two-column text table: measure side | coefficient side."""
        left = [(k, v) for k, v in self.measure_terms.items()]
        right = [(k, v) for k, v in self.coefficient_terms.items()]

        def fmt(item):
            k, v = item
            if np.ndim(v):
                v = float(np.sum(v))
                k = f"sum {k}"
            return f"{k:<18}{float(v):>20.12g}"

        rows = [f"{'measure side':<38} | coefficient side", "-" * 38 + "-+-" + "-" * 38]
        for i in range(max(len(left), len(right))):
            a = fmt(left[i]) if i < len(left) else ""
            b = fmt(right[i]) if i < len(right) else ""
            rows.append(f"{a:<38} | {b}")
        rows.append("-" * 38 + "-+-" + "-" * 38)
        rows.append(f"{'total':<18}{self.measure_side:>20.12g} | "
                    f"{'total':<18}{self.coefficient_side:>20.12g}")
        rows.append(f"difference {self.difference:.3g}")
        return "\n".join(rows)


# Szego-Verblunsky ------------------------------------------------------------------


def szego_terms(alpha):
    a = alpha.coeffs if isinstance(alpha, VerblunskySeq) else np.atleast_1d(np.asarray(alpha))
    m = np.abs(a) ** 2
    with np.errstate(divide="ignore"):
        return np.where(m < 1.0, -np.log1p(-np.minimum(m, 1.0)), np.inf)


def szego_coefficient_side(alpha):
    """-sum_j log(1 - |alpha_j|^2) over the stored coefficients."""
    t = szego_terms(alpha)
    if np.any(np.isinf(t)):
        return math.inf
    return math.fsum(t)


def szego_measure_side(mu, **kw):
    """-int log w dtheta/2pi, i.e. the entropy of Lebesgue measure relative to mu."""
    if mu.domain != CIRCLE:
        raise ValueError("Szego measure side needs a circle measure")
    return entropy_ac(lebesgue_circle(), mu, **kw)


def szego_report(alpha, mu=None):
    """Sum-rule report; ``mu`` defaults to the Bernstein-Szego measure of ``alpha``."""
    alpha = alpha if isinstance(alpha, VerblunskySeq) else VerblunskySeq(alpha)
    if mu is None:
        mu = bernstein_szego_measure(alpha)
    ms = szego_measure_side(mu)
    return SumRuleReport(
        SZEGO, ms, szego_coefficient_side(alpha),
        measure_terms={"-int log w": ms},
        coefficient_terms={"-log(1-|alpha_j|^2)": szego_terms(alpha)},
        metadata={"coefficients": len(alpha), "tail": "zero"})


# Killip-Simon -----------------------------------------------------------------------


def ks_G(a):
    """G(a) = a^2 - 1 - log a^2, and +inf for a <= 0."""
    a = np.asarray(a, dtype=float)
    pos = a > 0
    safe = np.where(pos, a, 1.0)
    out = np.where(pos, safe * safe - 1.0 - 2.0 * np.log(safe), np.inf)
    return out[()] if out.ndim == 0 else out


def ks_F(e):
    """F(E) = (1/2) int_2^|E| sqrt(x^2 - 4) dx; 0 for |E| <= 2.

    With |E| = 2 cosh t this is sinh(2t)/2 - t, summed as a series for
    small t to avoid cancellation.
    """
    e = np.abs(np.asarray(e, dtype=float))
    y = np.maximum(e - 2.0, 0.0) / 2.0
    t = np.log1p(y + np.sqrt(y * (y + 2.0)))
    small = t < 0.1
    direct = 0.5 * np.sinh(2.0 * t) - t
    u = 2.0 * t
    series = np.zeros_like(t)
    term = u**3 / 6.0
    for k in range(1, 9):
        series = series + 0.5 * term
        term = term * u * u / ((2 * k + 2) * (2 * k + 3))
    out = np.where(small, series, direct)
    return out[()] if out.ndim == 0 else out


def _ac_density(mu):
    if isinstance(mu, PerturbedSpectrum):
        return mu.density
    if mu.ac is None:
        return None
    return mu.ac


def support_gap(w, lo=-2.0, hi=2.0, k=SUPPORT_GRID):
    """Total length of grid cells of [lo, hi] on which w vanishes at both ends."""
    x = cluster_grid(lo, hi, k)
    zero = np.asarray(w(x)) <= 0
    both = zero[:-1] & zero[1:]
    return float(np.sum(np.diff(x)[both]))


def ks_Q(mu, *, tol=1e-11, inf_threshold=1e6):
    """Q(mu) by graded Gauss-Legendre in x; +inf when w misses part of [-2, 2].

    ``mu`` is a line measure (only its a.c. part is read) or a
    :class:`PerturbedSpectrum`.
    """
    w = _ac_density(mu)
    if w is None or support_gap(w) >= GAP_TOL:
        return math.inf

    def integrand(x):
        s = np.sqrt(np.clip(4.0 - x * x, 0.0, None))
        wx = np.asarray(w(x), dtype=float)
        out = np.zeros_like(x)
        pos = s > 0
        with np.errstate(divide="ignore"):
            out[pos] = np.log(s[pos] / (2 * np.pi * wx[pos])) * s[pos]
        return out / (4 * np.pi)

    return _quad.integrate(integrand, -2.0, 2.0, tol=tol, panels=16, levels=12,
                           grade_ends=(True, True), inf_threshold=inf_threshold,
                           operation="ks_Q")


def _eigenvalues_of(mu):
    if isinstance(mu, PerturbedSpectrum):
        return mu.eigenvalues
    return mu.positions


def ks_measure_side(mu, eigenvalues=None):
    """Q(mu) + sum F(E_n); eigenvalues default to the atoms of ``mu``."""
    e = _eigenvalues_of(mu) if eigenvalues is None else np.asarray(eigenvalues, dtype=float)
    q = ks_Q(mu)
    return q + math.fsum(np.atleast_1d(ks_F(e)))


def _params(j):
    if isinstance(j, (JacobiParams, FiniteRankPerturbation)):
        return np.asarray(j.a), np.asarray(j.b)
    raise TypeError("expected JacobiParams or FiniteRankPerturbation")


def ks_coefficient_side(j):
    """sum [b_n^2/4 + G(a_n)/2] over stored parameters (the free tail adds 0)."""
    a, b = _params(j)
    return math.fsum(np.concatenate([b**2 / 4.0, ks_G(a) / 2.0]))


def ks_report(p, spectrum=None):
    """Killip-Simon report for a finite-rank perturbation."""
    if spectrum is None:
        spectrum = perturbed_spectral_data(p)
    a, b = _params(p)
    q = ks_Q(spectrum)
    f = np.atleast_1d(ks_F(spectrum.eigenvalues))
    return SumRuleReport(
        KILLIP_SIMON, q + math.fsum(f), ks_coefficient_side(p),
        measure_terms={"Q": q, "F(E_n)": f},
        coefficient_terms={"b_n^2/4": b**2 / 4.0, "G(a_n)/2": ks_G(a) / 2.0},
        metadata={"prefix": int(len(b)), "eigenvalues": np.asarray(spectrum.eigenvalues).tolist()})


# gems ---------------------------------------------------------------------------------


def gem_report(obj, mu=None, *, checkpoints=None, tol=1e-7):
    """Finiteness proxies for the two sides of each gem.

    For Jacobi data: sum (a_n - 1)^2 + b_n^2, whether the essential support
    is [-2, 2], whether Q is finite, and sum (|E| - 2)^{3/2}. For Verblunsky
    data: partial sums of |alpha_j|^2 and of -int log w for the
    Bernstein-Szego measures of the truncations at ``checkpoints``, by
    quadrature to relative ``tol`` (long truncations put zeros of Phi_n very
    near the circle, which limits attainable accuracy).
    """
    if isinstance(obj, (JacobiParams, FiniteRankPerturbation)):
        a, b = _params(obj)
        if mu is None:
            if not isinstance(obj, FiniteRankPerturbation):
                raise ValueError("a spectral measure is needed for a bare JacobiParams")
            mu = perturbed_spectral_data(obj)
        e = np.asarray(_eigenvalues_of(mu), dtype=float)
        outside = e[np.abs(e) > 2.0]
        w = _ac_density(mu)
        gap = support_gap(w) if w is not None else 4.0
        q = ks_Q(mu)
        return {
            "kind": "jacobi",
            "sum_a1_b2": float(math.fsum((a - 1.0) ** 2) + math.fsum(b**2)),
            "partial_sums_a1_b2": np.cumsum(np.concatenate([(a - 1.0) ** 2 + b**2])).tolist(),
            # finite-rank data: essential spectrum is [-2, 2] iff the a.c. part fills it
            "ess_support_is_interval": bool(gap < GAP_TOL),
            "support_gap": gap,
            "Q": q,
            "Q_finite": bool(math.isfinite(q)),
            "sum_E_minus_2_pow_1_5": float(math.fsum((np.abs(outside) - 2.0) ** 1.5)),
        }
    alpha = obj if isinstance(obj, VerblunskySeq) else VerblunskySeq(obj)
    n = len(alpha)
    sq = np.cumsum(np.abs(alpha.coeffs) ** 2)
    if checkpoints is None:
        checkpoints = sorted({int(c) for c in np.geomspace(1, n, min(n, 8))})
    meas = [szego_measure_side(bernstein_szego_measure(alpha.coeffs[:c]), tol=tol)
            for c in checkpoints]
    return {
        "kind": "verblunsky",
        "sum_alpha2": float(sq[-1]) if n else 0.0,
        "partial_sums_alpha2": sq.tolist(),
        "checkpoints": list(checkpoints),
        "minus_int_log_w": meas,
    }

