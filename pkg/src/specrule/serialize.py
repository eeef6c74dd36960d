"""JSON and CSV formats for the package's data types.

Every JSON object carries ``"v": 1`` and a ``"type"`` tag. Reals are
written with Python's shortest round-trip repr, so ``loads(dumps(x))``
reproduces every float bit for bit; infinities are the strings ``"inf"``
and ``"-inf"``. CSV files use '.' decimals and 17 significant digits.
"""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

from .ensembles import EnsembleSample
from .measures import CIRCLE, DOMAINS, ACPart, SpectralMeasure
from .oprl import FiniteRankPerturbation, JacobiParams
from .opuc import INTERIOR, TERMINATED, VerblunskySeq
from .sumrules import SumRuleReport

VERSION = 1


class SchemaError(ValueError):
    """Malformed or unsupported JSON input; ``path`` locates the bad field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


# reals ----------------------------------------------------------------------------------


def _real(x):
    x = float(x)
    if math.isfinite(x):
        return x
    if math.isnan(x):
        raise ValueError("NaN cannot be serialized")
    return "inf" if x > 0 else "-inf"


def _reals(xs):
    return [_real(x) for x in np.asarray(xs, dtype=float).ravel()]


def _read_real(v, path):
    if isinstance(v, bool):
        raise SchemaError("expected a number", path)
    if isinstance(v, (int, float)):
        return float(v)
    if v in ("inf", "-inf"):
        return float(v)
    raise SchemaError(f"expected a number, got {v!r}", path)


def _read_reals(v, path):
    if not isinstance(v, list):
        raise SchemaError("expected a list of numbers", path)
    return np.array([_read_real(x, f"{path}[{i}]") for i, x in enumerate(v)], dtype=float)


def _complexes(zs):
    z = np.asarray(zs, dtype=complex).ravel()
    return [[_real(c.real), _real(c.imag)] for c in z]


def _read_complexes(v, path):
    if not isinstance(v, list):
        raise SchemaError("expected a list of [re, im] pairs", path)
    out = np.empty(len(v), dtype=complex)
    for i, pair in enumerate(v):
        p = f"{path}[{i}]"
        if not (isinstance(pair, list) and len(pair) == 2):
            raise SchemaError("expected [re, im]", p)
        out[i] = complex(_read_real(pair[0], p + "[0]"), _read_real(pair[1], p + "[1]"))
    return out


def _field(d, key, path):
    if not isinstance(d, dict):
        raise SchemaError("expected an object", path)
    if key not in d:
        raise SchemaError(f"missing field {key!r}", path)
    return d[key]


def _check_header(d, expected, path=""):
    if not isinstance(d, dict):
        raise SchemaError("expected an object", path)
    v = d.get("v")
    if v != VERSION:
        raise SchemaError(f"unsupported schema version {v!r} (expected {VERSION})", path + ".v")
    t = d.get("type")
    if expected is not None and t != expected:
        raise SchemaError(f"expected type {expected!r}, got {t!r}", path + ".type")
    return t


def _build(fn, path):
    # domain-type validation errors become schema errors at this path
    try:
        return fn()
    except SchemaError:
        raise
    except ValueError as exc:
        raise SchemaError(str(exc), path) from exc


# per-type encoders ------------------------------------------------------------------------


def verblunsky_to_dict(a):
    return {"v": VERSION, "type": "VerblunskySeq", "kind": a.kind, "coeffs": _complexes(a.coeffs)}


def verblunsky_from_dict(d, path="$"):
    _check_header(d, "VerblunskySeq", path)
    kind = _field(d, "kind", path)
    if kind not in (INTERIOR, TERMINATED):
        raise SchemaError(f"unknown kind {kind!r}", path + ".kind")
    coeffs = _read_complexes(_field(d, "coeffs", path), path + ".coeffs")
    return _build(lambda: VerblunskySeq(coeffs, kind), path)


def matrix_to_dict(u):
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError("expected a square matrix")
    return {"v": VERSION, "type": "ComplexMatrix", "n": int(u.shape[0]),
            "entries": _complexes(u)}


def matrix_from_dict(d, path="$"):
    _check_header(d, "ComplexMatrix", path)
    n = _field(d, "n", path)
    if not isinstance(n, int) or isinstance(n, bool) or n < 0:
        raise SchemaError("n must be a nonnegative integer", path + ".n")
    e = _read_complexes(_field(d, "entries", path), path + ".entries")
    if e.size != n * n:
        raise SchemaError(f"expected {n * n} entries, got {e.size}", path + ".entries")
    return e.reshape(n, n)


def jacobi_to_dict(j):
    return {"v": VERSION, "type": "JacobiParams", "a": _reals(j.a), "b": _reals(j.b)}


def jacobi_from_dict(d, path="$"):
    _check_header(d, "JacobiParams", path)
    a = _read_reals(_field(d, "a", path), path + ".a")
    b = _read_reals(_field(d, "b", path), path + ".b")
    return _build(lambda: JacobiParams(a, b), path)


def perturbation_to_dict(p):
    return {"v": VERSION, "type": "FiniteRankPerturbation",
            "prefix": {"a": _reals(p.a), "b": _reals(p.b)}}


def perturbation_from_dict(d, path="$"):
    _check_header(d, "FiniteRankPerturbation", path)
    pre = _field(d, "prefix", path)
    a = _read_reals(_field(pre, "a", path + ".prefix"), path + ".prefix.a")
    b = _read_reals(_field(pre, "b", path + ".prefix"), path + ".prefix.b")
    return _build(lambda: FiniteRankPerturbation(a, b), path)


def measure_to_dict(mu):
    """Atoms plus the tabulated a.c. part (a callable density is not stored)."""
    ac = None
    if mu.ac is not None:
        ac = {"grid": _reals(mu.ac.grid), "values": _reals(mu.ac.values)}
    return {
        "v": VERSION,
        "type": "SpectralMeasure",
        "domain": mu.domain,
        "atoms": [{"pos": _real(p), "weight": _real(w)}
                  for p, w in zip(mu.positions, mu.weights)],
        "ac": ac,
    }


def measure_from_dict(d, path="$"):
    _check_header(d, "SpectralMeasure", path)
    domain = _field(d, "domain", path)
    if domain not in DOMAINS:
        raise SchemaError(f"unknown domain {domain!r}", path + ".domain")
    atoms = _field(d, "atoms", path)
    if not isinstance(atoms, list):
        raise SchemaError("expected a list", path + ".atoms")
    pos = np.array([_read_real(_field(a, "pos", f"{path}.atoms[{i}]"), f"{path}.atoms[{i}].pos")
                    for i, a in enumerate(atoms)], dtype=float)
    wts = np.array([_read_real(_field(a, "weight", f"{path}.atoms[{i}]"),
                               f"{path}.atoms[{i}].weight")
                    for i, a in enumerate(atoms)], dtype=float)
    ac = d.get("ac")
    part = None
    if ac is not None:
        grid = _read_reals(_field(ac, "grid", path + ".ac"), path + ".ac.grid")
        vals = _read_reals(_field(ac, "values", path + ".ac"), path + ".ac.values")
        part = ACPart(grid, vals, periodic=(domain == CIRCLE))
    return _build(lambda: SpectralMeasure(domain, pos, wts, part), path)


def report_to_dict(r):
    return r.to_dict()


def report_from_dict(d, path="$"):
    _check_header(d, "SumRuleReport", path)

    def terms(key):
        t = _field(d, key, path)
        if not isinstance(t, dict):
            raise SchemaError("expected an object", f"{path}.{key}")
        out = {}
        for k, v in t.items():
            p = f"{path}.{key}.{k}"
            out[k] = _read_reals(v, p) if isinstance(v, list) else _read_real(v, p)
        return out

    return SumRuleReport(
        rule=_field(d, "rule", path),
        measure_side=_read_real(_field(d, "measure_side", path), path + ".measure_side"),
        coefficient_side=_read_real(_field(d, "coefficient_side", path),
                                    path + ".coefficient_side"),
        measure_terms=terms("measure_terms"),
        coefficient_terms=terms("coefficient_terms"),
        metadata=d.get("metadata", {}),
    )


_ENCODERS = [
    (VerblunskySeq, verblunsky_to_dict),
    (JacobiParams, jacobi_to_dict),
    (FiniteRankPerturbation, perturbation_to_dict),
    (SpectralMeasure, measure_to_dict),
    (SumRuleReport, report_to_dict),
]

_DECODERS = {
    "VerblunskySeq": verblunsky_from_dict,
    "ComplexMatrix": matrix_from_dict,
    "JacobiParams": jacobi_from_dict,
    "FiniteRankPerturbation": perturbation_from_dict,
    "SpectralMeasure": measure_from_dict,
    "SumRuleReport": report_from_dict,
}


def to_dict(obj):
    if isinstance(obj, np.ndarray):
        return matrix_to_dict(obj)
    if isinstance(obj, EnsembleSample):
        return sample_to_dict(obj)
    for cls, enc in _ENCODERS:
        if isinstance(obj, cls):
            return enc(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def from_dict(d, path="$"):
    t = _check_header(d, None, path)
    if t == "EnsembleSample":
        return sample_from_dict(d, path)
    if t not in _DECODERS:
        raise SchemaError(f"unknown type {t!r}", path + ".type")
    return _DECODERS[t](d, path)


def sample_to_dict(s):
    return {"v": VERSION, "type": "EnsembleSample", "kind": s.kind, "n": s.n,
            "seed": s.seed, "stream": s.stream, "payload": to_dict(s.payload)}


def sample_from_dict(d, path="$"):
    _check_header(d, "EnsembleSample", path)
    payload = from_dict(_field(d, "payload", path), path + ".payload")
    ints = {}
    for key in ("n", "seed", "stream"):
        v = _field(d, key, path)
        if not isinstance(v, int) or isinstance(v, bool):
            raise SchemaError("expected an integer", f"{path}.{key}")
        ints[key] = v
    return EnsembleSample(_field(d, "kind", path), payload, ints["n"], ints["seed"],
                          ints["stream"])


# text I/O -----------------------------------------------------------------------------


def dumps(obj):
    """JSON text for one object or a list of objects."""
    if isinstance(obj, (list, tuple)):
        return json.dumps([to_dict(o) for o in obj])
    return json.dumps(to_dict(obj))


def loads(text):
    """Inverse of :func:`dumps`; JSON syntax errors carry line and column."""
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    if isinstance(d, list):
        return [from_dict(x, f"$[{i}]") for i, x in enumerate(d)]
    return from_dict(d)


def dump(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))
        fh.write("\n")


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


# CSV ----------------------------------------------------------------------------------


def fmt_real(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _csv_text(header, rows, comments=()):
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([r if isinstance(r, str) else fmt_real(r) if isinstance(r, float) else r
                    for r in row])
    return buf.getvalue()


def rate_estimate_csv(est):
    """Columns N, a_N, log_p_hat, stderr, ess; the fitted rate goes in '#' comment lines."""
    rows = [(int(n), float(a), float(lp), float(se), float(e))
            for n, a, lp, se, e in zip(est.n, est.a_n, est.log_p_hat, est.stderr, est.ess)]
    comments = [f"event: {est.event}",
                f"rate={fmt_real(est.rate)} rate_stderr={fmt_real(est.rate_stderr)}"]
    return _csv_text(["N", "a_N", "log_p_hat", "stderr", "ess"], rows, comments)


def read_rate_estimate_csv(text):
    """Parse :func:`rate_estimate_csv` output into (columns dict, rate, rate_stderr)."""
    lines = text.splitlines()
    rate = rate_se = math.nan
    for ln in lines:
        if ln.startswith("# rate="):
            parts = dict(p.split("=") for p in ln[2:].split())
            rate, rate_se = float(parts["rate"]), float(parts["rate_stderr"])
    body = [ln for ln in lines if not ln.startswith("#")]
    rows = list(csv.reader(body))
    cols = {h: [] for h in rows[0]}
    for row in rows[1:]:
        for h, v in zip(rows[0], row):
            cols[h].append(int(v) if h == "N" else float(v))
    return cols, rate, rate_se


def rate_function_csv(rf):
    return _csv_text(["x", "I"], [(float(x), float(v)) for x, v in zip(rf.x, rf.values)])


def table_csv(header, rows):
    return _csv_text(header, rows)


__all__ = [
    "SchemaError", "dumps", "loads", "dump", "load", "to_dict", "from_dict",
    "rate_estimate_csv", "read_rate_estimate_csv", "rate_function_csv", "table_csv",
    "fmt_real",
]
