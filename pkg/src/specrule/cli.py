"""Command-line front end.

Exit codes: 0 success, 1 invariant failure, 2 usage or input error,
3 numerical failure (the failing operation is named on stderr).
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import checks, ensembles, ldplab, oprl, opuc, serialize, sumrules
from .errors import NumericalError
from .measures import CIRCLE, LINE, SpectralMeasure, bin_project
from .oprl import FiniteRankPerturbation, JacobiParams
from .opuc import VerblunskySeq
from .rng import RngStream

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

SAMPLE_KINDS = {
    "cue-alpha": ensembles.CUE_ALPHA,
    "cue-measure": ensembles.CUE_MEASURE,
    "gue": ensembles.GUE_JACOBI,
    "haar": ensembles.HAAR_UNITARY,
}
TRANSFORMS = ("alpha-to-measure", "measure-to-alpha", "jacobi-to-measure", "measure-to-jacobi")

MAX_N = 4096
MAX_COUNT = 10**6
MIN_SAMPLES = 1000
MAX_JMAX = 16


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Validated command-line settings."""

    command: str
    action: str
    input: Path | None = None
    output: Path | None = None
    report: Path | None = None
    n: int | None = None
    n_list: list[int] = field(default_factory=list)
    count: int | None = None
    samples: int | None = None
    seed: int = 0
    stream: int = 0
    t: float | None = None
    jmax: int | None = None
    tol_scale: float = 1.0

    def validate(self):
        def need(ok, msg):
            if not ok:
                raise UsageError(msg)

        need(0 <= self.seed < 2**63, "--seed must be in [0, 2^63)")
        need(0 <= self.stream < 2**31, "--stream must be in [0, 2^31)")
        if self.n is not None:
            need(1 <= self.n <= MAX_N, f"--n must be in [1, {MAX_N}]")
        if self.count is not None:
            need(1 <= self.count <= MAX_COUNT, f"--count must be in [1, {MAX_COUNT}]")
        if self.samples is not None:
            need(MIN_SAMPLES <= self.samples <= 10**8,
                 f"--samples must be in [{MIN_SAMPLES}, 10^8]")
        if self.t is not None:
            need(math.isfinite(self.t) and self.t > 0, "--t must be a positive number")
        if self.n_list:
            need(all(1 <= n <= 10**6 for n in self.n_list), "--n entries must be in [1, 10^6]")
            need(all(b > a for a, b in zip(self.n_list, self.n_list[1:])),
                 "--n entries must be strictly increasing")
        if self.jmax is not None:
            need(0 <= self.jmax <= MAX_JMAX, f"--jmax must be in [0, {MAX_JMAX}]")
        need(math.isfinite(self.tol_scale) and self.tol_scale > 0,
             "--tol-scale must be a positive number")
        return self


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _n_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser():
    p = _Parser(prog="specrule", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sample", help="draw ensemble samples to JSON")
    s.add_argument("action", choices=sorted(SAMPLE_KINDS))
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--stream", type=int, default=0)
    s.add_argument("--out", type=Path, required=True)

    t = sub.add_parser("transform", help="coefficients <-> spectral measure")
    t.add_argument("action", choices=TRANSFORMS)
    t.add_argument("--in", dest="input", type=Path, required=True)
    t.add_argument("--out", type=Path, required=True)
    t.add_argument("--count", type=int)

    r = sub.add_parser("sumrule", help="evaluate both sides of a sum rule")
    r.add_argument("action", choices=["szego", "ks"])
    r.add_argument("--in", dest="input", type=Path, required=True)
    r.add_argument("--report", type=Path)

    ld = sub.add_parser("ldp", help="large-deviation experiments")
    lsub = ld.add_subparsers(dest="action", required=True, parser_class=_Parser)
    e = lsub.add_parser("exp-tail", help="tilted Monte-Carlo tail of exponential means")
    e.add_argument("--t", type=float, required=True)
    e.add_argument("--n", dest="n_list", type=_n_list, required=True)
    e.add_argument("--samples", type=int, required=True)
    e.add_argument("--seed", type=int, required=True)
    e.add_argument("--stream", type=int, default=0)
    e.add_argument("--out", type=Path, required=True)
    b = lsub.add_parser("binned", help="binned rate of a circle measure, levels 0..jmax")
    b.add_argument("--in", dest="input", type=Path, required=True)
    b.add_argument("--jmax", type=int, required=True)
    b.add_argument("--out", type=Path, required=True)

    c = sub.add_parser("check", help="run the invariant suite")
    c.add_argument("action", choices=["all"])
    c.add_argument("--tol-scale", type=float, default=1.0)
    return p


def parse_config(argv):
    ns = build_parser().parse_args(argv)
    d = {k: v for k, v in vars(ns).items() if v is not None}
    if "out" in d:
        d["output"] = d.pop("out")
    return RunConfig(**d).validate()


# commands -------------------------------------------------------------------------------


def _load(path, *types):
    try:
        obj = serialize.load(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}")
    if types and not isinstance(obj, types):
        names = " or ".join(t.__name__ for t in types)
        raise serialize.SchemaError(f"expected {names}, found {type(obj).__name__}")
    return obj


def _write(path, text):
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}")


def cmd_sample(cfg):
    kind = SAMPLE_KINDS[cfg.action]
    if kind == ensembles.CUE_MEASURE and cfg.n > ensembles.CUE_MEASURE_MAX_N:
        raise UsageError(f"cue-measure needs --n <= {ensembles.CUE_MEASURE_MAX_N}")
    # sample i uses its own sub-stream, so --count never changes earlier samples
    out = [ensembles.sample(kind, cfg.n, cfg.seed, (cfg.stream << 32) | i)
           for i in range(cfg.count)]
    _write(cfg.output, serialize.dumps(out if cfg.count > 1 else out[0]) + "\n")
    return EXIT_OK


def cmd_transform(cfg):
    if cfg.action == "alpha-to-measure":
        out = opuc.verblunsky_to_measure(_load(cfg.input, VerblunskySeq))
    elif cfg.action == "jacobi-to-measure":
        j = _load(cfg.input, JacobiParams, FiniteRankPerturbation)
        if isinstance(j, FiniteRankPerturbation):
            out = oprl.perturbed_spectral_data(j).measure()
        else:
            out = oprl.jacobi_to_measure(j)
    else:
        mu = _load(cfg.input, SpectralMeasure)
        want = CIRCLE if cfg.action == "measure-to-alpha" else LINE
        if mu.domain != want:
            raise serialize.SchemaError(f"expected a {want} measure, found {mu.domain}",
                                        "$.domain")
        count = cfg.count
        if count is None:
            if mu.ac is not None:
                raise UsageError("--count is required for a measure with an a.c. part")
            count = mu.n_atoms
        if mu.ac is None and count > mu.n_atoms:
            raise UsageError(f"--count exceeds the {mu.n_atoms} atoms of the measure")
        if want == CIRCLE:
            out = opuc.measure_to_verblunsky(mu, count)
        else:
            out = oprl.measure_to_jacobi(mu, count)
    _write(cfg.output, serialize.dumps(out) + "\n")
    return EXIT_OK


def cmd_sumrule(cfg):
    if cfg.action == "szego":
        rep = sumrules.szego_report(_load(cfg.input, VerblunskySeq))
    else:
        p = _load(cfg.input, FiniteRankPerturbation, JacobiParams)
        if isinstance(p, JacobiParams):
            # a finite Jacobi matrix read as the prefix of a free tail
            p = FiniteRankPerturbation(p.a, p.b)
        rep = sumrules.ks_report(p)
    print(rep.render())
    if cfg.report is not None:
        _write(cfg.report, serialize.dumps(rep) + "\n")
    return EXIT_OK


def cmd_ldp(cfg):
    if cfg.action == "exp-tail":
        est = ldplab.mc_tail_estimate(RngStream(cfg.seed, cfg.stream), cfg.t, cfg.n_list,
                                      cfg.samples)
        _write(cfg.output, serialize.rate_estimate_csv(est))
        print(f"rate {est.rate:.6g} +- {est.rate_stderr:.2g} ({est.event})")
        if np.any(est.flagged):
            print("warning: low effective sample size at N = "
                  + ",".join(str(int(n)) for n in est.n[est.flagged]), file=sys.stderr)
        return EXIT_OK
    mu = _load(cfg.input, SpectralMeasure)
    if mu.domain != CIRCLE:
        raise UsageError("ldp binned takes a circle measure")
    rows = []
    for j in range(cfg.jmax + 1):
        beta = bin_project(mu, j).masses
        if np.all(beta > 0):
            total, mass, ent = ldplab.binned_rate(beta)
        else:
            total, mass, ent = math.inf, 0.0, math.inf
        rows.append((j, total, mass, ent))
    _write(cfg.output, serialize.table_csv(["j", "total", "mass_part", "entropy_part"], rows))
    return EXIT_OK


def cmd_check(cfg):
    results = checks.run_all(cfg.tol_scale, report=lambda r: print(r.line(), flush=True))
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if not failed:
        return EXIT_OK
    # only numerical breakdowns, no violated invariant
    if all(r.error for r in failed):
        return EXIT_NUMERIC
    return EXIT_FAIL


COMMANDS = {"sample": cmd_sample, "transform": cmd_transform, "sumrule": cmd_sumrule,
            "ldp": cmd_ldp, "check": cmd_check}


def main(argv=None):
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        return COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except serialize.SchemaError as exc:
        print(f"error: bad input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure in {exc.operation or 'unknown operation'}: {exc}",
              file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
