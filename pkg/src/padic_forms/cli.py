"""Command-line entry points: classify, witness, verify and sweep.

All results go to stdout as JSON, diagnostics to stderr.  Exit codes:
0 success (independent, for ``verify``), 1 parse or shape error, 2 singular
forms, 3 no witness exists for the verdict, 4 certification failed, 5 not
independent.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

from .classifier import Classification, Verdict, classify
from .finite import FiniteDistribution, FiniteModelError, char_fn
from .forms import LAMBDA1, LAMBDA2, FormsError, NormalizedForms, normalize, parse_matrix
from .padic import PAdicError, PAdicScalar, format_literal, is_prime, reduce_mod
from .verifier import (
    Disagreement,
    FiniteForms,
    IndependenceReport,
    functional_eq_check,
    independence_exact,
    scan_for_counterexample,
)
from .witness import CertificationFailed, WrongVerdict, build_witness, default_model_exponent

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_SINGULAR = 2
EXIT_WRONG_VERDICT = 3
EXIT_CERTIFICATION = 4
EXIT_NOT_INDEPENDENT = 5

INPUT_ERRORS = (PAdicError, FormsError, FiniteModelError, ValueError, KeyError, OSError, json.JSONDecodeError)


def _emit(data: dict) -> None:
    json.dump(data, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _prime(text: str) -> int:
    p = int(text)
    if not is_prime(p):
        raise argparse.ArgumentTypeError(f"{p} is not prime")
    return p


def _classify_text(p: int, text: str) -> tuple[NormalizedForms, Classification]:
    nf = normalize(parse_matrix(text, p))
    return nf, classify(nf)


# ---------------------------------------------------------------------------
# classify / witness / verify


def cmd_classify(args: argparse.Namespace) -> int:
    try:
        nf, cls = _classify_text(args.p, args.matrix)
    except INPUT_ERRORS as exc:
        return _fail(EXIT_PARSE, str(exc))
    out = cls.to_json()
    out["normalized"] = nf.describe()
    _emit(out)
    if cls.verdict == Verdict.SINGULAR:
        print("error: the forms are linearly dependent (det = 0)", file=sys.stderr)
        return EXIT_SINGULAR
    return EXIT_OK


def _load_distribution(path: str) -> FiniteDistribution:
    with open(path) as fh:
        return FiniteDistribution.from_json(json.load(fh))


def cmd_witness(args: argparse.Namespace) -> int:
    try:
        nf, cls = _classify_text(args.p, args.matrix)
        inner = _load_distribution(args.inner) if args.inner else None
    except INPUT_ERRORS as exc:
        return _fail(EXIT_PARSE, str(exc))
    if cls.verdict == Verdict.SINGULAR:
        return _fail(EXIT_SINGULAR, "the forms are linearly dependent (det = 0)")
    if cls.verdict != Verdict.COUNTEREXAMPLE:
        return _fail(EXIT_WRONG_VERDICT, f"verdict is {cls.verdict.value}: independence forces the conclusion, no witness")
    try:
        bundle = build_witness(cls.recipe, nf, args.n, inner, cls)  # type: ignore[arg-type]
    except WrongVerdict as exc:
        return _fail(EXIT_WRONG_VERDICT, str(exc))
    except CertificationFailed as exc:
        return _fail(EXIT_CERTIFICATION, str(exc))
    out = bundle.to_json()
    out["normalized"] = nf.describe()
    _emit(out)
    return EXIT_OK


def finite_forms_from_text(p: int, n: int, text: str) -> FiniteForms:
    """The raw matrix read modulo ``p^n`` (entries must be p-adic integers)."""
    raw = parse_matrix(text, p)
    return FiniteForms.from_rows(p, n, [[reduce_mod(x, n) for x in row] for row in raw.coefficients])


def cmd_verify(args: argparse.Namespace) -> int:
    try:
        forms = finite_forms_from_text(args.p, args.n, args.matrix)
        mus = [_load_distribution(path) for path in args.distributions]
        for mu in mus:
            if mu.group != forms.group:
                raise FiniteModelError(f"distribution lives on Z/{mu.group.order}, forms on Z/{forms.group.order}")
    except INPUT_ERRORS as exc:
        return _fail(EXIT_PARSE, str(exc))
    reports: list[IndependenceReport] = []
    if args.method in ("exact", "both"):
        reports.append(independence_exact(*mus, forms))
    if args.method in ("spectral", "both"):
        reports.append(functional_eq_check(*(char_fn(mu) for mu in mus), forms))
    if len({r.independent for r in reports}) > 1:
        # the two routes must never disagree; surface it loudly
        raise Disagreement(f"exact and spectral routes disagree: {[r.to_json() for r in reports]}")
    out = reports[0].to_json()
    if len(reports) > 1:
        out["method"] = "+".join(r.method for r in reports)
        out["max_residual"] = reports[1].max_residual
        out["reports"] = [r.to_json() for r in reports]
    _emit(out)
    return EXIT_OK if reports[0].independent else EXIT_NOT_INDEPENDENT


# ---------------------------------------------------------------------------
# sweep


@dataclass
class SweepRecord:
    shape: str
    coefficients: tuple[str, str, str, str]
    verdict: str
    n: Optional[int]
    status: str  # certified | no_violation | classified | singular | failed
    detail: Optional[str] = None
    q: Optional[int] = None

    def to_json(self) -> dict:
        return {
            "shape": self.shape,
            "coefficients": list(self.coefficients),
            "verdict": self.verdict,
            "n": self.n,
            "q": self.q,
            "status": self.status,
            "detail": self.detail,
        }


@dataclass
class SweepReport:
    prime: int
    valuation_max: int
    unit_bound: int
    shapes: tuple[str, ...]
    n_override: Optional[int]
    budget: int
    records: list[SweepRecord] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.records:
            out[r.verdict] = out.get(r.verdict, 0) + 1
        return out

    @property
    def failures(self) -> list[SweepRecord]:
        return [r for r in self.records if r.status == "failed"]

    def to_json(self, with_records: bool = True) -> dict:
        out = {
            "grid": {
                "p": self.prime,
                "valuation_max": self.valuation_max,
                "unit_bound": self.unit_bound,
                "shapes": list(self.shapes),
                "n": self.n_override if self.n_override is not None else "max valuation + 2",
                "budget": self.budget,
            },
            "instances": len(self.records),
            "counts": self.counts,
            "failures": [r.to_json() for r in self.failures],
            "seconds": round(self.seconds, 3),
        }
        if with_records:
            out["records"] = [r.to_json() for r in self.records]
        return out


def grid_coefficients(p: int, valuation_max: int, unit_bound: Optional[int] = None) -> list[PAdicScalar]:
    """``p^a * u`` for ``a <= valuation_max`` and units ``0 < u < unit_bound``
    (default ``p^2``)."""
    bound = p * p if unit_bound is None else unit_bound
    units = [u for u in range(1, bound) if u % p]
    return [PAdicScalar.from_int(p**a * u, p) for a in range(valuation_max + 1) for u in units]


def grid_instances(p: int, valuation_max: int, unit_bound: Optional[int] = None,
                   shapes: Sequence[str] = (LAMBDA1, LAMBDA2)) -> Iterator[NormalizedForms]:
    coeffs = grid_coefficients(p, valuation_max, unit_bound)
    for shape in shapes:
        for d in itertools.product(coeffs, repeat=4):
            yield NormalizedForms(p, shape, *d)


def sweep_instance(nf: NormalizedForms, n: Optional[int] = None, budget: int = 500, seed: int = 0,
                   classify_only: bool = False) -> SweepRecord:
    """Classify one instance and certify its verdict: a witness for
    ``CounterexampleExists``, a fruitless search for the forced verdicts."""
    cls = classify(nf)
    coeffs = tuple(format_literal(x) for x in nf.coefficients)

    def record(n_used: Optional[int], status: str, detail: Optional[str] = None) -> SweepRecord:
        return SweepRecord(nf.shape, coeffs, cls.verdict.value, n_used, status, detail, cls.q)  # type: ignore[arg-type]

    if cls.verdict == Verdict.SINGULAR:
        return record(None, "singular")
    model_n = default_model_exponent(nf) if n is None else n
    if classify_only:
        return record(model_n, "classified")
    if cls.verdict == Verdict.COUNTEREXAMPLE:
        try:
            bundle = build_witness(cls.recipe, nf, model_n, classification=cls)  # type: ignore[arg-type]
        except (CertificationFailed, WrongVerdict) as exc:
            return record(model_n, "failed", str(exc))
        return record(model_n, "certified", f"{bundle.recipe.template.value} mu{bundle.non_idempotent_index}")
    report = scan_for_counterexample(nf, model_n, cls.verdict.value, budget, seed)
    if report.violation is not None:
        return record(model_n, "failed", f"violation: {json.dumps([mu.to_json() for mu in report.violation])}")
    return record(model_n, "no_violation", f"{report.candidate_triples} triples, {report.exact_checks} exact checks")


def _sweep_chunk(job: tuple[list[NormalizedForms], Optional[int], int, int, bool]) -> list[SweepRecord]:
    instances, n, budget, seed, classify_only = job
    return [sweep_instance(nf, n, budget, seed, classify_only) for nf in instances]


def run_sweep(p: int, valuation_max: int, n: Optional[int] = None, unit_bound: Optional[int] = None,
              budget: int = 500, shapes: Sequence[str] = (LAMBDA1, LAMBDA2), workers: int = 1,
              seed: int = 0, chunk: int = 2000, classify_only: bool = False) -> SweepReport:
    start = time.perf_counter()
    report = SweepReport(p, valuation_max, p * p if unit_bound is None else unit_bound, tuple(shapes), n, budget)
    instances = list(grid_instances(p, valuation_max, unit_bound, shapes))
    jobs = [(instances[i : i + chunk], n, budget, seed, classify_only) for i in range(0, len(instances), chunk)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            for records in pool.map(_sweep_chunk, jobs):
                report.records.extend(records)
    else:
        for job in jobs:
            report.records.extend(_sweep_chunk(job))
    report.seconds = time.perf_counter() - start
    return report


def cmd_sweep(args: argparse.Namespace) -> int:
    shapes = (LAMBDA1, LAMBDA2) if args.shape == "both" else (args.shape,)
    report = run_sweep(args.p, args.valuation_max, args.n, args.unit_bound, args.budget, shapes, args.workers, args.seed,
                       classify_only=args.classify_only)
    _emit(report.to_json(with_records=not args.summary))
    if report.failures:
        print(f"{len(report.failures)} failures", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="padic-forms", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def forms_args(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--p", type=_prime, required=True, help="the prime")
        sp.add_argument("--matrix", required=True, help='rows separated by ";", entries by ",", e.g. "1,1,1;1,3,9;1,9,3"')

    sp = sub.add_parser("classify", help="classify three linear forms")
    forms_args(sp)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("witness", help="certified non-idempotent independent triple")
    forms_args(sp)
    sp.add_argument("--n", type=int, default=None, help="model exponent (default: max valuation + 2)")
    sp.add_argument("--inner", default=None, help="distribution JSON for the inner law")
    sp.set_defaults(func=cmd_witness)

    sp = sub.add_parser("verify", help="check independence of three forms on Z/p^n")
    forms_args(sp)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("distributions", nargs=3, metavar="DIST", help="distribution JSON files")
    sp.add_argument("--method", choices=("exact", "spectral", "both"), default="exact")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("sweep", help="classify and certify a grid of canonical forms")
    sp.add_argument("--p", type=_prime, required=True)
    sp.add_argument("--valuation-max", "-V", type=int, default=2)
    sp.add_argument("--n", type=int, default=None, help="model exponent (default per instance: max valuation + 2)")
    sp.add_argument("--unit-bound", type=int, default=None, help="units u < bound (default p^2)")
    sp.add_argument("--budget", type=int, default=500)
    sp.add_argument("--shape", choices=(LAMBDA1, LAMBDA2, "both"), default="both")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--summary", action="store_true", help="omit per-instance records")
    sp.add_argument("--classify-only", action="store_true", help="skip witnesses and searches")
    sp.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; that code means "singular" here
        return EXIT_OK if exc.code == 0 else EXIT_PARSE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
