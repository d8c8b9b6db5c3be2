"""Sweep the full coefficient grid (p = 2 and 3, valuations <= 2, units
below p^2, both shapes) and write one summary JSON per prime.

    python3 scripts/run_sweep.py --out sweep_results --workers 4
"""

import argparse
import json
import pathlib
import sys

from padic_forms.cli import run_sweep


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--primes", type=int, nargs="+", default=[2, 3])
    parser.add_argument("--valuation-max", "-V", type=int, default=2)
    parser.add_argument("--budget", type=int, default=500)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", type=pathlib.Path, default=pathlib.Path("sweep_results"))
    parser.add_argument("--records", action="store_true", help="keep per-instance records")
    args = parser.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    failed = 0
    for p in args.primes:
        report = run_sweep(p, args.valuation_max, budget=args.budget, workers=args.workers)
        path = args.out / f"sweep_p{p}.json"
        path.write_text(json.dumps(report.to_json(with_records=args.records), indent=2))
        failed += len(report.failures)
        print(f"p={p}: {len(report.records)} instances, {report.counts}, "
              f"{len(report.failures)} failures, {report.seconds:.0f}s -> {path}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
