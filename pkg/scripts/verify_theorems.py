"""Run every example config and print one verdict line per check.

    python scripts/verify_theorems.py [--jobs N]
"""

import argparse
from pathlib import Path

from qfi_broadcast.errors import QfiError
from qfi_broadcast.experiment import load_config, run

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
# configs whose purpose is to exercise the failing exit path
EXPECTED_FAILURES = {"failing_expectation.yaml"}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    bad = 0
    for path in sorted(CONFIGS.glob("*.yaml")):
        try:
            rep = run(load_config(str(path)), jobs=args.jobs)
        except QfiError as exc:
            print(f"{path.name:36s} ERROR {exc}")
            bad += 1
            continue
        for c in rep.checks:
            status = "ok" if c.passed else "MISMATCH"
            print(f"{path.name:36s} {c.name:14s} {c.verdict:16s} expected {c.expected:16s} {status}")
        if rep.passed == (path.name in EXPECTED_FAILURES):
            bad += 1
    print("all configs behaved as expected" if not bad else f"{bad} config(s) misbehaved")
    return int(bad > 0)


if __name__ == "__main__":
    raise SystemExit(main())
