#!/usr/bin/env python3
"""Run the acceptance battery and write one JSON record per criterion."""

import argparse
import json
import sys

from diamond_gmc.acceptance import verify_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--suite", choices=("fast", "full"), default="full")
    ap.add_argument("--out", default=None, help="JSON file (default: stdout only)")
    args = ap.parse_args()

    results = verify_suite(args.suite)
    for r in results:
        print(r.line(), file=sys.stderr)
    payload = [dict(id=r.id, name=r.name, passed=r.passed, skipped=r.skipped, elapsed=r.elapsed,
                    details={k: (v if isinstance(v, (int, float, bool, str)) else str(v)) for k, v in r.details.items()})
               for r in results]
    text = json.dumps(payload, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        print(text)
    return 0 if all(r.passed for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
