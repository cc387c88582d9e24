#!/usr/bin/env python3
"""Write the graded synthetic corpus as a pair JSONL file for the ``editmag`` CLI."""

import argparse

from editmag.experiment import GradedConfig, build_pairs
from editmag.jsonio import write_jsonl


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--output", required=True)
    ap.add_argument("--n-sources", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    pairs, _ = build_pairs(GradedConfig(n_sources=args.n_sources, seed=args.seed))
    n = write_jsonl(args.output, (p.to_json() for p in pairs))
    print(f"wrote {n} pairs to {args.output}")


if __name__ == "__main__":
    main()
