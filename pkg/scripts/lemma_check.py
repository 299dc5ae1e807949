#!/usr/bin/env python3
"""Periodic-interference check over every valid (M, N_i, S) case; exit 3 on failure."""

import sys

from _common import parser

from pdfts.sim import lemma_csv, load_spec, run_lemma


def main():
    args = parser(__doc__, None).parse_args()
    spec = load_spec(None, args.override, seed=args.seed, experiment="lemma")
    rows = run_lemma(spec)
    sys.stdout.write(lemma_csv(rows))
    return 0 if all(r.passed for r in rows) else 3


if __name__ == "__main__":
    sys.exit(main())
