#!/usr/bin/env python3
"""PAPR CCDF of plain DFT-s-OFDM, punctured DFT-s-OFDM (N_i = 11, 5) and OFDM.

Writes ``papr.csv`` and prints the PAPR exceeded with probability 1e-3.
"""

from _common import parser

from pdfts.analysis import papr_at_ccdf
from pdfts.sim import load_spec, papr_csv, run_papr


def main():
    args = parser(__doc__.splitlines()[0], "papr.ini").parse_args()
    spec = load_spec(args.config, args.override, seed=args.seed, experiment="papr")
    records = run_papr(spec, workers=args.workers)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "papr.csv").write_text(papr_csv(records))
    print(f"{'curve':<12} PAPR @ CCDF 1e-3")
    for rec in records:
        print(f"{rec.name:<12} {papr_at_ccdf(rec.papr_db, 1e-3):6.2f} dB")


if __name__ == "__main__":
    main()
