#!/usr/bin/env python3
"""BER sweep (AWGN by default, or a fading config) with SNR-at-1e-3 summary.

For AWGN runs the summary also lists the gap to the Gray-mapped QAM bound.
"""

import logging

import numpy as np
from _common import parser
from scipy.optimize import brentq

from pdfts.analysis import snr_at_ber
from pdfts.modem import awgn_ber_bound, get_constellation
from pdfts.sim import ber_csv, load_spec, metadata_json, run_ber


def main():
    p = parser(__doc__.splitlines()[0], "awgn.ini")
    p.add_argument("--name", default=None, help="output stem (default: channel name)")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    spec = load_spec(args.config, args.override, seed=args.seed, experiment="ber")

    def progress(snr, points):
        logging.info("%5.1f dB  %s", snr, "  ".join(f"{k}={v.ber:.2e}" for k, v in points.items()))

    result = run_ber(spec, workers=args.workers, progress=progress)
    stem = args.name or spec.channel.name
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / f"ber_{stem}.csv").write_text(ber_csv(result))
    (args.out / f"ber_{stem}.csv.json").write_text(metadata_json(result))

    ref = None
    if spec.channel.name == "awgn":
        c = get_constellation(spec.curves[0].waveform.modulation)
        ref = brentq(lambda s: np.log10(awgn_ber_bound(s, c)) + 3, 0.0, 30.0)
        print(f"Gray bound reaches 1e-3 at {ref:.2f} dB")
    for c in spec.curves:
        try:
            s = snr_at_ber(result.snr(c.name), result.ber(c.name))
        except ValueError:
            print(f"{c.name:<14} does not reach 1e-3 (last BER {result.ber(c.name)[-1]:.2e})")
            continue
        extra = f"  gap {s - ref:+.2f} dB" if ref is not None else ""
        print(f"{c.name:<14} 1e-3 at {s:6.2f} dB{extra}")


if __name__ == "__main__":
    main()
