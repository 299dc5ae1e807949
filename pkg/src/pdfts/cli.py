"""Command-line entry point.

    pdfts ber   [--config PATH] [--seed U64] [--out PATH] [--workers N] [--override key=value ...]
    pdfts papr  ...
    pdfts lemma ...
    pdfts validate-config --config PATH

Exit codes: 0 success, 2 configuration error, 3 threshold failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from . import sim
from .txchain import ConfigError

log = logging.getLogger("pdfts")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_THRESHOLD = 3


def _parser():
    p = argparse.ArgumentParser(prog="pdfts", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("ber", "BER sweep; CSV columns curve,snr_db,bits,bit_errors,ber (snr_db = per-allocated-bin Es/N0)"),
        ("papr", "PAPR CCDF; CSV columns curve,threshold_db,ccdf"),
        ("lemma", "periodic-interference check; CSV columns m,n_i,s,trials,max_deviation,pass"),
        ("validate-config", "parse and validate a config file, print the resolved spec"),
    ):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", type=Path, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", type=Path, default=None, help="CSV output path (default: stdout)")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        log.info("wrote %s", out)


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    kind = None if args.command == "validate-config" else args.command
    try:
        spec = sim.load_spec(args.config, args.override, seed=args.seed, experiment=kind,
                             out=str(args.out) if args.out else None)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.workers < 1:
        print("config error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(spec.out) if spec.out else None

    if args.command == "validate-config":
        print(json.dumps(spec.to_dict(), indent=2))
        return EXIT_OK

    if args.command == "ber":
        def progress(snr, points):
            log.info("snr %.2f dB: %s", snr, ", ".join(f"{k}={p.ber:.3e}" for k, p in points.items()))

        result = sim.run_ber(spec, workers=args.workers, progress=progress)
        _emit(sim.ber_csv(result), out)
        if out is not None:
            out.with_suffix(out.suffix + ".json").write_text(sim.metadata_json(result))
        return EXIT_OK

    if args.command == "papr":
        records = sim.run_papr(spec, workers=args.workers)
        _emit(sim.papr_csv(records), out)
        return EXIT_OK

    rows = sim.run_lemma(spec)
    _emit(sim.lemma_csv(rows), out)
    return EXIT_OK if all(r.passed for r in rows) else EXIT_THRESHOLD


if __name__ == "__main__":
    sys.exit(main())
