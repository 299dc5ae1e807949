"""Small helpers shared by the experiment scripts."""

import argparse
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def parser(description, default_config):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--config", type=Path, default=ROOT / "configs" / default_config if default_config else None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, default=ROOT / "results")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    return p
