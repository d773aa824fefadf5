"""Shared driver: runs ``qmem sim`` for a list of (name, argv) jobs."""

import argparse
import sys
from pathlib import Path

from qmem.cli import main as qmem_main


def run(jobs, default_out, doc):
    ap = argparse.ArgumentParser(description=doc)
    ap.add_argument("--out", type=Path, default=Path(default_out))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--bootstrap", type=int, default=1000)
    args = ap.parse_args()
    status = 0
    for name, argv in jobs:
        code = qmem_main(["sim", *argv, "--out", str(args.out / name), "--seed", str(args.seed),
                          "--bootstrap", str(args.bootstrap), "--plot"])
        status = status or code
    sys.exit(status)
