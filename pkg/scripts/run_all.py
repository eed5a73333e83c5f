#!/usr/bin/env python3
"""Run every packaged experiment end-to-end and write reports.

Each config under configs/ is swept into runs/<name>/ and summarized.  The
reverse-Hoelder scan config needs roughly half a gigabyte of field storage
and a few minutes of solve time, so it only runs when --with-gehring is
given.  The calibration config is the business of scripts/calibrate.py and
is skipped here.

Usage: python3 scripts/run_all.py [--with-gehring] [--threads N]
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

from kfplab.config import load_config  # noqa: E402
from kfplab.report import run_report  # noqa: E402
from kfplab.runner import run_sweep  # noqa: E402

DEFAULT = ("oracle", "core", "degiorgi", "holder_linear")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--with-gehring", action="store_true",
                    help="also run the high-resolution reverse-Hoelder scan")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    names = list(DEFAULT) + (["gehring"] if args.with_gehring else [])
    overall = True
    for name in names:
        cfg = load_config(REPO / "configs" / f"{name}.toml")
        out = REPO / cfg.out_dir
        t0 = time.time()
        ok = run_sweep(cfg, out, threads=args.threads)
        print(f"[{name}] all_pass={ok} in {time.time() - t0:.1f}s -> {out}")
        summary = run_report(out)
        print("\n".join("    " + line for line in summary.splitlines()[:6]))
        overall = overall and ok
    print(f"\noverall: {'PASS' if overall else 'FAIL'}")
    return 0 if overall else 2


if __name__ == "__main__":
    raise SystemExit(main())
