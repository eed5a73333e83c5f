"""Command line surface: ``kfplab {solve,verify,sweep,report}``.

Flags: --config PATH, --out DIR, --threads N, --task NAME (repeatable).
Every flag has an environment override with the KFPLAB_ prefix
(KFPLAB_CONFIG, KFPLAB_OUT, KFPLAB_THREADS, KFPLAB_TASK -- the last one
comma-separated).  Exit status: 0 on success, 2 when a configured pass-cap
was violated, 1 on any hard error.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import ConfigError, load_config
from .report import run_report
from .runner import run_solve, run_sweep, run_verify

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CAP_VIOLATION = 2


def _env(name: str, fallback: str | None = None) -> str | None:
    return os.environ.get("KFPLAB_" + name, fallback)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="kfplab",
        description=(
            "Numerical laboratory for a kinetic diffusion equation with rough "
            "coefficients: solve configured runs, verify regularity estimates, "
            "sweep seed ensembles over grid ladders, and render reports."
        ),
    )
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", default=_env("CONFIG"),
                       help="experiment config (TOML); env KFPLAB_CONFIG")
        p.add_argument("--out", default=_env("OUT"),
                       help="output directory (defaults to the config's out_dir); env KFPLAB_OUT")
        p.add_argument("--threads", type=int, default=int(_env("THREADS", "1")),
                       help="worker threads for sweep members; env KFPLAB_THREADS")

    p = sub.add_parser("solve", help="run one solve; write snapshot + metadata")
    common(p)

    p = sub.add_parser("verify", help="run the configured verification tasks on one solution")
    common(p)
    p.add_argument("--task", action="append", default=None,
                   help="restrict to this task name (repeatable); env KFPLAB_TASK")

    p = sub.add_parser("sweep", help="seed ensemble x grid ladder; aggregate CSVs")
    common(p)
    p.add_argument("--task", action="append", default=None,
                   help="restrict to this task name (repeatable); env KFPLAB_TASK")

    p = sub.add_parser("report", help="render plots and a text summary from a CSV directory")
    p.add_argument("--out", default=_env("OUT"),
                   help="directory holding the CSV reports; env KFPLAB_OUT")

    return ap


def _tasks_from(args) -> list[str] | None:
    tasks = getattr(args, "task", None)
    if tasks:
        return tasks
    env = _env("TASK")
    if env:
        return [t.strip() for t in env.split(",") if t.strip()]
    return None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "report":
            if not args.out:
                raise ConfigError("report needs --out DIR (or KFPLAB_OUT)")
            summary = run_report(args.out)
            sys.stdout.write(summary)
            return EXIT_OK

        if not args.config:
            raise ConfigError("missing --config PATH (or KFPLAB_CONFIG)")
        cfg = load_config(args.config)
        out_dir = args.out or cfg.out_dir

        if args.verb == "solve":
            meta = run_solve(cfg, out_dir, threads=args.threads)
            drift = meta["diagnostics"]["mass_rel_drift"]
            print(f"wrote {os.path.join(out_dir, 'solution.kfp')} (mass drift {drift:.3e})")
            return EXIT_OK

        if args.verb == "verify":
            ok = run_verify(cfg, out_dir, threads=args.threads, only=_tasks_from(args))
            print(f"verify: {'all caps respected' if ok else 'CAP VIOLATION'} -> {out_dir}")
            return EXIT_OK if ok else EXIT_CAP_VIOLATION

        if args.verb == "sweep":
            ok = run_sweep(cfg, out_dir, threads=args.threads, only=_tasks_from(args))
            print(f"sweep: {'all caps respected' if ok else 'CAP VIOLATION'} -> {out_dir}")
            return EXIT_OK if ok else EXIT_CAP_VIOLATION

        raise ConfigError(f"unknown verb {args.verb!r}")
    except (ConfigError, FileNotFoundError, RuntimeError, OSError, ValueError) as exc:
        print(f"kfplab: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
