"""Post-hoc reporting: turn a directory of CSV artifacts into static plots
and a one-page deterministic text summary.

The summary depends only on the CSV contents (no timestamps, repr-formatted
numbers), so re-running over the same inputs reproduces it byte for byte.
"""

from __future__ import annotations

import csv
import math
import os
from collections import defaultdict

__all__ = ["run_report"]


def _read_csv(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _f(row: dict, key: str) -> float:
    return float(row[key])


def _load_tables(csv_dir: str) -> dict[str, list[dict]]:
    tables = {}
    for name in sorted(os.listdir(csv_dir)):
        if name.endswith(".csv"):
            tables[name[:-4]] = _read_csv(os.path.join(csv_dir, name))
    return tables


def _plot_oscillation(tables, plots_dir, lines):
    rows = tables.get("holder", [])
    if not rows:
        return
    import matplotlib.pyplot as plt

    by_seed = defaultdict(list)
    for r in rows:
        by_seed[r["seed"]].append((_f(r, "radius"), _f(r, "oscillation")))
    fig, ax = plt.subplots(figsize=(5, 4))
    for seed in sorted(by_seed, key=int):
        pts = sorted(by_seed[seed])
        radii = [p[0] for p in pts]
        oscs = [max(p[1], 1e-300) for p in pts]
        ax.loglog(radii, oscs, marker="o", label=f"seed {seed}")
    ax.set_xlabel("cylinder radius")
    ax.set_ylabel("oscillation")
    ax.set_title("oscillation decay across scales")
    if len(by_seed) <= 8:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(os.path.join(plots_dir, "oscillation_decay.png"), dpi=110)
    plt.close(fig)
    lines.append("plot: oscillation_decay.png")


def _plot_moser(tables, plots_dir, lines):
    rows = tables.get("moser", [])
    if not rows:
        return
    import matplotlib.pyplot as plt

    by_seed = defaultdict(list)
    for r in rows:
        by_seed[r["seed"]].append((int(r["n"]), _f(r, "partial_product")))
    fig, ax = plt.subplots(figsize=(5, 4))
    for seed in sorted(by_seed, key=int):
        pts = sorted(by_seed[seed])
        ax.semilogy([p[0] for p in pts], [max(p[1], 1e-300) for p in pts], marker="o")
    ax.set_xlabel("iteration level n")
    ax.set_ylabel("partial product of level constants")
    ax.set_title("sup-bound iteration: partial products")
    fig.tight_layout()
    fig.savefig(os.path.join(plots_dir, "moser_partial_products.png"), dpi=110)
    plt.close(fig)
    lines.append("plot: moser_partial_products.png")


def _plot_ratio_histograms(tables, plots_dir, lines):
    rows = tables.get("estimates", [])
    if not rows:
        return
    import matplotlib.pyplot as plt

    by_id = defaultdict(list)
    for r in rows:
        by_id[r["estimate_id"]].append(_f(r, "ratio"))
    for estimate_id in sorted(by_id):
        vals = [v for v in by_id[estimate_id] if math.isfinite(v)]
        if not vals:
            continue
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.hist(vals, bins=min(20, max(5, len(vals) // 2)), color="#4878a8")
        ax.set_xlabel("measured ratio")
        ax.set_ylabel("members")
        ax.set_title(f"{estimate_id}: ratio distribution")
        fig.tight_layout()
        fig.savefig(os.path.join(plots_dir, f"ratio_hist_{estimate_id}.png"), dpi=110)
        plt.close(fig)
        lines.append(f"plot: ratio_hist_{estimate_id}.png")


def _summarize(tables: dict[str, list[dict]]) -> str:
    out = []
    put = out.append
    put("verification summary")
    put("====================")
    put("")

    rows = tables.get("estimates", [])
    if rows:
        put("estimates (ratio = lhs / rhs):")
        by_id = defaultdict(list)
        for r in rows:
            by_id[r["estimate_id"]].append(r)
        for estimate_id in sorted(by_id):
            group = by_id[estimate_id]
            ratios = [_f(r, "ratio") for r in group]
            finite = [v for v in ratios if math.isfinite(v)]
            n_pass = sum(int(r["pass"]) for r in group)
            verdict = "PASS" if n_pass == len(group) else "FAIL"
            lo = min(finite) if finite else float("nan")
            hi = max(finite) if finite else float("nan")
            put(
                f"  {estimate_id:<20} {verdict}  rows={len(group)} passed={n_pass} "
                f"ratio in [{lo!r}, {hi!r}]"
            )
        put("")

    rows = tables.get("moser_summary", [])
    if rows:
        n_pass = sum(int(r["pass"]) for r in rows)
        worst = max(_f(r, "sup_over_l2") for r in rows)
        verdict = "PASS" if n_pass == len(rows) else "FAIL"
        put(f"  {'moser sup-bound':<20} {verdict}  members={len(rows)} "
            f"passed={n_pass} max sup/L2={worst!r}")
        put("")

    rows = tables.get("holder_summary", [])
    if rows:
        alphas = [_f(r, "alpha_hat") for r in rows]
        lams = [_f(r, "lambda_hat") for r in rows]
        n_deg = sum(int(r["degenerate"]) for r in rows)
        finite_a = [a for a in alphas if math.isfinite(a)]
        finite_l = [v for v in lams if math.isfinite(v)]
        min_a = min(finite_a) if finite_a else float("nan")
        min_l = min(finite_l) if finite_l else float("nan")
        ok = finite_a and finite_l and n_deg == 0 and min_a > 0 and min_l > 0
        put(f"  {'holder fit':<20} {'PASS' if ok else 'FAIL'}  members={len(rows)} "
            f"min alpha={min_a!r} min lambda={min_l!r} degenerate={n_deg}")
        put("")

    rows = tables.get("degiorgi_summary", [])
    if rows:
        for r in rows:
            put(
                f"  {'degiorgi lemma':<20} {r['status'].upper():<12} "
                f"qualifiers={r['n_qualifying']}/{r['ensemble_size']} "
                f"alpha_hat={r['alpha_hat']} delta1={r['delta1']} delta2={r['delta2']}"
            )
        put("")

    rows = tables.get("doubling_summary", [])
    if rows:
        n_mono = sum(int(r["monotone_ok"]) for r in rows)
        n_sup = sum(int(r["sup_ok"]) for r in rows)
        verdict = "PASS" if n_mono == len(rows) else "FAIL"
        put(f"  {'doubling iteration':<20} {verdict}  members={len(rows)} "
            f"monotone={n_mono}/{len(rows)} sup_ok={n_sup}/{len(rows)}")
        put("")

    rows = tables.get("oracle_summary", [])
    if rows:
        for r in rows:
            verdict = "PASS" if int(r["pass"]) else "FAIL"
            put(f"  {'oracle order':<20} {verdict}  levels={r['n_levels']} "
                f"fitted_order={r['fitted_order']} (min {r['min_order']})")
        put("")

    if "stability" in tables:
        rows = tables["stability"]
        if rows:
            n_ok = sum(int(r["within_quarter"]) for r in rows)
            verdict = "PASS" if n_ok == len(rows) else "FAIL"
            put(f"  {'refinement stability':<20} {verdict}  within 25%: {n_ok}/{len(rows)}")
            for r in rows:
                if not int(r["within_quarter"]):
                    put(f"    drifting: {r['estimate_id']}/{r['ratio_name']} "
                        f"rel_change={r['rel_change']}")
        else:
            put(f"  {'refinement stability':<20} ----  single grid, nothing to compare")
        put("")

    rows = tables.get("errors", [])
    if rows is not None and "errors" in tables:
        put(f"  recorded member failures: {len(rows)}")
        for r in rows[:10]:
            put(f"    grid {r['grid_index']} seed {r['seed']} {r['task']}: {r['error']}")
        put("")

    return "\n".join(out) + "\n"


def run_report(csv_dir: str) -> str:
    """Read every CSV in csv_dir, write plots/ images and summary.txt.
    Returns the summary text."""
    if not os.path.isdir(csv_dir):
        raise FileNotFoundError(f"report input directory does not exist: {csv_dir}")
    tables = _load_tables(csv_dir)
    if not tables:
        raise FileNotFoundError(f"no CSV reports found in {csv_dir}")

    import matplotlib

    matplotlib.use("Agg")

    plots_dir = os.path.join(csv_dir, "plots")
    os.makedirs(plots_dir, exist_ok=True)
    plot_lines: list[str] = []
    _plot_oscillation(tables, plots_dir, plot_lines)
    _plot_moser(tables, plots_dir, plot_lines)
    _plot_ratio_histograms(tables, plots_dir, plot_lines)

    summary = _summarize(tables)
    if plot_lines:
        summary += "\n".join(plot_lines) + "\n"
    with open(os.path.join(csv_dir, "summary.txt"), "w") as fh:
        fh.write(summary)
    return summary
