"""Figure rendering for association test reports.

The delimited report is the interface: figures are always rendered from a
written report CSV, never from in-memory state, so any archived report can
be re-plotted later.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

VERDICT_COLORS = {"consistent": "#4878a8", "violated": "#c23b22", "skipped": "#b0b0b0"}


def _read_report(csv_path):
    rows = []
    with open(csv_path, "r", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rows.append(row)
    return rows


def render_report_figures(csv_path, out_dir=None, prefix=None) -> list:
    """Render the standard figures next to a report CSV; returns the paths."""
    csv_path = Path(csv_path)
    out_dir = Path(out_dir) if out_dir is not None else csv_path.parent
    prefix = prefix or csv_path.stem.removesuffix("_report")
    rows = _read_report(csv_path)
    paths = []

    tested = [r for r in rows if r["verdict"] != "skipped"]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    if tested:
        ids = [int(r["pair_id"]) for r in tested]
        est = [float(r["estimate"]) for r in tested]
        err = [4 * float(r["se"]) for r in tested]
        colors = [VERDICT_COLORS.get(r["verdict"], "k") for r in tested]
        ax.errorbar(ids, est, yerr=err, fmt="none", ecolor="#999999", elinewidth=1, capsize=2)
        ax.scatter(ids, est, c=colors, s=22, zorder=3)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("pair id")
    ax.set_ylabel("covariance estimate")
    ax.set_title("Score-pair covariance estimates (bars: 4 s.e.)")
    fig.tight_layout()
    est_path = out_dir / f"{prefix}_estimates.png"
    fig.savefig(est_path, dpi=130)
    plt.close(fig)
    paths.append(est_path)

    fig, ax = plt.subplots(figsize=(8, 4.5))
    pvals = sorted(float(r["p"]) for r in tested if r["p"] != "nan")
    if pvals:
        ax.plot(range(1, len(pvals) + 1), pvals, "o-", ms=4, color="#4878a8")
        ax.set_yscale("log")
        ax.set_ylim(max(min(pvals) / 10, 1e-17), 1.5)
    ax.set_xlabel("pair rank")
    ax.set_ylabel("one-sided p-value")
    ax.set_title("Ordered p-values")
    fig.tight_layout()
    p_path = out_dir / f"{prefix}_pvalues.png"
    fig.savefig(p_path, dpi=130)
    plt.close(fig)
    paths.append(p_path)
    return paths
