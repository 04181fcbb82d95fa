"""Report rendering: delimited residual data plus matplotlib figures.

The CLI's report path writes a run report as JSON; when asked for plot
data it also emits per-stage residual curves as CSV and renders the
companion figures to PNG files in the same directory.
"""

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "stage_residual_rows",
    "write_residual_csv",
    "write_factor_csv",
    "render_figures",
]


def stage_residual_rows(report):
    """Flatten the recomputed stage residuals into (stage, name, value)."""
    data = report.data if hasattr(report, "data") else report
    rows = [("fragmentation", "reconstruction", data["stages"]["fragmentation"]["residual"])]
    for ck, cv in data["stages"]["charts"].items():
        if cv.get("identity"):
            rows.append((ck, "identity", 0.0))
            continue
        rows.append((ck, "foliation-reconstruction", cv["foliation_residual"]))
        for i, lp in enumerate(cv["leaf_preservation"], start=1):
            rows.append((ck, f"leaf-preservation-{i}", lp))
        for i, lw in enumerate(cv["leafwise"], start=1):
            if lw.get("identity"):
                continue
            rows.append((ck, f"leafwise-{i}-worst-leaf", lw["worst_leaf_residual"]))
    rows.append(("total", "c0", data["verification"]["c0_residual"]))
    rows.append(("total", "c1", data["verification"]["c1_residual"]))
    return rows


def write_residual_csv(report, path):
    rows = stage_residual_rows(report)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stage", "name", "residual"])
        writer.writerows(rows)


def write_factor_csv(clist, path):
    """Per-factor summary: provenance, sizes, support boxes."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["index", "chart", "foliation", "stage", "g_c0", "h_c0", "support_lo", "support_hi"]
        )
        for i, p in enumerate(clist.pairs):
            lo, hi = (p.support if p.support else ("", ""))
            writer.writerow(
                [
                    i,
                    p.chart,
                    p.foliation,
                    p.stage,
                    f"{p.g.field.max_norm():.6e}",
                    f"{p.h.field.max_norm():.6e}",
                    lo,
                    hi,
                ]
            )


def render_figures(report, clist, outdir):
    """Render the report figures next to the CSV output.

    stage_residuals.png : log-scale bar chart of every recomputed residual
    factor_sizes.png    : per-factor displacement sizes by stage
    support_map.png     : total factor displacement magnitude over the grid
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    rows = stage_residual_rows(report)
    labels = [f"{s}:{n}" for s, n, _ in rows]
    values = [max(v, 1e-18) for _, _, v in rows]
    fig, ax = plt.subplots(figsize=(8, 3.2))
    ax.bar(range(len(values)), values, color="#3b6ea5")
    ax.set_yscale("log")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel("residual")
    ax.set_title("recomputed residuals by stage")
    fig.tight_layout()
    p = outdir / "stage_residuals.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    written.append(p)

    sizes_g = [p_.g.field.max_norm() for p_ in clist.pairs]
    sizes_h = [p_.h.field.max_norm() for p_ in clist.pairs]
    idx = np.arange(len(clist.pairs))
    fig, ax = plt.subplots(figsize=(7, 3.0))
    ax.plot(idx, sizes_g, "o-", label="g factors", color="#3b6ea5")
    ax.plot(idx, sizes_h, "s-", label="h factors", color="#a53b3b")
    ax.set_yscale("log")
    ax.set_xlabel("pair index (chart-major order)")
    ax.set_ylabel("sup displacement")
    ax.set_title("factor sizes")
    ax.legend(fontsize=8)
    fig.tight_layout()
    p = outdir / "factor_sizes.png"
    fig.savefig(p, dpi=150)
    plt.close(fig)
    written.append(p)

    if clist.pairs and clist.pairs[0].g.grid.n == 2:
        grid = clist.pairs[0].g.grid
        total = np.zeros(grid.shape)
        for p_ in clist.pairs:
            total += np.hypot(p_.g.u[0], p_.g.u[1])
            total += np.hypot(p_.h.u[0], p_.h.u[1])
        fig, ax = plt.subplots(figsize=(4.8, 4.2))
        im = ax.imshow(
            total.T, origin="lower", extent=(0, 1, 0, 1), cmap="magma", aspect="auto"
        )
        fig.colorbar(im, ax=ax, label="summed |u| over factors")
        ax.set_xlabel("base coordinate")
        ax.set_ylabel("fiber coordinate")
        ax.set_title("factor support map")
        fig.tight_layout()
        p = outdir / "support_map.png"
        fig.savefig(p, dpi=150)
        plt.close(fig)
        written.append(p)
    return written
