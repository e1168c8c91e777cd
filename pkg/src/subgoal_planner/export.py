"""CSV and SVG export of evaluation rows.

CSV columns::

    variant,problem_id,seed,success,subgoal_count,total_cost,path_length,subgoal_costs

``success`` is ``0``/``1`` and ``subgoal_costs`` joins the per-leg check counts
with ``;``. Rows are written sorted by variant and problem id (stable).
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .evaluation import EvalRow

HEADER = ["variant", "problem_id", "seed", "success", "subgoal_count", "total_cost", "path_length",
          "subgoal_costs"]


def _ordered(rows) -> list:
    return sorted(rows, key=lambda r: (r.variant, r.problem_id))


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in _ordered(rows):
        w.writerow([r.variant, r.problem_id, r.seed, int(r.success), r.subgoal_count, r.total_cost,
                    repr(float(r.path_length)), ";".join(str(c) for c in r.subgoal_costs)])
    return buf.getvalue()


def rows_from_csv(text: str) -> list:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != HEADER:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    out = []
    for d in reader:
        costs = [int(c) for c in d["subgoal_costs"].split(";") if c]
        out.append(EvalRow(d["variant"], d["problem_id"], int(d["seed"]), d["success"] == "1", costs,
                           int(d["total_cost"]), float(d["path_length"]), int(d["subgoal_count"])))
    return out


def write_csv(rows, path) -> None:
    Path(path).write_text(rows_to_csv(rows))


def read_csv(path) -> list:
    return rows_from_csv(Path(path).read_text())


def rows_to_svg(rows, t_d: float) -> str:
    """Per-variant histograms of leg costs with the 1x, 2x and 4x budget lines."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    by_variant = {}
    for r in _ordered(rows):
        by_variant.setdefault(r.variant, []).extend(r.subgoal_costs)
    names = list(by_variant) or ["(no rows)"]
    with matplotlib.rc_context({"svg.hashsalt": "subgoal-planner", "svg.fonttype": "none"}):
        fig, axes = plt.subplots(len(names), 1, figsize=(6, 1.8 * len(names) + 0.6), squeeze=False)
        all_costs = [c for v in by_variant.values() for c in v]
        hi = max(max(all_costs, default=1), 8 * t_d)
        bins = np.logspace(0, np.log10(hi), 40)
        for ax, name in zip(axes[:, 0], names):
            costs = by_variant.get(name, [])
            if costs:
                ax.hist(costs, bins=bins, color="0.45")
            for k, style in ((1, "-"), (2, "--"), (4, ":")):
                ax.axvline(k * t_d, color="crimson", linestyle=style, linewidth=1)
            ax.set_xscale("log")
            ax.set_ylabel(name)
        axes[-1, 0].set_xlabel("plan cost [collision checks]")
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


def write_svg(rows, t_d: float, path) -> None:
    Path(path).write_text(rows_to_svg(rows, t_d))


def export_results(rows, out_dir, t_d: float, stem: str = "results") -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and ``<stem>.svg`` into ``out_dir``; returns both paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path, svg_path = out_dir / f"{stem}.csv", out_dir / f"{stem}.svg"
    write_csv(rows, csv_path)
    write_svg(rows, t_d, svg_path)
    return csv_path, svg_path
