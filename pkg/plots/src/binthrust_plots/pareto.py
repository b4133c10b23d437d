"""Pareto-front panels: every successful run as a dot, the non-dominated
runs joined by a solid line, one series per controller.

Input schemas (from the analysis stage):
    fig2-left.csv : controller, seed, usage_stay, position_error_m, on_front
    fig2-right.csv: controller, seed, usage_reach, time_to_reach_s, on_front

Usage is plotted in percent, position error in millimeters, time in
seconds.  Returns a structural summary per panel:
    {panel: {controller: {"points": n, "front_vertices": m}}}
"""

import argparse
import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .style import style_for

PANELS = {
    "fig2-left": {
        "usage_col": "usage_stay",
        "metric_col": "position_error_m",
        "metric_scale": 1000.0,
        "xlabel": "average thrust usage while station-keeping [%]",
        "ylabel": "average position error [mm]",
    },
    "fig2-right": {
        "usage_col": "usage_reach",
        "metric_col": "time_to_reach_s",
        "metric_scale": 1.0,
        "xlabel": "average thrust usage while reaching [%]",
        "ylabel": "time to reach [s]",
    },
}


def read_panel_csv(path: str, usage_col: str, metric_col: str) -> dict:
    """Rows grouped by controller; missing columns reported by name."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"controller", "seed", usage_col, metric_col, "on_front"} \
            - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        grouped: dict[str, list] = {}
        for row in reader:
            grouped.setdefault(row["controller"], []).append((
                float(row[usage_col]),
                float(row[metric_col]),
                int(row["on_front"]),
            ))
    return grouped


def render_panel(path_csv: str, panel: str, outdir: str) -> dict:
    spec = PANELS[panel]
    grouped = read_panel_csv(path_csv, spec["usage_col"], spec["metric_col"])
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    summary = {}
    for controller in sorted(grouped):
        style = style_for(controller)
        rows = grouped[controller]
        xs = [100.0 * u for u, _, _ in rows]
        ys = [spec["metric_scale"] * m for _, m, _ in rows]
        ax.plot(xs, ys, linestyle="none", marker=style["marker"],
                color=style["color"], markersize=3, alpha=0.45)
        front = sorted(((100.0 * u, spec["metric_scale"] * m)
                        for u, m, flag in rows if flag), key=lambda p: p[0])
        if front:
            ax.plot([p[0] for p in front], [p[1] for p in front],
                    linestyle=style["linestyle"], marker=style["marker"],
                    color=style["color"], markersize=4, label=style["label"])
        summary[controller] = {"points": len(rows), "front_vertices": len(front)}
    ax.set_xlabel(spec["xlabel"])
    ax.set_ylabel(spec["ylabel"])
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.grid(True, which="both", alpha=0.25)
    ax.legend(fontsize=7)
    fig.tight_layout()
    paths = []
    for ext in ("png", "svg"):
        out = os.path.join(outdir, f"{panel}.{ext}")
        fig.savefig(out, dpi=160)
        paths.append(out)
    plt.close(fig)
    summary["_files"] = paths
    return summary


def plot_pareto(left_csv: str, right_csv: str, outdir: str) -> dict:
    os.makedirs(outdir, exist_ok=True)
    return {
        "fig2-left": render_panel(left_csv, "fig2-left", outdir),
        "fig2-right": render_panel(right_csv, "fig2-right", outdir),
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--left", required=True, help="fig2-left.csv")
    parser.add_argument("--right", required=True, help="fig2-right.csv")
    parser.add_argument("--outdir", default=".", help="output directory")
    args = parser.parse_args(argv)
    summary = plot_pareto(args.left, args.right, args.outdir)
    for panel, info in summary.items():
        files = ", ".join(os.path.basename(p) for p in info.pop("_files"))
        print(f"{panel}: {files}")
        for controller, stats in sorted(info.items()):
            print(f"  {controller}: {stats['points']} points, "
                  f"{stats['front_vertices']} front vertices")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
