"""Trajectory figure: the full ground track with start/target markers and
a zoom panel covering the final hold phase, where the limit cycle lives.

Input schema (harness trajectory dump):
    t, x, y, theta, vx, vy, theta_dot, omega_rw, torque, u1..u8

The zoom window is exactly the last `hold` seconds of the run.  Returns a
structural summary: sample count, inset time window, inset sample count,
and the files written.
"""

import argparse
import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

REQUIRED_COLUMNS = ("t", "x", "y", "theta")


def read_trajectory(path: str) -> dict:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(REQUIRED_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        cols = {name: [] for name in reader.fieldnames}
        for row in reader:
            for name, value in row.items():
                cols[name].append(float(value))
    return {name: np.asarray(vals) for name, vals in cols.items()}


def plot_trajectory(csv_path: str, outdir: str, hold: float = 20.0,
                    stem: str | None = None) -> dict:
    data = read_trajectory(csv_path)
    os.makedirs(outdir, exist_ok=True)
    t = data["t"]
    x = data["x"]
    y = data["y"]
    t_end = float(t[-1])
    window = (max(float(t[0]), t_end - hold), t_end)
    inset_mask = t >= window[0]

    fig, (ax, axz) = plt.subplots(
        1, 2, figsize=(8.0, 3.8), gridspec_kw={"width_ratios": [1.6, 1.0]})
    ax.plot(x, y, color="#1b1b1b", linewidth=0.9)
    ax.plot(x[0], y[0], marker="o", color="#1b1b1b", markersize=6,
            linestyle="none", label="start")
    ax.plot(0.0, 0.0, marker="*", color="#6a6a6a", markersize=11,
            linestyle="none", label="target")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, alpha=0.25)
    ax.legend(fontsize=7, loc="best")

    axz.plot(x[inset_mask], y[inset_mask], color="#1b1b1b", linewidth=0.9)
    axz.plot(0.0, 0.0, marker="*", color="#6a6a6a", markersize=11,
             linestyle="none")
    axz.set_xlabel("x [m]")
    axz.set_ylabel("y [m]")
    axz.set_title(f"final {window[1] - window[0]:.0f} s", fontsize=8)
    axz.set_aspect("equal", adjustable="datalim")
    axz.grid(True, alpha=0.25)

    fig.tight_layout()
    stem = stem or os.path.splitext(os.path.basename(csv_path))[0]
    files = []
    for ext in ("png", "svg"):
        out = os.path.join(outdir, f"{stem}.{ext}")
        fig.savefig(out, dpi=160)
        files.append(out)
    plt.close(fig)
    return {
        "samples": int(t.size),
        "inset_window": window,
        "inset_samples": int(np.count_nonzero(inset_mask)),
        "files": files,
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("trajectory", help="trajectory CSV from the harness")
    parser.add_argument("--outdir", default=".", help="output directory")
    parser.add_argument("--hold", type=float, default=20.0,
                        help="length of the final hold phase shown in the inset")
    args = parser.parse_args(argv)
    summary = plot_trajectory(args.trajectory, args.outdir, hold=args.hold)
    print(f"{summary['samples']} samples; inset {summary['inset_window'][0]:.2f}"
          f"..{summary['inset_window'][1]:.2f} s"
          f" ({summary['inset_samples']} samples)")
    for path in summary["files"]:
        print(f"-> {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
