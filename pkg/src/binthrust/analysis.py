"""Batch post-processing: Pareto fronts and per-controller summary tables.

The comparison artifacts mirror the study's figures: thrust usage during
station-keeping against position error, thrust usage while reaching
against time-to-reach, and orientation error against station-keeping
usage.  Fronts are computed over successful runs only; failures and
solver-aborted records are tallied separately.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

CONTROLLER_ORDER = ("mimpc", "continuous", "informed")


def pareto_front(points):
    """Non-dominated subset under minimization of both coordinates.

    points: iterable of (usage, objective) or (usage, objective, seed).
    Returns the front sorted by usage ascending; exact ties on both
    coordinates keep the lowest seed.
    """
    cleaned = []
    for p in points:
        if len(p) == 2:
            usage, objective = p
            seed = len(cleaned)
        else:
            usage, objective, seed = p
        if not (np.isfinite(usage) and np.isfinite(objective)):
            raise ValueError("pareto_front requires finite points")
        cleaned.append((float(usage), float(objective), seed))
    if not cleaned:
        return []
    # after this sort, a point is non-dominated exactly when its objective
    # strictly improves on everything before it; coordinate ties resolve to
    # the lowest seed automatically
    cleaned.sort(key=lambda p: (p[0], p[1], p[2]))
    front = []
    best_obj = np.inf
    for usage, objective, seed in cleaned:
        if objective < best_obj:
            front.append((usage, objective, seed))
            best_obj = objective
    return front


def front_value_at(front, usage):
    """Objective achievable at a given usage level: the best front point
    with usage <= the query (staircase interpolation)."""
    best = None
    for u, obj, _seed in front:
        if u <= usage:
            best = obj
        else:
            break
    return best


@dataclass
class ControllerSummary:
    controller: str
    runs: int
    successes: int
    invalid: int
    success_rate: float
    time_to_reach: dict
    position_error: dict
    orientation_error: dict
    usage_reach: dict
    usage_stay: dict
    front_stay_error: list       # (usage_stay, position error, seed)
    front_reach_time: list       # (usage_reach, time_to_reach, seed)


def _distribution(values) -> dict:
    if not values:
        return {"count": 0}
    arr = np.asarray(values, dtype=float)
    return {
        "count": int(arr.size),
        "mean": float(arr.mean()),
        "min": float(arr.min()),
        "max": float(arr.max()),
        "median": float(np.median(arr)),
    }


def summarize(records) -> dict[str, ControllerSummary]:
    """Aggregate parsed record dicts (see sim_harness.load_records)."""
    by_controller: dict[str, list[dict]] = {}
    for rec in records:
        by_controller.setdefault(rec["config"]["controller"], []).append(rec)
    out = {}
    for controller, recs in sorted(by_controller.items()):
        valid = [r for r in recs if r["status"] != "invalid"]
        if not valid:
            raise ValueError(f"no valid records for controller {controller!r}")
        succ = [r for r in valid if r["status"] == "success"]
        stay_pts = [(r["metrics"]["avg_thrust_usage_stay"],
                     r["metrics"]["avg_position_error_at_target"],
                     r["config"]["seed"]) for r in succ]
        reach_pts = [(r["metrics"]["avg_thrust_usage_reach"],
                      r["metrics"]["time_to_reach"],
                      r["config"]["seed"]) for r in succ]
        out[controller] = ControllerSummary(
            controller=controller,
            runs=len(recs),
            successes=len(succ),
            invalid=len(recs) - len(valid),
            success_rate=len(succ) / len(valid),
            time_to_reach=_distribution([r["metrics"]["time_to_reach"] for r in succ]),
            position_error=_distribution(
                [r["metrics"]["avg_position_error_at_target"] for r in succ]),
            orientation_error=_distribution(
                [r["metrics"]["avg_orientation_error_at_target"] for r in succ]),
            usage_reach=_distribution(
                [r["metrics"]["avg_thrust_usage_reach"] for r in succ]),
            usage_stay=_distribution(
                [r["metrics"]["avg_thrust_usage_stay"] for r in succ]),
            front_stay_error=pareto_front(stay_pts),
            front_reach_time=pareto_front(reach_pts),
        )
    return out


def write_figure_csvs(records, outdir: str) -> dict[str, str]:
    """Emit the three figure-source CSVs; returns name -> path.

    fig2-left.csv : controller, seed, usage_stay, position_error_m, on_front
    fig2-right.csv: controller, seed, usage_reach, time_to_reach_s, on_front
    fig3.csv      : controller, seed, usage_stay, orientation_error_rad
    summary.csv   : one row per controller with headline statistics
    """
    import os

    summaries = summarize(records)
    paths = {}

    def row_key(rec):
        return (rec["config"]["controller"], rec["config"]["seed"])

    succ = [r for r in records if r["status"] == "success"]
    succ.sort(key=row_key)

    spec = {
        "fig2-left.csv": ("usage_stay", "position_error_m",
                          "avg_thrust_usage_stay", "avg_position_error_at_target",
                          "front_stay_error"),
        "fig2-right.csv": ("usage_reach", "time_to_reach_s",
                           "avg_thrust_usage_reach", "time_to_reach",
                           "front_reach_time"),
    }
    for fname, (ucol, mcol, ukey, mkey, front_attr) in spec.items():
        path = os.path.join(outdir, fname)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["controller", "seed", ucol, mcol, "on_front"])
            for rec in succ:
                controller = rec["config"]["controller"]
                front = getattr(summaries[controller], front_attr)
                front_keys = {(u, m, s) for u, m, s in front}
                u = rec["metrics"][ukey]
                m = rec["metrics"][mkey]
                on_front = int((u, m, rec["config"]["seed"]) in front_keys)
                writer.writerow([controller, rec["config"]["seed"],
                                 repr(float(u)), repr(float(m)), on_front])
        paths[fname] = path

    path = os.path.join(outdir, "fig3.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["controller", "seed", "usage_stay", "orientation_error_rad"])
        for rec in succ:
            writer.writerow([
                rec["config"]["controller"], rec["config"]["seed"],
                repr(float(rec["metrics"]["avg_thrust_usage_stay"])),
                repr(float(rec["metrics"]["avg_orientation_error_at_target"])),
            ])
    paths["fig3.csv"] = path

    path = os.path.join(outdir, "summary.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["controller", "runs", "successes", "invalid", "success_rate",
                         "mean_time_to_reach_s", "min_usage_stay", "min_usage_reach",
                         "mean_position_error_m", "mean_orientation_error_rad"])
        for controller in sorted(summaries):
            s = summaries[controller]
            writer.writerow([
                controller, s.runs, s.successes, s.invalid,
                "%.6g" % s.success_rate,
                "%.6g" % s.time_to_reach.get("mean", float("nan")),
                "%.6g" % s.usage_stay.get("min", float("nan")),
                "%.6g" % s.usage_reach.get("min", float("nan")),
                "%.6g" % s.position_error.get("mean", float("nan")),
                "%.6g" % s.orientation_error.get("mean", float("nan")),
            ])
    paths["summary.csv"] = path
    return paths
