"""Batch figure rendering from uavbc CSV result tables.

Five figure kinds are supported:

  trajectory   flight path map; CEs marked with triangles and BDs with
               asterisks when a scenario document is supplied alongside
               the trajectory table
  sweep        energy efficiency versus a swept parameter, per scheme
  allocation   transmission-time share per backscatter device
  timeline     per-slot speed and transmit power curves
  convergence  energy efficiency per optimizer block update

Each renderer reads only the documented CSV columns and fails with a
descriptive error (writing nothing) when a required column or any data
row is missing.
"""

import argparse
import csv
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt   # noqa: E402
import numpy as np                # noqa: E402

KINDS = ("trajectory", "sweep", "allocation", "timeline", "convergence")


class RenderError(Exception):
    """An input table is missing, empty or lacks required columns."""


@dataclass
class FigureSpec:
    kind: str
    inputs: list
    output: str
    title: str = ""
    dpi: int = 120
    style: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RenderError(
                f"unknown figure kind {self.kind!r}; expected one of "
                + ", ".join(KINDS))
        if not self.inputs:
            raise RenderError("at least one input file is required")


def read_table(path: str) -> dict:
    """CSV table as {column: list of strings}; errors on empty tables."""
    if not os.path.exists(path):
        raise RenderError(f"input table not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise RenderError(f"{path}: missing header row")
        rows = list(reader)
    if not rows:
        raise RenderError(f"{path}: table has no data rows")
    return {name: [row[name] for row in rows] for name in reader.fieldnames}


def require_columns(table: dict, columns, path: str):
    missing = [c for c in columns if c not in table]
    if missing:
        raise RenderError(
            f"{path}: missing required column(s) {', '.join(missing)}; "
            f"found {', '.join(table)}")


def floats(table: dict, column: str) -> np.ndarray:
    return np.array([float(v) for v in table[column]])


def split_inputs(paths) -> tuple:
    """(csv paths, scenario document or None) from a mixed input list."""
    tables = [p for p in paths if not p.endswith(".json")]
    scenario = None
    for p in paths:
        if p.endswith(".json"):
            with open(p) as fh:
                scenario = json.load(fh)
    if not tables:
        raise RenderError("no CSV table among the inputs")
    return tables, scenario


def trajectory_polyline(table: dict, path: str = "<table>") -> np.ndarray:
    """Closed (first point repeated last) flight polyline from a
    trajectory table, shape (N+1, 2)."""
    require_columns(table, ("x_m", "y_m"), path)
    pts = np.column_stack([floats(table, "x_m"), floats(table, "y_m")])
    return np.vstack([pts, pts[:1]])


def render(spec: FigureSpec) -> str:
    """Render the figure and atomically write the image; returns its path."""
    renderer = {
        "trajectory": _render_trajectory,
        "sweep": _render_sweep,
        "allocation": _render_allocation,
        "timeline": _render_timeline,
        "convergence": _render_convergence,
    }[spec.kind]
    fig = renderer(spec)
    if spec.title:
        fig.suptitle(spec.title)
    directory = os.path.dirname(os.path.abspath(spec.output))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    os.close(fd)
    try:
        ext = os.path.splitext(spec.output)[1].lstrip(".") or "png"
        fig.savefig(tmp, dpi=spec.dpi, format=ext, bbox_inches="tight")
        os.replace(tmp, spec.output)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    finally:
        plt.close(fig)
    return spec.output


def _render_trajectory(spec):
    tables, scenario = split_inputs(spec.inputs)
    table = read_table(tables[0])
    poly = trajectory_polyline(table, tables[0])
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.plot(poly[:, 0], poly[:, 1], "-", color="tab:blue", lw=1.5,
            label="UAV path")
    ax.plot(poly[0, 0], poly[0, 1], "o", color="tab:blue", ms=5)
    if scenario is not None:
        ce = np.asarray(scenario.get("ce_positions_m", []), float)
        bd = np.asarray(scenario.get("bd_positions_m", []), float)
        if ce.size:
            ax.plot(ce[:, 0], ce[:, 1], "^", color="tab:red", ms=10,
                    ls="none", label="CE")
        if bd.size:
            ax.plot(bd[:, 0], bd[:, 1], "*", color="tab:green", ms=10,
                    ls="none", label="BD")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(loc="best")
    ax.grid(True, alpha=0.3)
    return fig


def _render_sweep(spec):
    tables, _ = split_inputs(spec.inputs)
    path = tables[0]
    table = read_table(path)
    require_columns(table, ("value", "scheme", "ee"), path)
    fig, ax = plt.subplots(figsize=(6, 4))
    schemes = sorted(set(table["scheme"]))
    for scheme in schemes:
        pts = [(float(v), float(e))
               for v, s, e in zip(table["value"], table["scheme"],
                                  table["ee"])
               if s == scheme and e != ""]
        if not pts:
            continue
        pts.sort()
        xs, ys = zip(*pts)
        ax.plot(xs, ys, "o-", label=scheme)
    param = table.get("param", ["parameter"])[0]
    ax.set_xlabel(param)
    ax.set_ylabel("EE (bits/Hz/J)")
    ax.legend(loc="best")
    ax.grid(True, alpha=0.3)
    return fig


def _render_allocation(spec):
    tables, _ = split_inputs(spec.inputs)
    path = tables[0]
    table = read_table(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    if "hover_time_s" in table:
        require_columns(table, ("slot", "hover_time_s"), path)
        labels = table["slot"]
        shares = floats(table, "hover_time_s")
        ax.set_ylabel("hover time (s)")
    else:
        require_columns(table, ("bd",), path)
        counts = {}
        for bd in table["bd"]:
            counts[bd] = counts.get(bd, 0) + 1
        labels = sorted(counts, key=lambda b: (b == "none", b))
        shares = np.array([counts[b] for b in labels], float)
        ax.set_ylabel("scheduled slots")
    ax.bar(range(len(labels)), shares, color="tab:blue")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels)
    ax.set_xlabel("device")
    ax.grid(True, axis="y", alpha=0.3)
    return fig


def _render_timeline(spec):
    tables, _ = split_inputs(spec.inputs)
    path = tables[0]
    table = read_table(path)
    require_columns(table, ("slot", "speed_mps", "active_ce_power_w"), path)
    slots = floats(table, "slot")
    fig, ax1 = plt.subplots(figsize=(7, 4))
    ax1.plot(slots, floats(table, "speed_mps"), "-", color="tab:blue",
             label="speed")
    ax1.set_xlabel("slot")
    ax1.set_ylabel("speed (m/s)", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(slots, floats(table, "active_ce_power_w"), "--",
             color="tab:red", label="active CE power")
    ax2.set_ylabel("power (W)", color="tab:red")
    ax1.grid(True, alpha=0.3)
    return fig


def _render_convergence(spec):
    tables, _ = split_inputs(spec.inputs)
    path = tables[0]
    table = read_table(path)
    require_columns(table, ("index", "ee"), path)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(floats(table, "index"), floats(table, "ee"), "o-",
            color="tab:blue", ms=3)
    ax.set_xlabel("block update")
    ax.set_ylabel("EE (bits/Hz/J)")
    ax.grid(True, alpha=0.3)
    return fig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="uavbc-render",
        description="Render a figure from uavbc result tables")
    parser.add_argument("command", choices=("render",))
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        metavar="FILE")
    parser.add_argument("--out", required=True)
    parser.add_argument("--title", default="")
    parser.add_argument("--dpi", type=int, default=120)
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec(kind=args.kind, inputs=args.inputs,
                          output=args.out, title=args.title, dpi=args.dpi)
        path = render(spec)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
