"""Result export: legacy ASCII VTK snapshots and CSV histories.

All number formatting uses ``repr``-exact ``%.17g`` so repeated runs with
the same inputs write byte-identical files.
"""

import csv
import os

import numpy as np

from .geometry import classify_and_measure, export_isosurface

HISTORY_COLUMNS = ("step", "t", "lambda", "cost", "vol_hard_frac", "vol_soft_frac",
                   "iterations", "wall_ms")
COMPARISON_COLUMNS = ("step", "t", "iters_closed_form", "iters_levelset")


def _fmt(x):
    return "%.17g" % float(x)


def _block(values, per_line=6):
    values = np.asarray(values, dtype=float).ravel()
    lines = []
    for i in range(0, values.size, per_line):
        lines.append(" ".join(_fmt(v) for v in values[i:i + per_line]))
    return "\n".join(lines)


def write_structured_vtk(path, grid, cell_data=None, point_data=None, title="rtdtopo"):
    """Write a legacy ASCII ``STRUCTURED_POINTS`` file.

    ``cell_data`` and ``point_data`` map names to scalar arrays with one value
    per element or node (x fastest, matching the grid numbering).
    """
    dims = list(grid.node_dims) + [1] * (3 - grid.dim)
    spacing = list(grid.h) + [1.0] * (3 - grid.dim)
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET STRUCTURED_POINTS",
           "DIMENSIONS %d %d %d" % tuple(dims), "ORIGIN 0 0 0",
           "SPACING " + " ".join(_fmt(s) for s in spacing)]
    for header, n, data in (("CELL_DATA", grid.n_elements, cell_data),
                            ("POINT_DATA", grid.n_nodes, point_data)):
        if not data:
            continue
        out.append(f"{header} {n}")
        for name, values in data.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (n,):
                raise ValueError(f"{header} field {name!r} must have {n} values")
            out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default", _block(values)]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


def write_polydata_vtk(path, points, cells, normals=None, title="interface"):
    """Write segments (2D) or triangles (3D) as legacy ASCII ``POLYDATA``."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    cells = np.asarray(cells, dtype=np.int64)
    kind = "LINES" if cells.ndim == 2 and cells.shape[1] == 2 else "POLYGONS"
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET POLYDATA",
           f"POINTS {len(points)} double"]
    out += [" ".join(_fmt(v) for v in p) for p in points]
    k = cells.shape[1] if cells.ndim == 2 else 0
    out.append(f"{kind} {len(cells)} {len(cells) * (k + 1)}")
    out += [" ".join(str(int(v)) for v in (k, *c)) for c in cells]
    if normals is not None and len(cells):
        out += [f"CELL_DATA {len(cells)}", "NORMALS normals double"]
        out += [" ".join(_fmt(v) for v in n) for n in np.asarray(normals).reshape(-1, 3)]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


def write_snapshot(out_dir, prefix, grid, record):
    """Write the field file and the interface file of one step record.

    Returns the two paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    base = os.path.join(out_dir, f"{prefix}_{record.step:04d}")
    write_structured_vtk(base + ".vtk", grid,
                         cell_data={"chi": record.chi, "xi": record.xi},
                         point_data={"psi_tau": record.psi_tau},
                         title=f"{prefix} step {record.step} t={_fmt(record.t)}")
    snap = classify_and_measure(grid, record.psi_tau)
    pts, cells, normals = export_isosurface(snap)
    write_polydata_vtk(base + "_interface.vtk", pts, cells, normals,
                       title=f"{prefix} interface step {record.step}")
    return base + ".vtk", base + "_interface.vtk"


def history_rows(history, timing=False):
    """CSV rows (strings) for a list of step records."""
    rows = []
    for r in history:
        rows.append((str(r.step), _fmt(r.t), _fmt(r.lam), _fmt(r.cost), _fmt(r.vol_hard_frac),
                     _fmt(r.vol_soft_frac), str(r.iterations),
                     _fmt(r.wall_ms if timing else 0.0)))
    return rows


def write_history_csv(path, history, timing=False):
    """History CSV; ``wall_ms`` is written as 0 unless ``timing`` (keeps files byte-stable)."""
    with open(path, "w", encoding="ascii", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        w.writerows(history_rows(history, timing))


def write_comparison_csv(path, closed_form, levelset):
    """Per-step iteration counts of both methods over the shared schedule."""
    if len(closed_form) != len(levelset):
        raise ValueError("histories must cover the same schedule")
    with open(path, "w", encoding="ascii", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARISON_COLUMNS)
        for a, b in zip(closed_form, levelset):
            w.writerow((str(a.step), _fmt(a.t), str(a.iterations), str(b.iterations)))


def read_history_csv(path):
    """Read a history CSV back into a dict of numpy columns."""
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=float, ndmin=1)
    return {name: np.asarray(data[name]) for name in data.dtype.names}
