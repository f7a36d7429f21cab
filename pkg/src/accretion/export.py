"""Field and ledger output: CSV tables, legacy-VTK structured points, front polylines."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from skimage.measure import find_contours

from .backstrain import NEVER
from .constitutive import det2
from .geometry import ANCHOR, BOUNDARY, INTERIOR, OMEGA0, Grid

FIELDS_FILE = "fields.npz"
EXPECTED = (FIELDS_FILE, "summary.json", "config.ini")


class ExportError(FileNotFoundError):
    pass


def _ij(grid: Grid):
    I, J = np.meshgrid(np.arange(grid.nx), np.arange(grid.ny), indexing="ij")
    return I.ravel(), J.ravel()


def _write_table(path, header: list[str], cols: list[np.ndarray], fmts: list[str]) -> None:
    data = np.column_stack(cols)
    np.savetxt(path, data, delimiter=",", header=",".join(header), comments="", fmt=fmts)


def grid_csv(grid: Grid, path) -> None:
    I, J = _ij(grid)
    m = grid.masks.ravel()
    xy = grid.coords.reshape(-1, 2)
    cols = [np.arange(grid.size), I, J, xy[:, 0], xy[:, 1]] + [(m & f) != 0 for f in (INTERIOR, BOUNDARY, OMEGA0, ANCHOR)]
    _write_table(path, ["node", "i", "j", "x", "y", "interior", "boundary", "omega0", "anchor"],
                 cols, ["%d", "%d", "%d", "%.17g", "%.17g", "%d", "%d", "%d", "%d"])


def theta_csv(grid: Grid, theta: np.ndarray, path) -> None:
    I, J = _ij(grid)
    xy = grid.coords.reshape(-1, 2)
    _write_table(path, ["i", "j", "x", "y", "theta"], [I, J, xy[:, 0], xy[:, 1], np.asarray(theta).ravel()],
                 ["%d", "%d", "%.17g", "%.17g", "%.17g"])


def deformation_csv(grid: Grid, y: np.ndarray, F: np.ndarray, path, Fe: np.ndarray | None = None) -> None:
    I, J = _ij(grid)
    xy = grid.coords.reshape(-1, 2)
    yy = y.reshape(-1, 2)
    cols = [I, J, xy[:, 0], xy[:, 1], yy[:, 0], yy[:, 1], det2(F).ravel()]
    head = ["i", "j", "x", "y", "y1", "y2", "det_grad_y"]
    if Fe is not None:
        fe = Fe.reshape(-1, 4)
        cols += [fe[:, k] for k in range(4)]
        head += ["Fe11", "Fe12", "Fe21", "Fe22"]
    _write_table(path, head, cols, ["%d", "%d"] + ["%.17g"] * (len(cols) - 2))


def backstrain_csv(grid: Grid, A: np.ndarray, slab: np.ndarray, path) -> None:
    I, J = _ij(grid)
    xy = grid.coords.reshape(-1, 2)
    a = A.reshape(-1, 4)
    s = slab.ravel().astype(float)
    s[slab.ravel() == NEVER] = np.inf
    _write_table(path, ["i", "j", "x", "y", "A11", "A12", "A21", "A22", "detA", "slab"],
                 [I, J, xy[:, 0], xy[:, 1], a[:, 0], a[:, 1], a[:, 2], a[:, 3], det2(A).ravel(), s],
                 ["%d", "%d"] + ["%.17g"] * 8)


def write_vtk(path, grid: Grid, fields: dict[str, np.ndarray], title: str = "accretion") -> None:
    """Legacy ASCII VTK structured points; ``(nx,ny)`` arrays become scalars, ``(nx,ny,2)`` vectors."""
    lines = [
        "# vtk DataFile Version 3.0",
        title[:255],
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {grid.nx} {grid.ny} 1",
        "ORIGIN 0 0 0",
        f"SPACING {grid.h:.17g} {grid.h:.17g} 1",
        f"POINT_DATA {grid.size}",
    ]
    for name, arr in fields.items():
        arr = np.asarray(arr, float)
        # VTK point order runs x fastest
        if arr.shape == grid.shape:
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [f"{v:.17g}" for v in arr.T.ravel()]
        elif arr.shape == grid.shape + (2,):
            lines += [f"VECTORS {name} double"]
            v = np.transpose(arr, (1, 0, 2)).reshape(-1, 2)
            lines += [f"{a:.17g} {b:.17g} 0" for a, b in v]
        else:
            raise ValueError(f"field {name} has unsupported shape {arr.shape}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_vtk_scalars(path) -> dict[str, np.ndarray]:
    """Minimal reader for the files written by :func:`write_vtk` (scalars only)."""
    tok = Path(path).read_text().split("\n")
    dims = next(l for l in tok if l.startswith("DIMENSIONS")).split()[1:3]
    nx, ny = int(dims[0]), int(dims[1])
    out, k = {}, 0
    while k < len(tok):
        if tok[k].startswith("SCALARS"):
            name = tok[k].split()[1]
            vals = np.array([float(v) for v in tok[k + 2 : k + 2 + nx * ny]])
            out[name] = vals.reshape(ny, nx).T
            k += 2 + nx * ny
        else:
            k += 1
    return out


def front_contours(grid: Grid, theta: np.ndarray, t: float) -> list[np.ndarray]:
    """Polylines of the level set ``theta = t`` in physical coordinates (marching squares)."""
    return [c * grid.h for c in find_contours(np.asarray(theta, float), level=t)]


def fronts_csv(grid: Grid, theta: np.ndarray, times, path) -> list[list[np.ndarray]]:
    rows, all_c = [], []
    cid = 0
    for t in times:
        cs = front_contours(grid, theta, t)
        all_c.append(cs)
        for c in cs:
            closed = bool(np.allclose(c[0], c[-1]))
            for pt in c:
                rows.append((cid, t, pt[0], pt[1], closed))
            cid += 1
    with open(path, "w") as fh:
        fh.write("contour,t,x,y,closed\n")
        for r in rows:
            fh.write(f"{r[0]},{r[1]:.17g},{r[2]:.17g},{r[3]:.17g},{int(r[4])}\n")
    return all_c


def polygon_area(c: np.ndarray) -> float:
    x, y = c[:, 0], c[:, 1]
    return 0.5 * float(abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def write_json(path, obj) -> None:
    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, set):
            return sorted(o)
        raise TypeError(type(o))

    Path(path).write_text(json.dumps(obj, indent=2, default=default, allow_nan=True) + "\n")


def check_run_dir(run_dir) -> Path:
    run_dir = Path(run_dir)
    missing = [f for f in EXPECTED if not (run_dir / f).exists()]
    if missing:
        raise ExportError(f"{run_dir}: missing {', '.join(missing)} (expected {', '.join(EXPECTED)})")
    return run_dir
