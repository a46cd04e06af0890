"""CSV writers; every file has a single writer."""
from __future__ import annotations

import csv
import io
import pathlib

import numpy as np

from .mesh import Mesh
from .stepper import psi

__all__ = ["trajectory_csv", "solution_csv", "write_text", "FAILED"]

FAILED = "FAILED"


def trajectory_csv(steps, times, mesh: Mesh, m: float, failure: str = "") -> str:
    """Rows "time,node_index,coordinate,W,U" over all nodes; U = psi(W)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", "node_index", "coordinate", "W", "U"])
    full = mesh.to_full(np.asarray(steps, dtype=float))
    U = psi(full, m)
    for n, t in enumerate(times[:full.shape[0]]):
        for i, x in enumerate(mesh.nodes):
            w.writerow([repr(float(t)), i, repr(float(x)), repr(float(full[n, i])),
                        repr(float(U[n, i]))])
    if failure:
        buf.write(f"{FAILED} {failure}\n")
    return buf.getvalue()


def solution_csv(V, mesh: Mesh, m: float) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["node_index", "coordinate", "V", "psi_V"])
    full = mesh.to_full(V)
    for i, (x, v) in enumerate(zip(mesh.nodes, full)):
        w.writerow([i, repr(float(x)), repr(float(v)), repr(float(psi(v, m)))])
    return buf.getvalue()


def write_text(path, text: str) -> None:
    if not path:
        return
    pathlib.Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)
