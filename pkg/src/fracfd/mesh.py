"""1D meshes for the solution interval and its interaction collar.

A mesh covers ``[a - collar_width, b + collar_width]``.  Nodes strictly inside
``(a, b)`` carry unknowns; every other node is pinned to zero by the volume
constraint.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = ["Mesh", "build_uniform_mesh", "refine", "prolongate", "dump_mesh"]


def _frozen(a, dtype):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray
    domain: tuple
    collar_width: float = 0.0
    parent: Optional["Mesh"] = field(default=None, repr=False)
    shape_constant: float = 0.25

    def __post_init__(self):
        nodes = _frozen(self.nodes, float)
        object.__setattr__(self, "nodes", nodes)
        a, b = (float(v) for v in self.domain)
        object.__setattr__(self, "domain", (a, b))
        c = float(self.collar_width)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ValueError("a mesh needs at least three nodes")
        if not np.all(np.isfinite(nodes)):
            raise ValueError("non-finite node coordinates")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if nodes[0] != a - c or nodes[-1] != b + c:
            raise ValueError("mesh must span [a - collar_width, b + collar_width]")
        lengths = np.diff(nodes)
        if lengths.min() < self.shape_constant * lengths.max():
            raise ValueError(
                f"shape regularity violated: min/max element length "
                f"{lengths.min() / lengths.max():.3g} < {self.shape_constant}")
        if self.parent is not None:
            if not np.all(np.isin(self.parent.nodes, nodes)):
                raise ValueError("parent nodes are not a subset of this mesh")

        inside = (nodes > a) & (nodes < b)
        object.__setattr__(self, "_free", _frozen(np.flatnonzero(inside), np.intp))
        object.__setattr__(self, "_constrained", _frozen(np.flatnonzero(~inside), np.intp))
        if self._free.size == 0:
            raise ValueError("mesh has no free nodes")

    @property
    def elements(self) -> np.ndarray:
        idx = np.arange(self.nodes.size - 1)
        return np.column_stack([idx, idx + 1])

    @property
    def free_nodes(self) -> np.ndarray:
        return self._free

    @property
    def constrained_nodes(self) -> np.ndarray:
        return self._constrained

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def n_elements(self) -> int:
        return self.nodes.size - 1

    @property
    def n_free(self) -> int:
        return self._free.size

    @property
    def element_lengths(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def h(self) -> float:
        """Largest element length inside the solution interval."""
        a, b = self.domain
        lengths = self.element_lengths
        mid = 0.5 * (self.nodes[:-1] + self.nodes[1:])
        return float(lengths[(mid > a) & (mid < b)].max())

    @property
    def extent(self) -> tuple:
        return float(self.nodes[0]), float(self.nodes[-1])

    def ancestors(self):
        m = self.parent
        while m is not None:
            yield m
            m = m.parent

    def to_full(self, free_values) -> np.ndarray:
        """Scatter free-node values into a full nodal vector (zero elsewhere)."""
        free_values = np.asarray(free_values, dtype=float)
        out = np.zeros(free_values.shape[:-1] + (self.n_nodes,))
        out[..., self._free] = free_values
        return out

    def to_free(self, full_values) -> np.ndarray:
        return np.asarray(full_values, dtype=float)[..., self._free]

    def interpolate(self, func) -> np.ndarray:
        """Nodal interpolant of ``func`` over the free nodes."""
        return np.asarray(func(self.nodes[self._free]), dtype=float)


def build_uniform_mesh(a, b, n_elements, collar_width=0.0, shape_constant=0.25) -> Mesh:
    a, b, collar_width = float(a), float(b), float(collar_width)
    if not (math.isfinite(a) and math.isfinite(b) and math.isfinite(collar_width)):
        raise ValueError("mesh endpoints and collar width must be finite")
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    if int(n_elements) != n_elements or n_elements < 1:
        raise ValueError(f"n_elements must be a positive integer, got {n_elements}")
    if collar_width < 0:
        raise ValueError("collar_width must be nonnegative")
    n = int(n_elements)
    parts = [np.linspace(a, b, n + 1)]
    if collar_width > 0:
        h = (b - a) / n
        k = max(1, math.ceil(collar_width / h - 1e-9))
        parts.insert(0, np.linspace(a - collar_width, a, k + 1)[:-1])
        parts.append(np.linspace(b, b + collar_width, k + 1)[1:])
    return Mesh(np.concatenate(parts), (a, b), collar_width, shape_constant=shape_constant)


def refine(mesh: Mesh) -> Mesh:
    """Bisect every element; the result keeps a link to ``mesh``."""
    x = mesh.nodes
    fine = np.empty(2 * x.size - 1)
    fine[0::2] = x
    fine[1::2] = 0.5 * (x[:-1] + x[1:])
    return Mesh(fine, mesh.domain, mesh.collar_width, parent=mesh,
                shape_constant=mesh.shape_constant)


def prolongate(coeffs, fine: Mesh, coarse: Optional[Mesh] = None) -> np.ndarray:
    """Represent a coarse P1 function on a nested finer mesh.

    ``coeffs`` may hold all nodal values or only the free-node values of the
    coarse mesh; the output uses the same convention on ``fine``.  Leading
    axes are treated as a batch.  If ``coarse`` is omitted it is looked up in
    the parent chain of ``fine`` by vector length.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    n = coeffs.shape[-1]
    chain = [fine, *fine.ancestors()]
    if coarse is None:
        hits = [m for m in chain[1:] if n in (m.n_nodes, m.n_free)]
        if not hits and n in (fine.n_nodes, fine.n_free):
            hits = [fine]
        if len(hits) != 1:
            raise ValueError("cannot identify the coarse mesh from the vector length")
        coarse = hits[0]
    elif not any(m is coarse for m in chain):
        raise ValueError("meshes are not nested: coarse is not an ancestor of fine")

    if n == coarse.n_nodes:
        full, free_out = coeffs, False
    elif n == coarse.n_free:
        full, free_out = coarse.to_full(coeffs), True
    else:
        raise ValueError(f"vector of length {n} does not live on the coarse mesh")

    flat = full.reshape(-1, coarse.n_nodes)
    out = np.stack([np.interp(fine.nodes, coarse.nodes, row) for row in flat])
    out = out.reshape(full.shape[:-1] + (fine.n_nodes,))
    return fine.to_free(out) if free_out else out


def dump_mesh(mesh: Mesh) -> str:
    free = set(mesh.free_nodes.tolist())
    lines = [f"node {i} {x!r} {'free' if i in free else 'constrained'}"
             for i, x in enumerate(mesh.nodes.tolist())]
    return "\n".join(lines) + "\n"
