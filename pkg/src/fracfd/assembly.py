"""Stiffness and lumped mass for the nonlocal form with P1 hat functions.

The bilinear form is

    a(u, v) = int int (u(x) - u(z)) (v(x) - v(z)) k(x, z) dz dx

over R x R for zero-extended functions.  On the meshed region D this splits
into the D x D double integral plus ``2 int_D u v tail(x) dx`` where ``tail``
integrates the kernel over R \\ D (fractional kernel only; compactly supported
kernels live entirely on D).

Element pairs are integrated by class:

* disjoint pairs: tensor Gauss-Legendre of order ``quadrature_order``;
* identical, adjacent and horizon-cut pairs: change to the relative variable
  r = x - z.  The inner x-integral is polynomial (Gauss-Legendre), the outer
  r-integral is split at every kink; pieces touching r = 0 use Gauss-Jacobi
  with weight |r|^(1-2s) after dividing out r^2, the rest use geometrically
  graded Gauss-Legendre.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .kernel import Kernel
from .mesh import Mesh
from .quadrature import gauss_jacobi, gauss_legendre

__all__ = [
    "NonlocalSystem", "assemble_stiffness", "assemble_lumped_mass",
    "assemble_tail_matrix", "assemble_load", "consistent_mass", "dump_matrix",
]

_CHUNK = 2048


@dataclass(frozen=True, eq=False)
class NonlocalSystem:
    stiffness: np.ndarray
    lumped_mass: np.ndarray
    mesh: Mesh = field(repr=False)
    kernel: Kernel
    quadrature_order: int
    diagnostics: dict = field(default_factory=dict, repr=False)

    @property
    def n_free(self) -> int:
        return self.lumped_mass.size


def assemble_lumped_mass(mesh: Mesh) -> np.ndarray:
    lengths = mesh.element_lengths
    full = np.zeros(mesh.n_nodes)
    full[:-1] += 0.5 * lengths
    full[1:] += 0.5 * lengths
    return full[mesh.free_nodes]


def consistent_mass(mesh: Mesh) -> np.ndarray:
    """P1 mass matrix over the free nodes (exact L2 products)."""
    h = mesh.element_lengths
    n = mesh.n_nodes
    M = np.zeros((n, n))
    i = np.arange(n - 1)
    M[i, i] += h / 3.0
    M[i + 1, i + 1] += h / 3.0
    M[i, i + 1] += h / 6.0
    M[i + 1, i] += h / 6.0
    f = mesh.free_nodes
    return M[np.ix_(f, f)]


# ---------------------------------------------------------------------------
# pair classification

def _active_elements(mesh: Mesh) -> np.ndarray:
    free = np.zeros(mesh.n_nodes, dtype=bool)
    free[mesh.free_nodes] = True
    return free[:-1] | free[1:]


def _classify_pairs(mesh: Mesh, kernel: Kernel):
    """Unordered element pairs K <= L split into (identical, adjacent, cut, disjoint)."""
    x = mesh.nodes
    E = mesh.n_elements
    active = _active_elements(mesh)
    K, L = np.triu_indices(E)
    keep = active[K] | active[L]
    K, L = K[keep], L[keep]
    identical = K == L
    adjacent = L == K + 1
    rest = ~(identical | adjacent)
    eps = kernel.horizon
    gap = x[L] - x[K + 1]
    span = x[L + 1] - x[K]
    beyond = rest & (gap >= eps)
    cut = rest & ~beyond & (span > eps)
    disjoint = rest & ~beyond & ~cut
    pick = lambda m: np.column_stack([K[m], L[m]])
    return pick(identical), pick(adjacent), pick(cut), pick(disjoint), int(beyond.sum())


# ---------------------------------------------------------------------------
# relative-coordinate integration of one element pair

def _relative_pair(aK, bK, aL, bL, fK, fL, kernel: Kernel, q: int) -> np.ndarray:
    """int_K int_L dF_i dF_j kappa(|x - z|) dz dx with dF = fK(x) - fL(z).

    ``fK(x)`` / ``fL(z)`` return arrays of shape (n_functions, *x.shape).
    """
    xi, wi = gauss_legendre(q)
    eps = kernel.horizon
    rlo, rhi = aK - bL, bK - aL
    cuts = {rlo, rhi, aK - aL, bK - bL}
    if kernel.singular and rlo < 0.0 < rhi:
        cuts.add(0.0)
    for e in (-eps, eps):
        if rlo < e < rhi:
            cuts.add(e)
    cuts = sorted(c for c in cuts if rlo <= c <= rhi)

    def G(r):
        lo = np.maximum(aK, aL + r)
        hi = np.minimum(bK, bL + r)
        length = np.maximum(hi - lo, 0.0)
        x = lo[:, None] + length[:, None] * xi[None, :]
        d = fK(x) - fL(x - r[:, None])
        return np.einsum("anq,bnq,q->abn", d, d, wi) * length

    total = None
    scale = max(bK - aK, bL - aL)
    for r0, r1 in zip(cuts[:-1], cuts[1:]):
        if r1 - r0 <= 1e-14 * scale:
            continue
        if r0 >= eps or r1 <= -eps:
            continue
        if kernel.singular and (r0 == 0.0 or r1 == 0.0):
            R = r1 if r0 == 0.0 else r0
            beta = 1.0 - 2.0 * kernel.s
            t, w = gauss_jacobi(q, beta)
            r = R * t
            part = np.einsum("abn,n->ab", G(r) / r**2, w)
            part *= kernel.constant * abs(R) ** (2.0 - 2.0 * kernel.s)
        else:
            part = 0.0
            for s0, s1 in _graded(r0, r1, kernel.singular):
                r = s0 + (s1 - s0) * xi
                part = part + np.einsum("abn,n->ab", G(r), wi * kernel.radial(np.abs(r))) * (s1 - s0)
        total = part if total is None else total + part
    if total is None:
        n = fK(np.zeros((1, 1))).shape[0]
        total = np.zeros((n, n))
    return total


def _graded(r0, r1, singular):
    """Split [r0, r1] (not containing 0 inside) so |r| varies by <= 2x per piece."""
    if not singular:
        return [(r0, r1)]
    lo, hi = sorted((abs(r0), abs(r1)))
    if lo == 0.0 or hi / lo <= 2.0:
        return [(r0, r1)]
    k = math.ceil(math.log2(hi / lo))
    pts = lo * (hi / lo) ** (np.arange(k + 1) / k)
    pts[0], pts[-1] = lo, hi
    if r1 <= 0:
        pts = -pts[::-1]
    return list(zip(pts[:-1], pts[1:]))


def _hat_functions(nodes_e, a, b, global_nodes):
    """Values of the hats of ``global_nodes`` restricted to element [a, b]."""
    pos = [nodes_e.index(g) if g in nodes_e else -1 for g in global_nodes]

    def f(x):
        t = (x - a) / (b - a)
        out = np.zeros((len(global_nodes),) + np.shape(x))
        for k, p in enumerate(pos):
            if p == 0:
                out[k] = 1.0 - t
            elif p == 1:
                out[k] = t
        return out

    return f


def _relative_local(mesh: Mesh, kernel: Kernel, K: int, L: int, q: int):
    x = mesh.nodes
    nodes = sorted({K, K + 1, L, L + 1})
    fK = _hat_functions([K, K + 1], x[K], x[K + 1], nodes)
    fL = _hat_functions([L, L + 1], x[L], x[L + 1], nodes)
    loc = _relative_pair(x[K], x[K + 1], x[L], x[L + 1], fK, fL, kernel, q)
    if K != L:
        loc = 2.0 * loc
    return np.asarray(nodes), loc


# ---------------------------------------------------------------------------
# tensor Gauss for disjoint pairs

def _disjoint_chunk(x, pairs, kernel: Kernel, q: int):
    xi, wi = gauss_legendre(q)
    lam = np.column_stack([1.0 - xi, xi])
    K, L = pairs[:, 0], pairs[:, 1]
    hK = x[K + 1] - x[K]
    hL = x[L + 1] - x[L]
    xq = x[K][:, None] + hK[:, None] * xi
    zq = x[L][:, None] + hL[:, None] * xi
    kw = kernel.radial(np.abs(xq[:, :, None] - zq[:, None, :]))
    kw *= (wi[:, None] * wi[None, :]) * (hK * hL)[:, None, None]
    mKK = np.einsum("Ppq,pa,pb->Pab", kw, lam, lam)
    mLL = np.einsum("Ppq,qa,qb->Pab", kw, lam, lam)
    mKL = np.einsum("Ppq,pa,qb->Pab", kw, lam, lam)
    loc = np.empty((len(pairs), 4, 4))
    loc[:, :2, :2] = mKK
    loc[:, 2:, 2:] = mLL
    loc[:, :2, 2:] = -mKL
    loc[:, 2:, :2] = -np.transpose(mKL, (0, 2, 1))
    loc *= 2.0
    dofs = np.column_stack([K, K + 1, L, L + 1])
    return dofs, loc


def _scatter(n, dof_blocks, loc_blocks):
    """Sum local matrices into an n x n matrix in a fixed order."""
    flat_idx, vals = [], []
    for dofs, loc in zip(dof_blocks, loc_blocks):
        dofs = np.atleast_2d(dofs)
        loc = loc.reshape(dofs.shape[0], dofs.shape[1], dofs.shape[1])
        flat_idx.append((dofs[:, :, None] * n + dofs[:, None, :]).ravel())
        vals.append(loc.ravel())
    if not flat_idx:
        return np.zeros((n, n))
    return np.bincount(np.concatenate(flat_idx), weights=np.concatenate(vals),
                       minlength=n * n).reshape(n, n)


# ---------------------------------------------------------------------------
# tail term

def assemble_tail_matrix(mesh: Mesh, kernel: Kernel, q: int = 8) -> np.ndarray:
    """Free-node matrix of 2 int_D phi_i phi_j tail(x) dx (zero unless fractional)."""
    n = mesh.n_nodes
    if kernel.kind != "fractional":
        f = mesh.free_nodes
        return np.zeros((f.size, f.size))
    x = mesh.nodes
    A, B = mesh.extent
    xi, wi = gauss_legendre(q)
    c2s = kernel.constant / (2.0 * kernel.s)
    active = np.flatnonzero(_active_elements(mesh))
    dofs, locs = [], []
    for e in active:
        a, b = x[e], x[e + 1]
        h = b - a
        loc = np.zeros((2, 2))
        for side in ("left", "right"):
            touching = (a == A) if side == "left" else (b == B)
            if touching:
                # the end node is constrained, so only the interior hat survives;
                # int_0^1 t^2 t^(-2s) dt in closed form
                k = 1 if side == "left" else 0
                loc[k, k] += c2s * h ** (1.0 - 2.0 * kernel.s) / (3.0 - 2.0 * kernel.s)
            else:
                xs = a + h * xi
                d = xs - A if side == "left" else B - xs
                lam = np.column_stack([1.0 - xi, xi])
                loc += c2s * h * np.einsum("n,na,nb->ab", wi * d ** (-2.0 * kernel.s), lam, lam)
        dofs.append([e, e + 1])
        locs.append(2.0 * loc)
    full = _scatter(n, [np.array(dofs)], [np.array(locs)])
    f = mesh.free_nodes
    return full[np.ix_(f, f)]


# ---------------------------------------------------------------------------

def assemble_stiffness(mesh: Mesh, kernel: Kernel, quadrature_order: int = 8, *,
                       require_full_collar: bool = True, threads: int = 1) -> NonlocalSystem:
    """Dense stiffness over the free nodes plus lumped mass.

    For compactly supported kernels the form lives on the meshed region only;
    ``require_full_collar`` insists that the collar is at least one horizon
    wide so that no interaction is lost.
    """
    q = int(quadrature_order)
    if q < 2:
        raise ValueError("quadrature_order must be at least 2")
    if kernel.kind != "fractional" and require_full_collar:
        if mesh.collar_width < kernel.epsilon * (1 - 1e-12):
            raise ValueError(
                f"collar_width {mesh.collar_width} is smaller than the horizon {kernel.epsilon}")
    identical, adjacent, cut, disjoint, n_beyond = _classify_pairs(mesh, kernel)

    dof_blocks, loc_blocks = [], []
    for K, L in np.concatenate([identical, adjacent, cut]):
        dofs, loc = _relative_local(mesh, kernel, int(K), int(L), q)
        dof_blocks.append(dofs[None, :])
        loc_blocks.append(loc[None])

    chunks = [disjoint[i:i + _CHUNK] for i in range(0, len(disjoint), _CHUNK)]
    work = lambda c: _disjoint_chunk(mesh.nodes, c, kernel, q)
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(c) for c in chunks]
    for dofs, loc in results:
        dof_blocks.append(dofs)
        loc_blocks.append(loc)

    full = _scatter(mesh.n_nodes, dof_blocks, loc_blocks)
    f = mesh.free_nodes
    stiff = full[np.ix_(f, f)]
    tail = assemble_tail_matrix(mesh, kernel, q)
    stiff = stiff + tail
    stiff = 0.5 * (stiff + stiff.T)
    if not np.all(np.isfinite(stiff)):
        raise FloatingPointError("non-finite stiffness entry (quadrature blow-up)")
    stiff.setflags(write=False)
    mass = assemble_lumped_mass(mesh)
    mass.setflags(write=False)
    diag = {
        "identical": len(identical), "adjacent": len(adjacent), "cut": len(cut),
        "disjoint": len(disjoint), "beyond_horizon": n_beyond,
        "tail_trace": float(np.trace(tail)), "tail_total": float(tail.sum()),
    }
    return NonlocalSystem(stiff, mass, mesh, kernel, q, diag)


def assemble_load(func, mesh: Mesh, kernel: Kernel, quadrature_order: int = 8) -> np.ndarray:
    """b_i = a(v, phi_i) for a callable v, zero-extended outside (a, b)."""
    q = int(quadrature_order)
    a_dom, b_dom = mesh.domain

    def v(x):
        x = np.asarray(x, dtype=float)
        inside = (x > a_dom) & (x < b_dom)
        return np.where(inside, np.asarray(func(np.where(inside, x, 0.5 * (a_dom + b_dom))), float), 0.0)

    x = mesh.nodes
    n = mesh.n_nodes
    b = np.zeros(n)
    active = _active_elements(mesh)
    identical, adjacent, cut, disjoint, _ = _classify_pairs(mesh, kernel)

    # only pairs touching an active element can reach a free hat
    def funcs(e, nodes):
        hats = _hat_functions([e, e + 1], x[e], x[e + 1], nodes)
        return lambda p: np.concatenate([v(p)[None], hats(p)], axis=0)

    for K, L in np.concatenate([identical, adjacent, cut]):
        K, L = int(K), int(L)
        nodes = sorted({K, K + 1, L, L + 1})
        loc = _relative_pair(x[K], x[K + 1], x[L], x[L + 1], funcs(K, nodes), funcs(L, nodes),
                             kernel, q)
        fac = 1.0 if K == L else 2.0
        np.add.at(b, nodes, fac * loc[0, 1:])

    xi, wi = gauss_legendre(q)
    lam = np.column_stack([1.0 - xi, xi])
    for i in range(0, len(disjoint), _CHUNK):
        pairs = disjoint[i:i + _CHUNK]
        K, L = pairs[:, 0], pairs[:, 1]
        hK = x[K + 1] - x[K]
        hL = x[L + 1] - x[L]
        xq = x[K][:, None] + hK[:, None] * xi
        zq = x[L][:, None] + hL[:, None] * xi
        kw = kernel.radial(np.abs(xq[:, :, None] - zq[:, None, :]))
        kw *= (wi[:, None] * wi[None, :]) * (hK * hL)[:, None, None]
        dv = v(xq)[:, :, None] - v(zq)[:, None, :]
        g = kw * dv
        bK = 2.0 * np.einsum("Ppq,pa->Pa", g, lam)
        bL = -2.0 * np.einsum("Ppq,qa->Pa", g, lam)
        b += np.bincount(np.column_stack([K, K + 1]).ravel(), bK.ravel(), minlength=n)
        b += np.bincount(np.column_stack([L, L + 1]).ravel(), bL.ravel(), minlength=n)

    if kernel.kind == "fractional":
        A, B = mesh.extent
        tj, wj = gauss_jacobi(q, 1.0 - 2.0 * kernel.s)
        c2s = kernel.constant / (2.0 * kernel.s)
        for e in np.flatnonzero(active):
            a, bb = x[e], x[e + 1]
            h = bb - a
            for side in ("left", "right"):
                touching = (a == A) if side == "left" else (bb == B)
                if touching:
                    # only the interior hat survives; it equals the distance
                    # variable t, folded into the weight t^(1-2s)
                    t = tj if side == "left" else 1.0 - tj
                    pts = a + h * t
                    val = 2.0 * c2s * h ** (1.0 - 2.0 * kernel.s) * np.sum(wj * v(pts))
                    b[e + 1 if side == "left" else e] += val
                    continue
                pts = a + h * xi
                d = pts - A if side == "left" else B - pts
                vals = v(pts) * c2s * h * wi * d ** (-2.0 * kernel.s)
                b[e] += 2.0 * np.sum(vals * (1.0 - xi))
                b[e + 1] += 2.0 * np.sum(vals * xi)
    return b[mesh.free_nodes]


def dump_matrix(A) -> str:
    A = np.asarray(A)
    n = A.shape[0]
    lines = [f"symmetric {n}"]
    for i in range(n):
        for j in range(i + 1):
            lines.append(f"{i} {j} {A[i, j]:.17g}")
    return "\n".join(lines) + "\n"
