"""Brute-force reference stiffness matrix.

Deliberately independent of the pair-class quadrature in ``assembly``: the
double integral runs over the whole meshed region with nested adaptive
Gauss-Kronrod (G7/K15) bisection, and the diagonal singularity is removed by
subtracting the exact near-field term on |x - z| < dist(x, nodes), where every
hat is linear.
"""
from __future__ import annotations

import numpy as np

from .kernel import Kernel, tail_integral
from .mesh import Mesh

__all__ = ["oracle_assemble", "oracle_load", "adaptive_gk", "OracleError"]


class OracleError(RuntimeError):
    pass


_XK = np.array([
    -0.991455371120812639206854697526329, -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926, -0.741531185599394439863864773280788,
    -0.586087235467691130294144845693013, -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245, 0.0,
    0.207784955007898467600689403773245, 0.405845151377397166906606412076961,
    0.586087235467691130294144845693013, 0.741531185599394439863864773280788,
    0.864864423359769072789712788640926, 0.949107912342758524526189684047851,
    0.991455371120812639206854697526329])
_WK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
    0.204432940075298892414161999234649, 0.190350578064785409913256402421014,
    0.169004726639267902826583426598550, 0.140653259715525918745189590510238,
    0.104790010322250183839876322541518, 0.063092092629978553290700663189204,
    0.022935322010529224963732008058970])
_WG = np.zeros(15)
_WG[1::2] = [0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
             0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
             0.381830050505118944950369775488975, 0.279705391489276667901467771423780,
             0.129484966168869693270611432679082]


def _gk15(f, lo, hi):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = (mid[:, None] + half[:, None] * _XK[None, :]).ravel()
    vals = f(pts).reshape(lo.size, 15, -1)
    kron = np.einsum("ikd,k->id", vals, _WK) * half[:, None]
    gauss = np.einsum("ikd,k->id", vals, _WG) * half[:, None]
    return kron, np.max(np.abs(kron - gauss), axis=1)


def adaptive_gk(f, breakpoints, tol, max_intervals=20000):
    """Integrate a vector-valued ``f`` over [breakpoints[0], breakpoints[-1]].

    ``f`` maps an array of points (N,) to values (N, D).  Global strategy: while
    the summed Kronrod-minus-Gauss estimate (max norm) exceeds ``tol``, bisect
    the largest-error intervals that carry the excess.
    """
    bp = np.asarray(sorted(set(float(b) for b in breakpoints)))
    lo, hi = bp[:-1], bp[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    kron, err = _gk15(f, lo, hi)
    while err.sum() > tol:
        if lo.size > max_intervals:
            raise OracleError("subdivision budget exhausted before reaching the tolerance")
        order = np.argsort(err)[::-1]
        excess = err.sum() - 0.5 * tol
        n_split = int(np.searchsorted(np.cumsum(err[order]), excess) + 1)
        split = order[:n_split]
        # intervals already at rounding scale cannot improve
        tiny = (hi[split] - lo[split]) <= 1e-14 * max(1.0, float(np.abs(hi).max()))
        if np.all(tiny):
            break
        split = split[~tiny]
        mid = 0.5 * (lo[split] + hi[split])
        new_lo = np.concatenate([lo[split], mid])
        new_hi = np.concatenate([mid, hi[split]])
        k_new, e_new = _gk15(f, new_lo, new_hi)
        rest = np.ones(lo.size, dtype=bool)
        rest[split] = False
        lo = np.concatenate([lo[rest], new_lo])
        hi = np.concatenate([hi[rest], new_hi])
        kron = np.concatenate([kron[rest], k_new])
        err = np.concatenate([err[rest], e_new])
    return kron.sum(axis=0)


class _Hats:
    def __init__(self, mesh: Mesh):
        self.x = mesh.nodes
        self.free = mesh.free_nodes
        self.n = self.free.size

    def _locate(self, p):
        j = np.searchsorted(self.x, p, side="right") - 1
        return np.clip(j, 0, self.x.size - 2)

    def values(self, p):
        """Free hat values at points p, shape (len(p), n)."""
        p = np.atleast_1d(p)
        j = self._locate(p)
        t = (p - self.x[j]) / (self.x[j + 1] - self.x[j])
        full = np.zeros((p.size, self.x.size))
        rows = np.arange(p.size)
        inside = (p >= self.x[0]) & (p <= self.x[-1])
        full[rows[inside], j[inside]] = 1.0 - t[inside]
        full[rows[inside], j[inside] + 1] = t[inside]
        return full[:, self.free]

    def slopes(self, p):
        j = int(self._locate(np.array([p]))[0])
        full = np.zeros(self.x.size)
        h = self.x[j + 1] - self.x[j]
        full[j], full[j + 1] = -1.0 / h, 1.0 / h
        return full[self.free]


def _kappa(kernel: Kernel, r):
    r = np.abs(r)
    if kernel.kind == "constant_ball":
        return np.where(r <= kernel.epsilon, kernel.constant, 0.0)
    with np.errstate(divide="ignore"):
        val = kernel.constant * r ** (-1.0 - 2.0 * kernel.s)
    if kernel.kind == "truncated_fractional":
        val = np.where(r <= kernel.epsilon, val, 0.0)
    return val


def _near_field(kernel: Kernel, delta):
    # int_{-delta}^{delta} r^2 kappa(|r|) dr
    c = kernel.constant
    if kernel.kind == "constant_ball":
        d = min(delta, kernel.epsilon)
        return 2.0 * c * d**3 / 3.0
    d = delta if kernel.kind == "fractional" else min(delta, kernel.epsilon)
    return 2.0 * c * d ** (2.0 - 2.0 * kernel.s) / (2.0 - 2.0 * kernel.s)


def _adaptive_gk_owned(f, owner, lo, hi, tol, n_owners, max_intervals):
    """Batch version of ``adaptive_gk``: every interval belongs to an owner, each
    owner has its own error budget ``tol`` and its own integral."""
    def run(o, a, b):
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        pts = (mid[:, None] + half[:, None] * _XK[None, :]).ravel()
        vals = f(np.repeat(o, 15), pts).reshape(o.size, 15, -1)
        kron = np.einsum("ikd,k->id", vals, _WK) * half[:, None]
        gauss = np.einsum("ikd,k->id", vals, _WG) * half[:, None]
        return kron, np.max(np.abs(kron - gauss), axis=1)

    kron, err = run(owner, lo, hi)
    while True:
        err_sum = np.bincount(owner, err, minlength=n_owners)
        count = np.bincount(owner, minlength=n_owners)
        bad = err_sum > tol
        if not bad.any():
            break
        if lo.size > max_intervals:
            raise OracleError("subdivision budget exhausted before reaching the tolerance")
        split = bad[owner] & (err > tol / (2.0 * count[owner]))
        split &= (hi - lo) > 1e-14 * np.maximum(1.0, np.abs(hi))
        if not split.any():
            break
        mid = 0.5 * (lo[split] + hi[split])
        o2 = np.concatenate([owner[split], owner[split]])
        lo2 = np.concatenate([lo[split], mid])
        hi2 = np.concatenate([mid, hi[split]])
        k2, e2 = run(o2, lo2, hi2)
        keep = ~split
        owner = np.concatenate([owner[keep], o2])
        lo = np.concatenate([lo[keep], lo2])
        hi = np.concatenate([hi[keep], hi2])
        kron = np.concatenate([kron[keep], k2])
        err = np.concatenate([err[keep], e2])
    out = np.zeros((n_owners, kron.shape[1]))
    np.add.at(out, owner, kron)
    return out


def oracle_assemble(mesh: Mesh, kernel: Kernel, tolerance: float = 1e-9,
                    max_intervals: int = 2_000_000, batch: int = 24) -> np.ndarray:
    """Stiffness over the free nodes by brute-force adaptive quadrature.

    ``tolerance`` is relative to the typical diagonal entry size.
    """
    hats = _Hats(mesh)
    if hats.n > 64:
        raise ValueError("oracle_assemble is meant for at most 64 free nodes")
    x = hats.x
    A, B = float(x[0]), float(x[-1])
    eps = kernel.horizon
    n = hats.n
    h = float(np.max(np.diff(x)))
    scale = kernel.constant * h ** (1.0 - 2.0 * kernel.s) if kernel.singular else kernel.constant * h**3
    atol = tolerance * scale
    inner_tol = 0.1 * atol / (B - A)

    def inner_chunk(ps):
        phi = hats.values(ps)
        owner, lo, hi = [], [], []
        near = np.zeros((ps.size, n * n))
        for k, p in enumerate(ps):
            j = int(hats._locate(np.array([p]))[0])
            delta = min(p - x[j], x[j + 1] - p)
            g = hats.slopes(p)
            near[k] = np.outer(g, g).ravel() * _near_field(kernel, delta)
            if delta <= 0.0:
                continue
            cuts = list(x) + [c for c in (p - eps, p + eps) if A < c < B]
            for a, b in ((A, p - delta), (p + delta, B)):
                if b - a <= 0:
                    continue
                bp = sorted(set([a, b] + [c for c in cuts if a < c < b]))
                owner += [k] * (len(bp) - 1)
                lo += bp[:-1]
                hi += bp[1:]

        def integrand(o, z):
            d = phi[o] - hats.values(z)
            return (d[:, :, None] * d[:, None, :]).reshape(z.size, -1) * _kappa(kernel, ps[o] - z)[:, None]

        far = _adaptive_gk_owned(integrand, np.asarray(owner, dtype=np.intp), np.asarray(lo),
                                 np.asarray(hi), inner_tol, ps.size, max_intervals)
        out = near + far
        if kernel.kind == "fractional":
            tl = tail_integral(kernel, ps, (A, B))
            out += 2.0 * (phi[:, :, None] * phi[:, None, :]).reshape(ps.size, -1) * tl[:, None]
        return out

    def outer(ps):
        return np.concatenate([inner_chunk(ps[i:i + batch]) for i in range(0, ps.size, batch)])

    M = adaptive_gk(outer, list(x), atol, max_intervals).reshape(n, n)
    return 0.5 * (M + M.T)


def oracle_load(func, mesh: Mesh, kernel: Kernel, tolerance: float = 1e-9,
                max_intervals: int = 2_000_000, batch: int = 24) -> np.ndarray:
    """b_i = a(v, phi_i) for a callable v (zero outside the domain), brute force.

    The inner integral is split at z = p, so the integrable r^(1-2s) behaviour
    sits at an interval endpoint and is resolved by bisection.
    """
    hats = _Hats(mesh)
    if hats.n > 64:
        raise ValueError("oracle_load is meant for at most 64 free nodes")
    x = hats.x
    A, B = float(x[0]), float(x[-1])
    a_dom, b_dom = mesh.domain
    eps = kernel.horizon
    h = float(np.max(np.diff(x)))
    scale = kernel.constant * h ** (1.0 - 2.0 * kernel.s) if kernel.singular else kernel.constant * h**3
    atol = tolerance * scale
    inner_tol = 0.1 * atol / (B - A)

    def v(z):
        z = np.asarray(z, dtype=float)
        inside = (z > a_dom) & (z < b_dom)
        return np.where(inside, func(np.where(inside, z, 0.5 * (a_dom + b_dom))), 0.0)

    def inner_chunk(ps):
        phi = hats.values(ps)
        vp = v(ps)
        owner, lo, hi = [], [], []
        for k, p in enumerate(ps):
            cuts = sorted(set([A, B, p] + list(x) + [c for c in (p - eps, p + eps) if A < c < B]))
            owner += [k] * (len(cuts) - 1)
            lo += cuts[:-1]
            hi += cuts[1:]

        def integrand(o, z):
            d = phi[o] - hats.values(z)
            r = ps[o] - z
            # z == p only once bisection reaches rounding scale; the limit is 0
            w = np.where(r != 0, (vp[o] - v(z)) * _kappa(kernel, np.where(r != 0, r, 1.0)), 0.0)
            return d * w[:, None]

        out = _adaptive_gk_owned(integrand, np.asarray(owner, dtype=np.intp), np.asarray(lo),
                                 np.asarray(hi), inner_tol, ps.size, max_intervals)
        if kernel.kind == "fractional":
            out += 2.0 * phi * (vp * tail_integral(kernel, ps, (A, B)))[:, None]
        return out

    def outer(ps):
        return np.concatenate([inner_chunk(ps[i:i + batch]) for i in range(0, ps.size, batch)])

    return adaptive_gk(outer, list(x), atol, max_intervals)
