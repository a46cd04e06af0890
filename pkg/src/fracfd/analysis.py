"""Error measures, the H^s projection, Cea ratios and convergence orders.

Reference solutions are numerical solutions on nested finer meshes, so every
comparison happens on the fine mesh after exact prolongation of the coarse
P1 function.  Time reconstructions are piecewise constant on (t_{n-1}, t_n].
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .assembly import NonlocalSystem, assemble_load, consistent_mass
from .mesh import Mesh, prolongate
from .quadrature import gauss_legendre
from .stepper import Trajectory, psi

__all__ = [
    "quasi_norm", "hs_seminorm_sq", "hs_norm_sq", "hs_projection", "prolongation_matrix",
    "project_fine", "time_integrated_hs_error", "quasi_norm_error_time", "lumped_pairing_error",
    "l_mplus1_error", "CeaResult", "cea_ratio", "estimate_eoc", "stability_surrogate",
    "LevelErrors", "ErrorReport",
]


# ---------------------------------------------------------------------------
# P1 sampling on the solution domain

def _inner_elements(mesh: Mesh) -> np.ndarray:
    a, b = mesh.domain
    x = mesh.nodes
    return np.flatnonzero((x[:-1] >= a) & (x[1:] <= b))


def _as_full(v, mesh: Mesh) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1] == mesh.n_nodes:
        return v
    if v.shape[-1] == mesh.n_free:
        return mesh.to_full(v)
    raise ValueError(f"vector of length {v.shape[-1]} does not live on this mesh")


def _sample(v, mesh: Mesh, q: int):
    """Values of v at Gauss points of the elements of the solution domain.

    ``v`` is a callable or a nodal vector (free or full, leading batch axes
    allowed).  Returns (values (..., n_el, q), weights (n_el, q)).
    """
    xi, wi = gauss_legendre(q)
    e = _inner_elements(mesh)
    x0 = mesh.nodes[e]
    h = mesh.nodes[e + 1] - x0
    pts = x0[:, None] + h[:, None] * xi[None, :]
    weights = h[:, None] * wi[None, :]
    if callable(v):
        return np.asarray(v(pts), dtype=float), weights
    full = _as_full(v, mesh)
    vals = full[..., e, None] * (1.0 - xi) + full[..., e + 1, None] * xi
    return vals, weights


def _quasi_integrand(v1, v2, p):
    base = np.abs(v1) + np.abs(v2)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(base > 0, base ** (p - 2.0) * v2 * v2, 0.0)
    return val


def quasi_norm(v1, v2, p: float, mesh: Mesh, quad_order: int = 6) -> float:
    """sqrt of int_Omega (|v1| + |v2|)^(p-2) |v2|^2, by elementwise Gauss."""
    if not p > 1:
        raise ValueError("quasi_norm needs p > 1")
    a, wts = _sample(v1, mesh, quad_order)
    b, _ = _sample(v2, mesh, quad_order)
    return math.sqrt(float(np.sum(_quasi_integrand(a, b, p) * wts)))


def _quasi_sq_batch(v1, v2, p, mesh, q):
    a, wts = _sample(v1, mesh, q)
    b, _ = _sample(v2, mesh, q)
    return np.sum(_quasi_integrand(a, b, p) * wts, axis=(-2, -1))


def hs_seminorm_sq(coeffs, sys: NonlocalSystem) -> float:
    c = np.asarray(coeffs, dtype=float)
    if c.shape != (sys.n_free,):
        raise ValueError(f"expected {sys.n_free} coefficients, got shape {c.shape}")
    return float(c @ sys.stiffness @ c)


def hs_norm_sq(coeffs, sys: NonlocalSystem) -> float:
    """Seminorm plus exact L2 norm of a member of S_h."""
    c = np.asarray(coeffs, dtype=float)
    return hs_seminorm_sq(c, sys) + float(c @ consistent_mass(sys.mesh) @ c)


# ---------------------------------------------------------------------------
# projection

def _solve(A, b):
    return cho_solve(cho_factor(A, lower=True), b)


def hs_projection(v, sys: NonlocalSystem, quad_order: Optional[int] = None) -> np.ndarray:
    """Coefficients of P_h v, the Galerkin projection for the nonlocal form.

    ``v`` is a callable on the real line (zero-extended outside the domain) or
    a coefficient vector over the free nodes of ``sys``.
    """
    if callable(v):
        q = sys.quadrature_order if quad_order is None else quad_order
        b = assemble_load(v, sys.mesh, sys.kernel, q)
    else:
        c = np.asarray(v, dtype=float)
        if c.shape != (sys.n_free,):
            raise ValueError(f"expected {sys.n_free} coefficients, got shape {c.shape}")
        b = sys.stiffness @ c
    return _solve(sys.stiffness, b)


def prolongation_matrix(fine: Mesh, coarse: Mesh) -> np.ndarray:
    """P with fine_free = P @ coarse_free."""
    return prolongate(np.eye(coarse.n_free), fine, coarse).T


def project_fine(coeffs, fine_sys: NonlocalSystem, coarse: Mesh) -> np.ndarray:
    """P_h on the coarse space of a fine P1 function, exact w.r.t. the fine form.

    Returns coarse free coefficients; leading batch axes are allowed.
    """
    P = prolongation_matrix(fine_sys.mesh, coarse)
    A = fine_sys.stiffness
    Ac = P.T @ A @ P
    rhs = np.asarray(coeffs, dtype=float) @ A @ P
    return _solve(Ac, rhs.T).T


# ---------------------------------------------------------------------------
# trajectory comparisons

def _align(ref: Trajectory, coarse: Trajectory, fine: Mesh, coarse_mesh: Optional[Mesh]):
    """Coarse steps on the fine mesh, indexed by fine step (1..M_f), plus ratio."""
    if abs(ref.T - coarse.T) > 1e-9 * max(1.0, ref.T):
        raise ValueError("trajectories cover different time intervals")
    ratio = coarse.tau / ref.tau
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > 1e-9 * k:
        raise ValueError("coarse time grid is not a multiple of the reference grid")
    if coarse.steps.shape[1] == fine.n_free and coarse_mesh is None:
        Wc = np.asarray(coarse.steps)
    else:
        Wc = prolongate(coarse.steps, fine, coarse_mesh)
    idx = (np.arange(1, ref.n_steps + 1) + k - 1) // k
    return Wc, idx, k


def _running_errors(ref, coarse, fine, coarse_mesh):
    """Running integrals of (w - W) at the coarse time nodes, on the fine mesh."""
    Wc, idx, k = _align(ref, coarse, fine, coarse_mesh)
    cum_ref = np.cumsum(ref.steps[1:], axis=0)[k - 1::k] * ref.tau
    cum_c = np.cumsum(Wc[1:], axis=0) * coarse.tau
    return cum_ref - cum_c


def time_integrated_hs_error(ref: Trajectory, coarse: Trajectory, fine_sys: NonlocalSystem,
                             coarse_mesh: Optional[Mesh] = None) -> float:
    """sup_n || int_0^{t_n} (w - W) ||_{H^s} with the full norm on the fine mesh."""
    if coarse.n_steps == 0:
        return 0.0
    E = _running_errors(ref, coarse, fine_sys.mesh, coarse_mesh)
    Q = fine_sys.stiffness + consistent_mass(fine_sys.mesh)
    vals = np.einsum("ni,ij,nj->n", E, Q, E)
    return float(np.sqrt(max(0.0, vals.max())))


def quasi_norm_error_time(ref: Trajectory, coarse: Trajectory, m: float, mesh: Mesh,
                          coarse_mesh: Optional[Mesh] = None, quad_order: int = 6) -> float:
    """int_0^T || w - W ||^2_{(w, (m+1)/m)} with both reconstructions piecewise constant."""
    if coarse.n_steps == 0:
        return 0.0
    Wc, idx, _ = _align(ref, coarse, mesh, coarse_mesh)
    w = ref.steps[1:]
    total = 0.0
    p = (m + 1.0) / m
    for lo in range(0, w.shape[0], 256):
        sl = slice(lo, lo + 256)
        total += float(np.sum(_quasi_sq_batch(w[sl], w[sl] - Wc[idx[sl]], p, mesh, quad_order)))
    return ref.tau * total


def lumped_pairing_error(ref: Trajectory, coarse: Trajectory, m: float, fine_sys: NonlocalSystem,
                         coarse_mesh: Optional[Mesh] = None) -> float:
    """sum over fine steps of tau (psi(w) - psi(W), w - W) in the lumped pairing."""
    if coarse.n_steps == 0:
        return 0.0
    Wc, idx, _ = _align(ref, coarse, fine_sys.mesh, coarse_mesh)
    w = ref.steps[1:]
    W = Wc[idx]
    return float(ref.tau * np.sum(fine_sys.lumped_mass * (psi(w, m) - psi(W, m)) * (w - W)))


def l_mplus1_error(ref: Trajectory, coarse: Trajectory, m: float, mesh: Mesh,
                   coarse_mesh: Optional[Mesh] = None, quad_order: int = 6) -> float:
    """Space-time L^{m+1} norm of u - U with U = psi(W) pointwise."""
    if coarse.n_steps == 0:
        return 0.0
    Wc, idx, _ = _align(ref, coarse, mesh, coarse_mesh)
    total = 0.0
    for lo in range(0, ref.n_steps, 256):
        sl = slice(lo, lo + 256)
        a, wts = _sample(ref.steps[1:][sl], mesh, quad_order)
        b, _ = _sample(Wc[idx[sl]], mesh, quad_order)
        total += float(np.sum(np.abs(psi(a, m) - psi(b, m)) ** (m + 1.0) * wts))
    return (ref.tau * total) ** (1.0 / (m + 1.0))


# ---------------------------------------------------------------------------
# Cea ratio

@dataclass(frozen=True)
class CeaResult:
    ratio: Optional[float]
    numerator: float
    denominator: float

    @property
    def exact(self) -> bool:
        return self.ratio is None


def _restrict(v_fine, fine: Mesh, coarse: Mesh) -> np.ndarray:
    full = fine.to_full(v_fine)
    pos = np.searchsorted(fine.nodes, coarse.nodes)
    if not np.array_equal(fine.nodes[pos], coarse.nodes):
        raise ValueError("meshes are not nested")
    return coarse.to_free(full[pos])


def cea_ratio(v_ref, V, fine_sys: NonlocalSystem, coarse: Mesh, m: float,
              quad_order: int = 6) -> CeaResult:
    """Discrete error over interpolation error, both in quasi-norm^2 + seminorm^2.

    ``v_ref`` lives on the fine mesh of ``fine_sys``, ``V`` on ``coarse``.
    """
    fine = fine_sys.mesh
    p = (m + 1.0) / m
    v = np.asarray(v_ref, dtype=float)
    e_disc = v - prolongate(V, fine, coarse)
    e_int = v - prolongate(_restrict(v, fine, coarse), fine, coarse)

    def measure(e):
        return quasi_norm(v, e, p, fine, quad_order) ** 2 + hs_seminorm_sq(e, fine_sys)

    num, den = measure(e_disc), measure(e_int)
    scale = quasi_norm(v, v, p, fine, quad_order) ** 2 + hs_seminorm_sq(v, fine_sys)
    if den <= 1e-24 * max(scale, 1e-300):
        return CeaResult(None, num, den)
    return CeaResult(num / den, num, den)


# ---------------------------------------------------------------------------
# convergence orders

def estimate_eoc(errors: Sequence[float], steps: Sequence[float]) -> list:
    e = np.asarray(errors, dtype=float)
    h = np.asarray(steps, dtype=float)
    if e.shape != h.shape or e.size < 2:
        raise ValueError("need two equally long sequences of length >= 2")
    if np.any(e <= 0) or np.any(h <= 0):
        raise ValueError("errors and steps must be positive")
    if np.any(np.diff(h) >= 0):
        raise ValueError("steps must be strictly decreasing")
    return list(np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:]))


# ---------------------------------------------------------------------------
# a priori estimate as a measured inequality

def stability_surrogate(ref: Trajectory, coarse: Trajectory, fine_sys: NonlocalSystem,
                        coarse_mesh: Mesh, m: float, u0=None, quad_order: int = 6) -> dict:
    """Both sides of the a priori error estimate with the reference as truth.

    lhs = int ||w - W||^2 + |wbar - Wbar|^2_{H^s};
    rhs = time term + projection term (at coarse nodes) + initial term + |wbar - P_h wbar|^2.
    """
    fine = fine_sys.mesh
    p = (m + 1.0) / m
    Wc, idx, k = _align(ref, coarse, fine, coarse_mesh)
    quasi = quasi_norm_error_time(ref, coarse, m, fine, coarse_mesh, quad_order)
    wbar = ref.tau * ref.steps[1:].sum(axis=0)
    Wbar = coarse.tau * Wc[1:].sum(axis=0)
    lhs = quasi + hs_seminorm_sq(wbar - Wbar, fine_sys)

    w = ref.steps[1:]
    node_vals = ref.steps[k::k]                  # w(t_n) on the coarse time grid
    time_term = ref.tau * float(np.sum(_quasi_sq_batch(w, node_vals[idx - 1] - w, p, fine,
                                                       quad_order)))
    Pw = prolongate(project_fine(node_vals, fine_sys, coarse_mesh), fine, coarse_mesh)
    proj_term = coarse.tau * float(np.sum(_quasi_sq_batch(node_vals, node_vals - Pw, p, fine,
                                                          quad_order)))
    if u0 is None:
        psi0 = psi(ref.steps[0], m)
    else:
        psi0 = fine.interpolate(u0)
    d0 = psi0 - prolongate(_restrict(psi0, fine, coarse_mesh), fine, coarse_mesh)
    init_term = float(d0 @ consistent_mass(fine) @ d0)
    dbar = wbar - prolongate(project_fine(wbar, fine_sys, coarse_mesh), fine, coarse_mesh)
    bar_term = hs_seminorm_sq(dbar, fine_sys)
    rhs = time_term + proj_term + init_term + bar_term
    return {"lhs": lhs, "rhs": rhs, "time": time_term, "projection": proj_term,
            "initial": init_term, "bar": bar_term,
            "ratio": lhs / rhs if rhs > 0 else math.inf}


# ---------------------------------------------------------------------------
# reports

@dataclass
class LevelErrors:
    level: int
    h: float
    tau: float
    quasi_err: float
    hs_int_err: float
    lmplus1_err: float
    pairing: float = float("nan")

    @property
    def combined(self) -> float:
        """sqrt(quasi + hs_int^2): the quantity predicted to decay like tau + h^s."""
        return math.sqrt(self.quasi_err + self.hs_int_err**2)


@dataclass
class ErrorReport:
    levels: list = field(default_factory=list)
    vary: str = "h"          # which parameter changes between levels

    def eoc(self) -> list:
        if len(self.levels) < 2:
            return []
        steps = [lv.h if self.vary == "h" else lv.tau for lv in self.levels]
        return estimate_eoc([lv.combined for lv in self.levels], steps)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "h", "tau", "quasi_err", "hs_int_err", "lmplus1_err",
                    "eoc_h", "eoc_tau"])
        orders = self.eoc()
        for i, lv in enumerate(self.levels):
            eh = et = ""
            if i > 0:
                val = repr(float(orders[i - 1]))
                eh, et = (val, "") if self.vary == "h" else ("", val)
            w.writerow([lv.level, repr(lv.h), repr(lv.tau), repr(lv.quasi_err),
                        repr(lv.hs_int_err), repr(lv.lmplus1_err), eh, et])
        return buf.getvalue()
