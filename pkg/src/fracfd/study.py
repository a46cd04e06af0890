"""Initial-condition presets and the self-convergence experiments."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .analysis import (ErrorReport, LevelErrors, cea_ratio, l_mplus1_error, lumped_pairing_error,
                       quasi_norm_error_time, stability_surrogate, time_integrated_hs_error)
from .assembly import NonlocalSystem, assemble_stiffness
from .kernel import Kernel
from .mesh import Mesh, build_uniform_mesh, refine
from .stepper import StepConfig, Trajectory, elliptic_solve, psi_inv, run_simulation

log = logging.getLogger(__name__)

__all__ = [
    "PRESETS", "initial_function", "initial_values", "mesh_hierarchy", "spatial_study",
    "temporal_study", "elliptic_study", "StudyResult",
]

PRESETS = ("bump", "step", "random")


def initial_function(preset: str, center: float = 0.5, width: float = 0.25, height: float = 1.0):
    """u_0 as a callable for the deterministic presets."""
    if preset == "bump":
        def u0(x):
            r = (np.asarray(x, dtype=float) - center) / width
            return height * np.where(np.abs(r) < 1.0, (1.0 - r * r) ** 2, 0.0)
    elif preset == "step":
        def u0(x):
            x = np.asarray(x, dtype=float)
            return np.where(np.abs(x - center) <= width, height, 0.0)
    elif preset == "random":
        raise ValueError("the random preset is defined by nodal values only")
    else:
        raise ValueError(f"unknown initial condition preset {preset!r}; expected one of {PRESETS}")
    return u0


def initial_values(preset: str, mesh: Mesh, m: float, seed: int = 0, **params) -> np.ndarray:
    """Nodal w_0 = |u_0|^(m-1) u_0 over the free nodes."""
    if preset == "random":
        rng = np.random.default_rng(seed)
        u = rng.uniform(0.0, params.get("height", 1.0), mesh.n_free)
    else:
        u = mesh.interpolate(initial_function(preset, **params))
    return psi_inv(u, m)


def mesh_hierarchy(a, b, n0: int, n_levels: int, collar_width: float = 0.0) -> list:
    meshes = [build_uniform_mesh(a, b, n0, collar_width)]
    for _ in range(n_levels - 1):
        meshes.append(refine(meshes[-1]))
    return meshes


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(threads) as ex:
        return list(ex.map(fn, items))


@dataclass
class StudyResult:
    report: ErrorReport
    pairing_ratios: list = field(default_factory=list)
    surrogate: list = field(default_factory=list)
    stability: list = field(default_factory=list)
    trajectories: dict = field(default_factory=dict, repr=False)

    def eoc(self) -> list:
        return self.report.eoc()


def _stability_ok(traj: Trajectory, sys: NonlocalSystem):
    from .stepper import stability_terms
    lhs, rhs = stability_terms(traj, sys)
    return lhs, rhs, lhs <= rhs + 1e-9 * max(rhs, 1.0)


def spatial_study(kernel: Kernel, m: float, tau: float, n_steps: int, n_levels: Sequence[int],
                  a: float = 0.0, b: float = 1.0, collar_width: float = 0.0,
                  preset: str = "bump", preset_params: Optional[dict] = None, seed: int = 0,
                  quadrature_order: int = 8, ref_offset: int = 2, newton_tol: float = 1e-10,
                  newton_max_iter: int = 100, threads: int = 1,
                  require_full_collar: bool = True) -> StudyResult:
    """h-refinement at fixed tau; each level is compared to the run ``ref_offset``
    bisections finer (same tau), so only the spatial error is measured."""
    n_levels = list(n_levels)
    for lo, hi in zip(n_levels, n_levels[1:]):
        if hi != 2 * lo:
            raise ValueError("levels must double")
    preset_params = preset_params or {}
    meshes = mesh_hierarchy(a, b, n_levels[0], len(n_levels) + ref_offset, collar_width)
    cfg = StepConfig(m, tau, n_steps, newton_tol, newton_max_iter)

    def solve(mesh):
        sys = assemble_stiffness(mesh, kernel, quadrature_order,
                                 require_full_collar=require_full_collar)
        w0 = initial_values(preset, mesh, m, seed, **preset_params)
        traj = run_simulation(w0, sys, cfg)
        log.info("h-study: n=%d done", mesh.n_elements if collar_width == 0 else len(mesh.nodes))
        return sys, traj

    runs = _map(solve, meshes, threads)
    report = ErrorReport(vary="h")
    res = StudyResult(report)
    for lv in range(len(n_levels)):
        coarse_mesh = meshes[lv]
        fine_sys, ref = runs[lv + ref_offset]
        fine = fine_sys.mesh
        _, traj = runs[lv]
        quasi = quasi_norm_error_time(ref, traj, m, fine, coarse_mesh)
        report.levels.append(LevelErrors(
            level=lv, h=coarse_mesh.h, tau=tau, quasi_err=quasi,
            hs_int_err=time_integrated_hs_error(ref, traj, fine_sys, coarse_mesh),
            lmplus1_err=l_mplus1_error(ref, traj, m, fine, coarse_mesh),
            pairing=lumped_pairing_error(ref, traj, m, fine_sys, coarse_mesh)))
        res.pairing_ratios.append(quasi / report.levels[-1].pairing
                                  if report.levels[-1].pairing > 0 else math.nan)
        u0 = None if preset == "random" else initial_function(preset, **preset_params)
        res.surrogate.append(stability_surrogate(ref, traj, fine_sys, coarse_mesh, m, u0))
        res.stability.append(_stability_ok(traj, runs[lv][0]))
    res.trajectories = {mesh.h: run for mesh, run in zip(meshes, runs)}
    return res


def temporal_study(kernel: Kernel, m: float, taus: Sequence[float], T: float, n: int,
                   a: float = 0.0, b: float = 1.0, collar_width: float = 0.0,
                   preset: str = "bump", preset_params: Optional[dict] = None, seed: int = 0,
                   quadrature_order: int = 8, ref_factor: int = 8, newton_tol: float = 1e-10,
                   newton_max_iter: int = 100, threads: int = 1,
                   require_full_collar: bool = True) -> StudyResult:
    """tau-refinement on one mesh against a run with tau_min / ref_factor."""
    taus = [float(t) for t in taus]
    if any(t2 >= t1 for t1, t2 in zip(taus, taus[1:])):
        raise ValueError("time steps must decrease")
    preset_params = preset_params or {}
    mesh = build_uniform_mesh(a, b, n, collar_width)
    sys = assemble_stiffness(mesh, kernel, quadrature_order,
                             require_full_collar=require_full_collar)
    w0 = initial_values(preset, mesh, m, seed, **preset_params)
    tau_ref = taus[-1] / ref_factor

    def steps_for(t):
        k = T / t
        if abs(k - round(k)) > 1e-9 * k:
            raise ValueError(f"T = {T} is not a multiple of tau = {t}")
        return int(round(k))

    def solve(t):
        return run_simulation(w0, sys, StepConfig(m, t, steps_for(t), newton_tol, newton_max_iter))

    runs = _map(solve, taus + [tau_ref], threads)
    ref = runs[-1]
    report = ErrorReport(vary="tau")
    res = StudyResult(report)
    for lv, (t, traj) in enumerate(zip(taus, runs[:-1])):
        quasi = quasi_norm_error_time(ref, traj, m, mesh)
        report.levels.append(LevelErrors(
            level=lv, h=mesh.h, tau=t, quasi_err=quasi,
            hs_int_err=time_integrated_hs_error(ref, traj, sys),
            lmplus1_err=l_mplus1_error(ref, traj, m, mesh),
            pairing=lumped_pairing_error(ref, traj, m, sys)))
        res.pairing_ratios.append(quasi / report.levels[-1].pairing
                                  if report.levels[-1].pairing > 0 else math.nan)
        res.stability.append(_stability_ok(traj, sys))
    res.trajectories = dict(zip(taus + [tau_ref], runs))
    return res


def elliptic_study(kernel: Kernel, m: float, n_levels: Sequence[int], f=None,
                   a: float = 0.0, b: float = 1.0, collar_width: float = 0.0,
                   quadrature_order: int = 8, ref_offset: int = 2, tol: float = 1e-12,
                   require_full_collar: bool = True) -> list:
    """Cea ratios of the stationary problem psi(v) + L v = f per level."""
    n_levels = list(n_levels)
    f = f or initial_function("bump")
    meshes = mesh_hierarchy(a, b, n_levels[0], len(n_levels) + ref_offset, collar_width)
    sols = []
    for mesh in meshes:
        sys = assemble_stiffness(mesh, kernel, quadrature_order,
                                 require_full_collar=require_full_collar)
        sols.append((sys, elliptic_solve(mesh.interpolate(f), sys, m, tol)))
    out = []
    for lv in range(len(n_levels)):
        fine_sys, v = sols[lv + ref_offset]
        out.append(cea_ratio(v, sols[lv][1], fine_sys, meshes[lv], m))
    return out
