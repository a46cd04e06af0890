"""Command-line front end: simulate, elliptic, study, validate."""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .analysis import ErrorReport
from .assembly import assemble_stiffness, dump_matrix
from .config import ConfigError, RunConfig, load_config
from .mesh import build_uniform_mesh
from .oracle import OracleError, oracle_assemble
from .output import FAILED, solution_csv, trajectory_csv, write_text
from .stepper import (NewtonError, StepConfig, elliptic_solve, psi, psi_inv, run_simulation,
                      stability_terms, step_energy, step_gradient)
from .study import elliptic_study, initial_function, initial_values, spatial_study, temporal_study

__all__ = ["main", "cmd_simulate", "cmd_elliptic", "cmd_study", "cmd_validate"]

log = logging.getLogger("fracfd")


def _mesh(cfg: RunConfig, n=None):
    return build_uniform_mesh(cfg.domain.a, cfg.domain.b, n or cfg.domain.n_elements,
                              cfg.domain.collar_width)


def _step_config(cfg: RunConfig, tau=None, n_steps=None) -> StepConfig:
    p, s = cfg.physics, cfg.solver
    return StepConfig(p.m, tau or p.tau, p.n_steps if n_steps is None else n_steps,
                      s.newton_tol, s.newton_max_iter, s.line_search_beta)


def _verdict(name, ok, detail=""):
    print(f"{'PASS' if ok else 'FAIL'} {name}" + (f": {detail}" if detail else ""))
    return ok


def cmd_simulate(cfg: RunConfig, threads: int = 1) -> int:
    mesh = _mesh(cfg)
    sys_ = assemble_stiffness(mesh, cfg.make_kernel(), cfg.solver.quadrature_order,
                              threads=threads)
    if cfg.output.matrix:
        write_text(cfg.output.matrix, dump_matrix(sys_.stiffness))
    step = _step_config(cfg)
    w0 = initial_values(cfg.physics.initial, mesh, step.m, cfg.physics.seed,
                        **cfg.preset_params())
    times = step.tau * np.arange(step.n_steps + 1)
    try:
        traj = run_simulation(w0, sys_, step)
    except NewtonError as exc:
        write_text(cfg.output.trajectory,
                   trajectory_csv(exc.partial, times, mesh, step.m, failure=str(exc)))
        print(f"{FAILED} {exc}")
        return 2
    write_text(cfg.output.trajectory, trajectory_csv(traj.steps, traj.times, mesh, step.m))
    lhs, rhs = stability_terms(traj, sys_)
    ok = lhs <= rhs + 1e-9 * max(rhs, 1.0)
    _verdict("stability", ok, f"lhs={lhs:.12g} rhs={rhs:.12g}")
    return 0 if ok else 1


def cmd_elliptic(cfg: RunConfig, threads: int = 1) -> int:
    kernel = cfg.make_kernel()
    m = cfg.physics.m
    f = initial_function(cfg.physics.initial, **cfg.preset_params())
    n0, levels = cfg.domain.n_elements, cfg.domain.levels
    mesh = _mesh(cfg, n0 * 2 ** (levels - 1))
    sys_ = assemble_stiffness(mesh, kernel, cfg.solver.quadrature_order, threads=threads)
    try:
        V = elliptic_solve(mesh.interpolate(f), sys_, m, cfg.solver.newton_tol,
                           cfg.solver.newton_max_iter, cfg.solver.line_search_beta)
    except NewtonError as exc:
        write_text(cfg.output.solution, f"{FAILED} {exc}\n")
        print(f"{FAILED} {exc}")
        return 2
    write_text(cfg.output.solution, solution_csv(V, mesh, m))
    if levels < 2:
        return 0
    ns = [n0 * 2**k for k in range(levels)]
    results = elliptic_study(kernel, m, ns, f, cfg.domain.a, cfg.domain.b,
                             cfg.domain.collar_width, cfg.solver.quadrature_order,
                             cfg.study.ref_offset)
    ok = True
    for n, r in zip(ns, results):
        if r.exact:
            print(f"cea n={n}: exact")
            continue
        print(f"cea n={n}: {r.ratio:.6g}")
        ok &= r.ratio <= cfg.study.cea_max
    return 0 if _verdict(f"cea ratio <= {cfg.study.cea_max:g}", ok) else 1


def cmd_study(cfg: RunConfig, threads: int = 1) -> int:
    kernel = cfg.make_kernel()
    p, st, d = cfg.physics, cfg.study, cfg.domain
    common = dict(a=d.a, b=d.b, collar_width=d.collar_width, preset=p.initial,
                  preset_params=cfg.preset_params(), seed=p.seed,
                  quadrature_order=cfg.solver.quadrature_order, newton_tol=cfg.solver.newton_tol,
                  newton_max_iter=cfg.solver.newton_max_iter, threads=threads)
    try:
        if st.kind == "space":
            ns = [d.n_elements * 2**k for k in range(d.levels)]
            res = spatial_study(kernel, p.m, p.tau, p.n_steps, ns, ref_offset=st.ref_offset,
                                **common)
            target = kernel.s if st.rate_target is None else st.rate_target
            tol = 0.15 if st.rate_tolerance is None else st.rate_tolerance
        else:
            if len(st.taus) < 2:
                raise ConfigError("study.taus", "need at least two time steps")
            res = temporal_study(kernel, p.m, st.taus, p.n_steps * p.tau, d.n_elements,
                                 ref_factor=st.ref_factor, **common)
            target = 1.0 if st.rate_target is None else st.rate_target
            tol = 0.2 if st.rate_tolerance is None else st.rate_tolerance
    except NewtonError as exc:
        write_text(cfg.output.errors, ErrorReport().to_csv() + f"{FAILED} {exc}\n")
        print(f"{FAILED} {exc}")
        return 2
    write_text(cfg.output.errors, res.report.to_csv())
    sys.stdout.write(res.report.to_csv())
    orders = res.eoc()
    ok = all(abs(e - target) <= tol for e in orders)
    name = "eoc_h" if st.kind == "space" else "eoc_tau"
    detail = ", ".join(f"{e:.3f}" for e in orders) + f" vs {target:g} +- {tol:g}"
    return 0 if _verdict(name, ok, detail) else 1


def cmd_validate(cfg: RunConfig, threads: int = 1) -> int:
    v = cfg.validate
    all_ok = True
    print("n s max_rel_dev symmetric cholesky")
    for n in v.sizes:
        mesh = _mesh(cfg, n)
        for s in v.s_values:
            kernel = cfg.make_kernel(s)
            A = assemble_stiffness(mesh, kernel, cfg.solver.quadrature_order,
                                   threads=threads).stiffness
            try:
                O = oracle_assemble(mesh, kernel, v.tolerance)
            except OracleError as exc:
                print(f"{n} {s} {FAILED} {exc}")
                all_ok = False
                continue
            dev = float(np.max(np.abs(A - O) / np.max(np.abs(O))))
            sym = float(np.max(np.abs(A - A.T)) / np.max(np.abs(A)))
            try:
                np.linalg.cholesky(A)
                chol = True
            except np.linalg.LinAlgError:
                chol = False
            ok = dev <= v.max_deviation and sym <= 1e-12 and chol
            all_ok &= ok
            print(f"{n} {s} {dev:.3e} {sym:.1e} {chol} {'ok' if ok else 'FAIL'}")

    rng = np.random.default_rng(cfg.physics.seed)
    m = cfg.physics.m
    mesh = _mesh(cfg)
    sys_ = assemble_stiffness(mesh, cfg.make_kernel(), cfg.solver.quadrature_order,
                              threads=threads)
    worst = 0.0
    for _ in range(5):
        w = rng.uniform(0.2, 1.0, mesh.n_free) * rng.choice([-1.0, 1.0], mesh.n_free)
        b = sys_.lumped_mass * psi(rng.uniform(-1, 1, mesh.n_free), m)
        g = step_gradient(w, b, sys_.lumped_mass, sys_.stiffness, m, cfg.physics.tau)
        d = rng.standard_normal(mesh.n_free)
        eps = 1e-6
        fd = (step_energy(w + eps * d, b, sys_.lumped_mass, sys_.stiffness, m, cfg.physics.tau)
              - step_energy(w - eps * d, b, sys_.lumped_mass, sys_.stiffness, m,
                            cfg.physics.tau)) / (2 * eps)
        worst = max(worst, abs(fd - g @ d) / max(abs(g @ d), 1e-300))
    all_ok &= _verdict("gradient check", worst <= 1e-5, f"max rel {worst:.2e}")
    y = rng.uniform(-5, 5, 1000)
    rt = max(float(np.max(np.abs(psi_inv(psi(y, mm), mm) - y) / np.maximum(1, np.abs(y))))
             for mm in (0.3, 0.5, 0.8, 1.0, 2.0))
    all_ok &= _verdict("psi round trip", rt <= 1e-12, f"max rel {rt:.2e}")
    return 0 if all_ok else 1


COMMANDS = {"simulate": cmd_simulate, "elliptic": cmd_elliptic, "study": cmd_study,
            "validate": cmd_validate}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fracfd", description=__doc__)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="path to a section.key = value file")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        cfg = load_config(args.config)
    except (OSError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](cfg, args.threads)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
