"""Discrete energy inequality over random data, exponents m and kernels."""
import argparse

from fracfd.assembly import assemble_stiffness
from fracfd.kernel import make_kernel
from fracfd.mesh import build_uniform_mesh
from fracfd.stepper import StepConfig, run_simulation, stability_terms
from fracfd.study import initial_values


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=32)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--steps", type=int, default=20)
    ap.add_argument("--tau", type=float, default=0.01)
    args = ap.parse_args()
    print("kernel,s,m,seed,lhs,rhs,slack")
    for kind, collar in (("fractional", 0.0), ("truncated_fractional", 0.25)):
        mesh = build_uniform_mesh(0, 1, args.n, collar)
        for s in (0.3, 0.7):
            k = make_kernel(kind, s, None if kind == "fractional" else 0.25)
            sys_ = assemble_stiffness(mesh, k)
            for m in (0.3, 0.5, 0.8, 1.0):
                for seed in range(args.seeds):
                    w0 = initial_values("random", mesh, m, seed)
                    traj = run_simulation(w0, sys_, StepConfig(m, args.tau, args.steps))
                    lhs, rhs = stability_terms(traj, sys_)
                    print(f"{kind},{s},{m},{seed},{lhs:.12g},{rhs:.12g},{(rhs - lhs) / rhs:.3e}")


if __name__ == "__main__":
    main()
