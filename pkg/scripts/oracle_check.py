"""Fast assembly versus the brute-force oracle on small meshes."""
import time

import numpy as np

from fracfd.assembly import assemble_stiffness
from fracfd.kernel import make_kernel
from fracfd.mesh import build_uniform_mesh
from fracfd.oracle import oracle_assemble

if __name__ == "__main__":
    print("n,s,max_rel_dev,oracle_seconds")
    for n in (4, 8, 16):
        mesh = build_uniform_mesh(0, 1, n)
        for s in (0.3, 0.5, 0.7):
            k = make_kernel(s=s)
            A = assemble_stiffness(mesh, k).stiffness
            t0 = time.perf_counter()
            O = oracle_assemble(mesh, k, 1e-8)
            dt = time.perf_counter() - t0
            print(f"{n},{s},{np.max(np.abs(A - O) / np.abs(O)):.3e},{dt:.1f}")
