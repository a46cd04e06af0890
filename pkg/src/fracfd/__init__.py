"""P1 finite elements and implicit Euler for fractional fast diffusion."""
from .analysis import (ErrorReport, cea_ratio, estimate_eoc, hs_projection, hs_seminorm_sq,
                       quasi_norm, quasi_norm_error_time, time_integrated_hs_error)
from .assembly import NonlocalSystem, assemble_lumped_mass, assemble_stiffness
from .config import RunConfig, parse_config
from .kernel import Kernel, eval_kernel, make_kernel, normalization_constant, tail_integral
from .mesh import Mesh, build_uniform_mesh, prolongate, refine
from .oracle import oracle_assemble
from .stepper import (StepConfig, Trajectory, backward_euler_step, elliptic_solve, psi,
                      psi_antiderivative, psi_inv, run_simulation)

__version__ = "0.1.0"
