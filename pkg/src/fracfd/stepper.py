"""Nonlinearity, implicit Euler steps and the stationary nonlinear problem.

With w = |u|^(m-1) u the equation reads d/dt psi(w) = -L w, psi(y) = |y|^(1/m - 1) y.
Each implicit step minimizes the strictly convex energy

    E(w) = sum_i M_i Psi(w_i) - b.w + (tau / 2) w.A.w,   Psi' = psi,

with b = M * psi(w_prev); the stationary problem uses b = M * f and tau = 1.
The minimizer is found by Newton's method with a backtracking line search
that only accepts strict energy decrease.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .assembly import NonlocalSystem

__all__ = [
    "psi", "psi_inv", "psi_prime", "psi_antiderivative", "StepConfig", "StepResult",
    "Trajectory", "NewtonError", "step_energy", "step_gradient", "backward_euler_step",
    "run_simulation", "elliptic_solve", "stability_terms",
]

# psi' is unbounded at 0 when m > 1; Newton uses this cap instead
_PSI_PRIME_CAP = 1e12


class NewtonError(RuntimeError):
    def __init__(self, message, residual=None, step=None, partial=None):
        super().__init__(message)
        self.residual = residual
        self.step = step
        self.partial = partial      # steps completed before the failure


def psi(y, m):
    y = np.asarray(y, dtype=float)
    return np.sign(y) * np.abs(y) ** (1.0 / m)


def psi_inv(y, m):
    y = np.asarray(y, dtype=float)
    return np.sign(y) * np.abs(y) ** m


def psi_prime(y, m):
    a = np.abs(np.asarray(y, dtype=float))
    p = 1.0 / m - 1.0
    if p == 0.0:
        return np.full_like(a, 1.0)
    with np.errstate(divide="ignore"):
        val = np.where(a > 0, a**p / m, 0.0 if p > 0 else np.inf)
    return np.minimum(val, _PSI_PRIME_CAP)


def psi_antiderivative(y, m):
    """Psi(y) = m/(m+1) |y|^((m+1)/m)."""
    return m / (m + 1.0) * np.abs(np.asarray(y, dtype=float)) ** ((m + 1.0) / m)


def _psi_antiderivative_increment(y, d, m):
    """Psi(y + d) - Psi(y) without cancellation when |d| << |y|."""
    y = np.asarray(y, dtype=float)
    d = np.asarray(d, dtype=float)
    p = (m + 1.0) / m
    out = psi_antiderivative(y + d, m) - psi_antiderivative(y, m)
    small = (y != 0) & (np.abs(d) < 0.5 * np.abs(y))
    if np.any(small):
        ys, ds = y[small], d[small]
        out[small] = m / (m + 1.0) * np.abs(ys) ** p * np.expm1(p * np.log1p(ds / ys))
    return out


@dataclass(frozen=True)
class StepConfig:
    m: float
    tau: float
    n_steps: int
    newton_tol: float = 1e-10
    newton_max_iter: int = 100
    line_search_beta: float = 0.5

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"m must be positive, got {self.m}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 0:
            raise ValueError(f"n_steps must be a nonnegative integer, got {self.n_steps}")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if not 0 < self.line_search_beta < 1:
            raise ValueError("line_search_beta must lie in (0, 1)")

    @property
    def T(self) -> float:
        return self.n_steps * self.tau


@dataclass
class StepResult:
    w: np.ndarray
    iterations: int
    residual: float
    energies: list
    decreases: list

    @property
    def monotone(self) -> bool:
        return all(d < 0 for d in self.decreases)


@dataclass(frozen=True, eq=False)
class Trajectory:
    steps: np.ndarray          # (M + 1, n_free)
    times: np.ndarray
    m: float
    tau: float
    diagnostics: list = field(default_factory=list, repr=False)

    @property
    def n_steps(self) -> int:
        return self.steps.shape[0] - 1

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def at(self, t) -> np.ndarray:
        """W(t): W_0 at t = 0, W_n on (t_{n-1}, t_n]."""
        if t <= 0:
            return self.steps[0]
        n = min(self.n_steps, max(1, math.ceil(t / self.tau - 1e-9)))
        return self.steps[n]


def step_energy(w, b, mass, A, m, tau):
    w = np.asarray(w, dtype=float)
    return float(np.dot(mass, psi_antiderivative(w, m)) - np.dot(b, w) + 0.5 * tau * w @ (A @ w))


def step_gradient(w, b, mass, A, m, tau):
    w = np.asarray(w, dtype=float)
    return mass * psi(w, m) - b + tau * (A @ w)


def _minimize(w0, b, mass, A, m, tau, tol, max_iter, beta, scale):
    w = np.array(w0, dtype=float)
    Aw = A @ w
    r = mass * psi(w, m) - b + tau * Aw
    res = float(np.max(np.abs(r))) if r.size else 0.0
    energies = [step_energy(w, b, mass, A, m, tau)]
    decreases = []
    it = 0
    while res > tol * scale:
        if it >= max_iter:
            raise NewtonError(f"Newton did not converge in {max_iter} iterations "
                              f"(residual {res:.3e})", residual=res)
        J = tau * A + np.diag(mass * psi_prime(w, m))
        try:
            factor = cho_factor(J, lower=True, check_finite=True)
        except LinAlgError as exc:
            raise NewtonError(f"Newton Jacobian not positive definite: {exc}", residual=res)
        d = -cho_solve(factor, r)
        slope = float(r @ d)
        Ad = A @ d
        alpha = 1.0
        while True:
            step = alpha * d
            dE = (np.dot(mass, _psi_antiderivative_increment(w, step, m))
                  - np.dot(b, step) + tau * np.dot(step, Aw + 0.5 * alpha * Ad))
            if not math.isfinite(dE):
                raise NewtonError("non-finite energy in line search", residual=res)
            if dE < 0 and dE <= 1e-4 * alpha * slope:
                break
            alpha *= beta
            if alpha < 1e-14:
                raise NewtonError(f"line search failed (residual {res:.3e})", residual=res)
        w = w + step
        Aw = Aw + alpha * Ad
        r = mass * psi(w, m) - b + tau * Aw
        res = float(np.max(np.abs(r)))
        decreases.append(float(dE))
        energies.append(energies[-1] + float(dE))
        it += 1
    return StepResult(w, it, res, energies, decreases)


def backward_euler_step(w_prev, sys: NonlocalSystem, cfg: StepConfig, w_init=None) -> StepResult:
    w_prev = np.asarray(w_prev, dtype=float)
    if not np.all(np.isfinite(w_prev)):
        raise ValueError("w_prev is not finite")
    mass, A = sys.lumped_mass, sys.stiffness
    b = mass * psi(w_prev, cfg.m)
    scale = max(1.0, float(np.max(np.abs(b))) if b.size else 0.0)
    start = w_prev if w_init is None else w_init
    return _minimize(start, b, mass, A, cfg.m, cfg.tau, cfg.newton_tol,
                     cfg.newton_max_iter, cfg.line_search_beta, scale)


def run_simulation(w0_values, sys: NonlocalSystem, cfg: StepConfig, values_are="w") -> Trajectory:
    """Integrate from nodal initial values over ``cfg.n_steps`` steps.

    ``values_are`` says whether ``w0_values`` holds w_0 (default) or u_0.
    W_0 = psi^{-1}(Pi_h psi(w_0)) reduces to the nodal values of w_0.
    """
    w0 = np.asarray(w0_values, dtype=float)
    if values_are == "u":
        w0 = psi_inv(w0, cfg.m)
    elif values_are != "w":
        raise ValueError("values_are must be 'w' or 'u'")
    if w0.shape != (sys.n_free,):
        raise ValueError(f"initial vector has shape {w0.shape}, expected ({sys.n_free},)")
    W0 = psi_inv(psi(w0, cfg.m), cfg.m)
    # psi_inv(psi(.)) can move nodal values by an ulp; keep the data exact
    W0 = np.where(np.isclose(W0, w0, rtol=1e-12, atol=0), w0, W0)
    steps = np.empty((cfg.n_steps + 1, sys.n_free))
    steps[0] = W0
    diags = []
    for n in range(1, cfg.n_steps + 1):
        try:
            res = backward_euler_step(steps[n - 1], sys, cfg)
        except NewtonError as exc:
            raise NewtonError(f"step {n}: {exc}", residual=exc.residual, step=n,
                              partial=steps[:n].copy()) from exc
        steps[n] = res.w
        diags.append({"step": n, "iterations": res.iterations, "residual": res.residual,
                      "energy": res.energies[-1], "monotone": res.monotone})
    steps.setflags(write=False)
    times = cfg.tau * np.arange(cfg.n_steps + 1)
    return Trajectory(steps, times, cfg.m, cfg.tau, diags)


def elliptic_solve(f_values, sys: NonlocalSystem, m: float, tol: float = 1e-10,
                   max_iter: int = 100, beta: float = 0.5) -> np.ndarray:
    """V with M psi(V) + A V = M f."""
    f = np.asarray(f_values, dtype=float)
    mass = sys.lumped_mass
    b = mass * f
    scale = max(1.0, float(np.max(np.abs(b))))
    res = _minimize(np.zeros_like(f), b, mass, sys.stiffness, m, 1.0, tol, max_iter, beta, scale)
    return res.w


def stability_terms(traj: Trajectory, sys: NonlocalSystem):
    """Both sides of the discrete energy inequality (lumped norms).

    Returns (lhs, rhs) with
    lhs = |W_M|^p_M / (m + 1) + tau sum_n W_n.A.W_n,  rhs = |W_0|^p_M / (m + 1).
    """
    m = traj.m
    p = (m + 1.0) / m
    mass, A = sys.lumped_mass, sys.stiffness
    W = traj.steps
    lhs = np.dot(mass, np.abs(W[-1]) ** p) / (m + 1.0)
    if traj.n_steps:
        lhs += traj.tau * float(np.einsum("ni,ij,nj->", W[1:], A, W[1:]))
    rhs = np.dot(mass, np.abs(W[0]) ** p) / (m + 1.0)
    return float(lhs), float(rhs)
