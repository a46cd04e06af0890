"""Interaction kernels k(x, z) = kappa(|x - z|) in one space dimension."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gamma

__all__ = [
    "KINDS", "Kernel", "make_kernel", "eval_kernel", "tail_integral",
    "normalization_constant",
]

KINDS = ("fractional", "truncated_fractional", "constant_ball")


def normalization_constant(s: float) -> float:
    """The 1D constant 4^s s Gamma(s + 1/2) / (sqrt(pi) Gamma(1 - s))."""
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    return 4.0**s * s * gamma(s + 0.5) / (math.sqrt(math.pi) * gamma(1.0 - s))


@dataclass(frozen=True)
class Kernel:
    kind: str
    s: float
    epsilon: Optional[float] = None
    constant: float = 1.0
    dimension: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}; expected one of {KINDS}")
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"kernel exponent s must lie in (0, 1), got {self.s}")
        if not (self.constant > 0 and math.isfinite(self.constant)):
            raise ValueError("kernel constant must be positive and finite")
        if self.kind == "fractional":
            if self.epsilon is not None:
                raise ValueError("the fractional kernel takes no horizon")
        elif self.epsilon is None or not self.epsilon > 0:
            raise ValueError(f"kernel kind {self.kind!r} needs a positive epsilon")
        if self.dimension != 1:
            raise ValueError("only dimension 1 is supported")

    @property
    def singular(self) -> bool:
        return self.kind != "constant_ball"

    @property
    def horizon(self) -> float:
        return math.inf if self.epsilon is None else float(self.epsilon)

    def radial(self, r):
        """kappa(r) for r > 0 (array friendly, no checks)."""
        r = np.asarray(r, dtype=float)
        if self.kind == "constant_ball":
            return np.where(r <= self.epsilon, self.constant, 0.0)
        val = self.constant * r ** (-1.0 - 2.0 * self.s)
        if self.kind == "truncated_fractional":
            val = np.where(r <= self.epsilon, val, 0.0)
        return val

    def radial_moment2(self, delta):
        """int_0^delta r^2 kappa(r) dr."""
        c, s = self.constant, self.s
        d = min(delta, self.horizon)
        if self.kind == "constant_ball":
            return c * d**3 / 3.0
        return c * d ** (2.0 - 2.0 * s) / (2.0 - 2.0 * s)


def make_kernel(kind="fractional", s=0.5, epsilon=None, constant=None,
                use_normalization_preset=False) -> Kernel:
    if use_normalization_preset:
        if constant is not None:
            raise ValueError("give either a constant or the normalization preset, not both")
        constant = normalization_constant(s)
    return Kernel(kind, float(s), None if epsilon is None else float(epsilon),
                  1.0 if constant is None else float(constant))


def eval_kernel(k: Kernel, x, z):
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    r = np.abs(x - z)
    if np.any(r == 0):
        raise ValueError("kernel evaluated on the diagonal x == z")
    out = k.radial(r)
    return float(out) if out.ndim == 0 else out


def tail_integral(k: Kernel, x, domain):
    """Integral of k(x, .) over the complement of ``domain`` = (a, b)."""
    a, b = domain
    x = np.asarray(x, dtype=float)
    if np.any((x <= a) | (x >= b)):
        raise ValueError("tail_integral needs a < x < b")
    out = _one_sided(k, x - a) + _one_sided(k, b - x)
    return float(out) if out.ndim == 0 else out


def _one_sided(k: Kernel, d):
    # int_d^inf kappa(r) dr
    c, s, eps = k.constant, k.s, k.horizon
    if k.kind == "constant_ball":
        return c * np.maximum(eps - d, 0.0)
    val = c / (2.0 * s) * d ** (-2.0 * s)
    if k.kind == "truncated_fractional":
        val = np.where(d < eps, val - c / (2.0 * s) * eps ** (-2.0 * s), 0.0)
    return val
