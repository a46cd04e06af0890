"""Gauss rules on [0, 1], cached by order."""
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

__all__ = ["gauss_legendre", "gauss_jacobi"]


@lru_cache(maxsize=None)
def gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def gauss_jacobi(n: int, beta: float):
    """Nodes/weights for int_0^1 f(t) t^beta dt, exact for degree 2n - 1."""
    x, w = roots_jacobi(n, 0.0, beta)
    return 0.5 * (x + 1.0), w / 2.0 ** (beta + 1.0)
