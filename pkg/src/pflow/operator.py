r"""Regularized diffusion coefficients and the pointwise spatial operator.

The march integrates

.. math::

    u_t = a^\varepsilon_{ij}(Du)\,u_{ij}, \qquad
    a^\varepsilon_{ij}(\sigma) = \delta_{ij}
        + (p-2)\frac{\sigma_i\sigma_j}{\varepsilon^2 + |\sigma|^2},

whose eigenvalues lie in ``[min(1, p-1), max(1, p-1)]`` for every ``sigma``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import Grid, ScalarField, gradient_central, hessian_central


@dataclass(frozen=True)
class PdeParams:
    """Exponent ``p >= 1`` and regularization ``eps > 0``."""

    p: float
    eps: float = 1e-2

    def __post_init__(self):
        if not (np.isfinite(self.p) and self.p >= 1.0):
            raise ValueError(f"p must be >= 1, got {self.p}")
        if not (np.isfinite(self.eps) and self.eps > 0.0):
            raise ValueError(f"eps must be > 0, got {self.eps}")
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "eps", float(self.eps))

    @property
    def ellipticity(self) -> tuple[float, float]:
        """Lower and upper eigenvalue bounds of the coefficient matrix."""
        return min(1.0, self.p - 1.0), max(1.0, self.p - 1.0)


def coefficient_matrix(sigma, params: PdeParams) -> np.ndarray:
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    n = sigma.shape[0]
    scale = (params.p - 2.0) / (params.eps**2 + sigma @ sigma)
    return np.eye(n) + scale * np.outer(sigma, sigma)


def apply_operator(field: ScalarField, params: PdeParams, node) -> float:
    """Pointwise ``sum_ij a_ij(Du) u_ij`` using central stencils."""
    grad = gradient_central(field, node)
    hess = hessian_central(field, node)
    return float(np.sum(coefficient_matrix(grad, params) * hess))


def operator_field(values: np.ndarray, grid: Grid, params: PdeParams) -> np.ndarray:
    """Vectorized operator over all interior nodes, zero on the boundary."""
    u = np.ascontiguousarray(values, dtype=float).reshape(grid.counts)
    return _kernels.operator_interior(u, grid.h, params.p, params.eps)


def cfl_dt(grid: Grid, params: PdeParams, safety: float = 0.9) -> float:
    """Default explicit time step ``safety * min(h^2) / (2 n max(1, p-1))``."""
    if not (0.0 < safety <= 1.0):
        raise ValueError(f"safety must lie in (0, 1], got {safety}")
    hmin2 = min(h * h for h in grid.h)
    return safety * hmin2 / (2.0 * grid.n * params.ellipticity[1])
