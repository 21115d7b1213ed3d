"""Closed-form reference solutions used as test oracles.

Points ``x`` are arrays whose last axis has length ``n``; every function
broadcasts over the leading axes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .grid import Grid, ScalarField


@dataclass(frozen=True)
class SelfSimilarParams:
    p: float
    n: int = 2

    def __post_init__(self):
        if not self.p > 1.0:
            raise ValueError(f"the self-similar solution needs p > 1, got {self.p}")
        if self.n < 1:
            raise ValueError("dimension must be >= 1")

    @property
    def alpha(self) -> float:
        """Decay exponent ``(n + p - 2) / (2 (p - 1))``."""
        return (self.n + self.p - 2.0) / (2.0 * (self.p - 1.0))


def _sq_norm(x):
    x = np.asarray(x, dtype=float)
    return np.sum(x * x, axis=-1)


def gp_exact(x, t: float, params: SelfSimilarParams):
    """Self-similar solution ``t^-alpha exp(-|x|^2 / (4 (p-1) t))``."""
    if not t > 0.0:
        raise DomainError(f"G_p is defined for t > 0, got t = {t}")
    return t ** (-params.alpha) * np.exp(-_sq_norm(x) / (4.0 * (params.p - 1.0) * t))


def gp_time_derivative(x, t: float, params: SelfSimilarParams):
    """Analytic ``d/dt G_p = G_p * (-alpha / t + |x|^2 / (4 (p-1) t^2))``."""
    if not t > 0.0:
        raise DomainError(f"G_p is defined for t > 0, got t = {t}")
    r2 = _sq_norm(x)
    return gp_exact(x, t, params) * (-params.alpha / t + r2 / (4.0 * (params.p - 1.0) * t * t))


def gp_field(grid: Grid, t: float, p: float) -> ScalarField:
    params = SelfSimilarParams(p, grid.n)
    return ScalarField(grid, gp_exact(grid.coordinates(), t, params), t)


def heat_kernel(x, y, t: float):
    """Gauss-Weierstrass kernel ``(4 pi t)^(-n/2) exp(-|x-y|^2 / (4t))``."""
    if not t > 0.0:
        raise DomainError(f"heat kernel needs t > 0, got t = {t}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = np.broadcast_shapes(x.shape, y.shape)[-1]
    return (4.0 * np.pi * t) ** (-0.5 * n) * np.exp(-_sq_norm(x - y) / (4.0 * t))


def heat_convolution(field: ScalarField, t: float) -> ScalarField:
    """Whole-space heat flow of the sampled data, by trapezoid quadrature.

    The data are taken as zero outside the grid box. The kernel factorizes
    per axis, so the quadrature is a sequence of 1D matrix products.
    """
    if not t > 0.0:
        raise DomainError(f"heat kernel needs t > 0, got t = {t}")
    g = field.grid
    out = field.values
    for k in range(g.n):
        xs = g.axis(k)
        w = np.full(xs.size, g.h[k])
        w[0] = w[-1] = 0.5 * g.h[k]
        kern = (4.0 * np.pi * t) ** -0.5 * np.exp(-((xs[:, None] - xs[None, :]) ** 2) / (4.0 * t))
        out = np.moveaxis(np.tensordot(kern * w[None, :], out, axes=([1], [k])), 0, k)
    return ScalarField(g, out, field.time + t)


def tychonoff_barrier(x, t: float, y, K: float, mu: float, T: float, eps_t: float, p: float):
    r"""Gaussian-growth supersolution ``K + mu s^(-beta) exp(|x-y|^2 / (4 (p-1) s))``.

    Here ``s = T + eps_t - t`` and ``beta = (n + p - 2) / (2p - 2)``.
    """
    if not p > 1.0:
        raise ValueError("the barrier needs p > 1")
    if not eps_t > 0.0:
        raise ValueError("eps_t must be positive")
    if mu < 0.0:
        raise ValueError("mu must be non-negative")
    s = T + eps_t - t
    if not s > 0.0:
        raise DomainError(f"barrier is defined for t < T + eps_t = {T + eps_t}, got t = {t}")
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    beta = (n + p - 2.0) / (2.0 * p - 2.0)
    if mu == 0.0:
        return np.full(x.shape[:-1], float(K)) if x.ndim > 1 else float(K)
    d2 = _sq_norm(x - np.asarray(y, dtype=float))
    return K + mu * s ** (-beta) * np.exp(d2 / (4.0 * (p - 1.0) * s))


def shrinking_sphere_radius(r0: float, t: float, n: int = 2) -> float:
    """Radius ``sqrt(r0^2 - 2 (n-1) t)`` of a sphere moving by mean curvature."""
    if not r0 > 0.0:
        raise ValueError("r0 must be positive")
    if n < 2:
        raise ValueError("mean curvature motion of spheres needs n >= 2")
    left = r0 * r0 - 2.0 * (n - 1) * t
    if left < 0.0:
        raise DomainError(f"t = {t} is past the extinction time {extinction_time(r0, n)}")
    return float(np.sqrt(left))


def extinction_time(r0: float, n: int = 2) -> float:
    return r0 * r0 / (2.0 * (n - 1))
