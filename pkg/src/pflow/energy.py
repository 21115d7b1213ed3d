"""Energy functionals sampled along a solve, and the trace container.

All integrals use the tensor trapezoid rule on the solution grid. Gradients
are central differences at interior nodes; boundary nodes reuse the gradient
of their nearest interior node, so a constant integrand integrates to the
box measure exactly.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DomainError, PreconditionError
from .exact import heat_kernel
from .grid import Grid, ScalarField, extend_to_boundary, gradient_array
from .operator import PdeParams, operator_field


@dataclass
class EnergyTrace:
    """Time-ordered samples ``(t, value)`` of one functional."""

    name: str
    samples: list[tuple[float, float]] = field(default_factory=list)

    def append(self, t: float, value: float) -> None:
        if not np.isfinite(value) or value < 0.0:
            raise ValueError(f"{self.name}: sample {value!r} at t={t} is not finite and >= 0")
        if self.samples and not t > self.samples[-1][0]:
            raise ValueError(f"{self.name}: times must increase strictly ({t} after {self.samples[-1][0]})")
        self.samples.append((float(t), float(value)))

    @property
    def times(self) -> np.ndarray:
        return np.array([s[0] for s in self.samples])

    @property
    def values(self) -> np.ndarray:
        return np.array([s[1] for s in self.samples])

    def __len__(self):
        return len(self.samples)

    def max_relative_increase(self) -> float:
        """Largest ``(v[k+1] - v[k]) / v[k]`` over successive pairs (<= 0 if monotone)."""
        v = self.values
        if v.size < 2:
            return 0.0
        denom = np.where(v[:-1] > 0.0, v[:-1], 1.0)
        return float(np.max((v[1:] - v[:-1]) / denom))

    def is_non_increasing(self, rel_tol: float) -> bool:
        v = self.values
        return bool(np.all(v[1:] <= v[:-1] * (1.0 + rel_tol)))

    def write_csv(self, path, comments=()) -> None:
        with open(path, "w", newline="") as fh:
            for c in comments:
                fh.write(f"# {c}\n")
            fh.write(f"# trace {self.name}\n")
            fh.write("t,value\n")
            for t, v in self.samples:
                fh.write(f"{t:.17g},{v:.17g}\n")

    @classmethod
    def read_csv(cls, path) -> "EnergyTrace":
        lines = Path(path).read_text().splitlines()
        tags = [ln[len("# trace "):].strip() for ln in lines if ln.startswith("# trace ")]
        name = tags[0] if tags else Path(path).stem
        body = [ln for ln in lines if ln and not ln.startswith("#")]
        trace = cls(name)
        for row in csv.DictReader(body):
            trace.append(float(row["t"]), float(row["value"]))
        return trace


@dataclass(frozen=True)
class Monitor:
    """Named scalar functional ``field -> float`` evaluated at sample times."""

    name: str
    func: Callable[[ScalarField], float]

    def __call__(self, field: ScalarField) -> float:
        return float(self.func(field))


def trapezoid_weights(grid: Grid) -> np.ndarray:
    weights = None
    for k in range(grid.n):
        w = np.full(grid.counts[k], grid.h[k])
        w[0] = w[-1] = 0.5 * grid.h[k]
        weights = w if weights is None else np.multiply.outer(weights, w)
    return weights


def integrate(grid: Grid, integrand: np.ndarray) -> float:
    """Tensor trapezoid rule; fixed summation order."""
    return float(np.sum(trapezoid_weights(grid) * integrand))


def gradient_squared(field: ScalarField) -> np.ndarray:
    """``|Du|^2`` on every node (boundary nodes copy their interior neighbour)."""
    grad = gradient_array(field.values, field.grid)
    return extend_to_boundary(np.sum(grad * grad, axis=0))


def regularized_energy(field: ScalarField, params: PdeParams) -> float:
    """``int (eps^2 + |Du|^2)^(p/2) dx``."""
    return integrate(field.grid, (params.eps**2 + gradient_squared(field)) ** (0.5 * params.p))


def p_energy(field: ScalarField, p: float) -> float:
    """``int |Du|^p dx``."""
    if p < 1.0:
        raise ValueError("p must be >= 1")
    return integrate(field.grid, gradient_squared(field) ** (0.5 * p))


def struwe_energy(field: ScalarField, x0, T: float, p: float) -> float:
    """Backward-heat-kernel weighted energy ``(T-t)^(p/2) int |Du|^p G(x0, y, T-t) dy``."""
    tau = T - field.time
    if not tau > 0.0:
        raise DomainError(f"weighted energy needs t < T, got t = {field.time}, T = {T}")
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (field.grid.n,))
    kern = heat_kernel(x0, field.grid.coordinates(), tau)
    return tau ** (0.5 * p) * integrate(field.grid, gradient_squared(field) ** (0.5 * p) * kern)


def dissipation_rate(field: ScalarField, params: PdeParams) -> float:
    """``-p int (eps^2 + |Du|^2)^(p/2 - 1) (u_t)^2`` with ``u_t`` from the discrete operator.

    ``u_t`` vanishes on boundary nodes, where Dirichlet data are frozen.
    """
    ut = operator_field(field.values, field.grid, params)
    w = (params.eps**2 + gradient_squared(field)) ** (0.5 * params.p - 1.0)
    return -params.p * integrate(field.grid, w * ut * ut)


def struwe_I(run, T: float, name: str = "struwe") -> list[tuple[float, float]]:
    """Reparametrize a weighted-energy trace by ``r = sqrt(T - t)``, increasing in ``r``."""
    traces = getattr(run, "traces", run)
    if name not in traces:
        raise PreconditionError(f"run has no trace named {name!r}")
    out = []
    for t, v in traces[name].samples:
        if not t < T:
            raise DomainError(f"trace sample at t = {t} is not before T = {T}")
        out.append((float(np.sqrt(T - t)), v))
    out.sort(key=lambda s: s[0])
    return out


def regularized_monitor(params: PdeParams) -> Monitor:
    return Monitor("regularized_energy", lambda f: regularized_energy(f, params))


def p_energy_monitor(p: float) -> Monitor:
    return Monitor("p_energy", lambda f: p_energy(f, p))


def struwe_monitor(x0, T: float, p: float) -> Monitor:
    return Monitor("struwe", lambda f: struwe_energy(f, x0, T, p))
