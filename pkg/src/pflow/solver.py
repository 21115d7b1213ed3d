"""Explicit time stepping, steady states and the independent relaxation solver.

Only interior nodes evolve. For truncated Cauchy runs the box boundary holds
the far-field constant of the datum; for Cauchy-Dirichlet runs it holds the
datum itself. Either way boundary values are frozen in time.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .energy import EnergyTrace, Monitor
from .errors import ConfigError, ConvergenceError, InstabilityError, PreconditionError
from .grid import Grid, ScalarField, gradient_array
from .operator import PdeParams, cfl_dt, operator_field

log = logging.getLogger(__name__)

CAUCHY = "cauchy-truncated"
DIRICHLET = "cauchy-dirichlet"
KINDS = (CAUCHY, DIRICHLET)


def _as_values(grid: Grid, data) -> np.ndarray:
    if isinstance(data, ScalarField):
        return np.array(data.values)
    if callable(data):
        return grid.sample(data)
    return np.array(data, dtype=float).reshape(grid.counts)


@dataclass(frozen=True)
class ProblemSpec:
    """Initial datum ``g`` plus frozen boundary data on a grid box.

    ``boundary`` is the far-field constant for ``cauchy-truncated`` problems
    and a full-grid array (only boundary nodes are read) for
    ``cauchy-dirichlet`` problems.
    """

    kind: str
    grid: Grid
    initial: ScalarField
    boundary: float | np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PreconditionError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.initial.grid != self.grid:
            raise PreconditionError("initial field lives on a different grid")
        if self.grid.n != len(self.grid.counts) or min(self.grid.counts) < 3:
            raise PreconditionError("domain must be at least 3 nodes thick on every axis")
        mask = self.grid.boundary_mask()
        g_b = self.initial.values[mask]
        if self.kind == CAUCHY:
            c = float(self.boundary)
            if np.max(np.abs(g_b - c)) > 1e-12 * max(1.0, abs(c)):
                raise PreconditionError(
                    "truncated Cauchy datum must equal the far-field constant on the box boundary"
                )
            object.__setattr__(self, "boundary", c)
        else:
            b = np.array(self.boundary, dtype=float).reshape(self.grid.counts)
            if not np.array_equal(b[mask], g_b):
                raise PreconditionError("Dirichlet values must equal the initial datum on the boundary")
            b.setflags(write=False)
            object.__setattr__(self, "boundary", b)

    @classmethod
    def cauchy(cls, grid: Grid, initial, far_field: float | None = None, time: float = 0.0):
        values = _as_values(grid, initial)
        if far_field is None:
            far_field = float(values.flat[0])
        t = initial.time if isinstance(initial, ScalarField) else time
        return cls(CAUCHY, grid, ScalarField(grid, values, t), far_field)

    @classmethod
    def dirichlet(cls, grid: Grid, initial, time: float = 0.0):
        values = _as_values(grid, initial)
        t = initial.time if isinstance(initial, ScalarField) else time
        return cls(DIRICHLET, grid, ScalarField(grid, values, t), values)

    @property
    def boundary_values(self) -> np.ndarray:
        if self.kind == CAUCHY:
            return np.full(self.grid.counts, self.boundary)
        return np.array(self.boundary)

    def shifted(self, c: float) -> "ProblemSpec":
        """Same problem with datum and boundary data raised by ``c``."""
        init = self.initial.with_values(self.initial.values + c)
        return ProblemSpec(self.kind, self.grid, init, self.boundary + c)

    def with_initial(self, values) -> "ProblemSpec":
        if self.kind == CAUCHY:
            return ProblemSpec.cauchy(self.grid, values, self.boundary, self.initial.time)
        return ProblemSpec.dirichlet(self.grid, values, self.initial.time)


@dataclass(frozen=True)
class SolverConfig:
    """Time-stepping controls. ``t_end`` is an absolute time; ``dt=None`` means CFL.

    When ``grid`` is given the CFL bound is checked at construction;
    otherwise it is checked the first time a step size is requested.
    """

    params: PdeParams
    t_end: float
    dt: float | None = None
    record_every: int = 10
    safety: float = 0.9
    grid: Grid | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not (np.isfinite(self.t_end) and self.t_end >= 0.0):
            raise ConfigError(f"t_end must be finite and >= 0, got {self.t_end}")
        if self.dt is not None and not self.dt > 0.0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if int(self.record_every) < 1:
            raise ConfigError("record_every must be >= 1")
        if not (0.0 < self.safety <= 1.0):
            raise ConfigError("safety must lie in (0, 1]")
        if self.grid is not None:
            self.time_step(self.grid)

    def time_step(self, grid: Grid) -> float:
        """Nominal step; rejects any ``dt`` above the unit-safety CFL bound."""
        limit = cfl_dt(grid, self.params, 1.0)
        if self.dt is None:
            return cfl_dt(grid, self.params, self.safety)
        if self.dt > limit * (1.0 + 1e-12):
            raise ConfigError(f"dt = {self.dt} exceeds the CFL bound {limit:.6g} for this grid")
        return float(self.dt)

    def validate_for(self, grid: Grid) -> "SolverConfig":
        self.time_step(grid)
        return self


@dataclass
class RunResult:
    final: ScalarField
    traces: dict[str, EnergyTrace]
    step_count: int
    sup_gradient_trace: EnergyTrace
    snapshots: list[ScalarField] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return self.sup_gradient_trace.times


def sup_gradient(values: np.ndarray, grid: Grid) -> float:
    grad = gradient_array(values, grid)
    return float(np.sqrt(np.max(np.sum(grad * grad, axis=0))))


class March:
    """Double-buffered forward-Euler march from ``spec.initial`` to ``cfg.t_end``.

    The nominal step is shrunk uniformly so that an integer number of steps
    lands exactly on ``t_end``.
    """

    def __init__(self, spec: ProblemSpec, cfg: SolverConfig, max_steps: int | None = None):
        self.spec = spec
        self.grid = spec.grid
        self.params = cfg.params
        nominal = cfg.time_step(self.grid)
        self.t0 = spec.initial.time
        if max_steps is not None:
            # open-ended march at the nominal step
            self.n_steps = max_steps
            self.dt = nominal
            self.t_end = self.t0 + max_steps * nominal
        else:
            span = cfg.t_end - self.t0
            steps = 0 if span <= 0.0 else max(1, math.ceil(span / nominal - 1e-9))
            self.n_steps = steps
            self.dt = span / steps if steps > 0 else nominal
            self.t_end = cfg.t_end if steps > 0 else self.t0
        self.u = np.array(spec.initial.values)
        self._buf = np.empty_like(self.u)
        self.k = 0
        self.last_rate = None

    @property
    def time(self) -> float:
        if self.k == self.n_steps and self.n_steps > 0:
            return self.t_end
        return self.t0 + self.k * self.dt

    @property
    def done(self) -> bool:
        return self.k >= self.n_steps

    def rate(self) -> np.ndarray:
        return operator_field(self.u, self.grid, self.params)

    def step(self, rate: np.ndarray | None = None) -> None:
        a = self.rate() if rate is None else rate
        self.last_rate = a
        np.multiply(a, self.dt, out=self._buf)
        np.add(self.u, self._buf, out=self._buf)
        if not np.isfinite(self._buf).all():
            bad = tuple(int(i) for i in np.argwhere(~np.isfinite(self._buf))[0])
            raise InstabilityError(bad, self.k + 1)
        self.u, self._buf = self._buf, self.u
        self.k += 1

    def field(self) -> ScalarField:
        return ScalarField(self.grid, self.u, self.time)


def step_explicit(field: ScalarField, spec: ProblemSpec, cfg: SolverConfig) -> ScalarField:
    """One forward-Euler step of size ``cfg.time_step``; boundary nodes keep their data."""
    if field.grid != spec.grid:
        raise PreconditionError("field does not live on the problem grid")
    dt = cfg.time_step(spec.grid)
    new = field.values + dt * operator_field(field.values, spec.grid, cfg.params)
    mask = spec.grid.boundary_mask()
    new[mask] = spec.boundary_values[mask]
    if not np.isfinite(new).all():
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(new))[0])
        raise InstabilityError(bad, 1)
    return ScalarField(spec.grid, new, field.time + dt)


def _normalize_monitors(monitors) -> list[Monitor]:
    if monitors is None:
        return []
    if isinstance(monitors, Mapping):
        return [Monitor(k, v) for k, v in monitors.items()]
    out = []
    for m in monitors:
        out.append(m if isinstance(m, Monitor) else Monitor(*m))
    names = [m.name for m in out]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate monitor names in {names}")
    return out


class _Recorder:
    def __init__(self, monitors, keep_snapshots):
        self.monitors = _normalize_monitors(monitors)
        self.traces = {m.name: EnergyTrace(m.name) for m in self.monitors}
        self.grad = EnergyTrace("sup_gradient")
        self.keep = keep_snapshots
        self.snapshots = []

    def record(self, f: ScalarField) -> None:
        for m in self.monitors:
            self.traces[m.name].append(f.time, m(f))
        self.grad.append(f.time, sup_gradient(f.values, f.grid))
        if self.keep:
            self.snapshots.append(f)

    def result(self, final, steps):
        return RunResult(final, self.traces, steps, self.grad, self.snapshots)


def solve(
    spec: ProblemSpec,
    cfg: SolverConfig,
    monitors: Iterable[Monitor] | Mapping[str, Callable] | None = (),
    keep_snapshots: bool = False,
) -> RunResult:
    """March to ``cfg.t_end``, sampling monitors every ``record_every`` steps and at the end."""
    march = March(spec, cfg)
    rec = _Recorder(monitors, keep_snapshots)
    rec.record(march.field())
    every = int(cfg.record_every)
    while not march.done:
        march.step()
        if march.k % every == 0 or march.done:
            rec.record(march.field())
    return rec.result(march.field(), march.k)


def steady_run(
    spec: ProblemSpec,
    cfg: SolverConfig,
    tol: float,
    monitors=(),
    max_steps: int = 10**7,
) -> RunResult:
    """March a Cauchy-Dirichlet problem until ``max |operator| < tol``.

    ``cfg.t_end`` is ignored; the march length is set by the residual.
    """
    if spec.kind != DIRICHLET:
        raise PreconditionError("steady states are only defined for cauchy-dirichlet problems")
    march = March(spec, cfg, max_steps=max_steps)
    rec = _Recorder(monitors, False)
    rec.record(march.field())
    every = int(cfg.record_every)
    residual = math.inf
    while True:
        rate = march.rate()
        residual = float(np.max(np.abs(rate)))
        if residual < tol:
            break
        if march.k >= max_steps:
            raise ConvergenceError(f"no steady state within {max_steps} steps", residual)
        march.step(rate)
        if march.k % every == 0:
            rec.record(march.field())
    final = march.field()
    if not rec.grad.samples or rec.grad.samples[-1][0] < final.time:
        rec.record(final)
    log.info("steady state after %d steps, residual %.3e", march.k, residual)
    return rec.result(final, march.k)


def solve_to_steady(spec: ProblemSpec, cfg: SolverConfig, tol: float, max_steps: int = 10**7) -> ScalarField:
    return steady_run(spec, cfg, tol, max_steps=max_steps).final


def default_omega(grid: Grid) -> float:
    """Optimal SOR factor for the Laplacian on ``grid``."""
    rho = np.mean([np.cos(np.pi / (c - 1)) for c in grid.counts])
    return float(2.0 / (1.0 + np.sqrt(1.0 - rho * rho)))


def relax_residual(values: np.ndarray, grid: Grid, params: PdeParams) -> np.ndarray:
    v = np.ascontiguousarray(values, dtype=float).reshape(grid.counts)
    return _kernels.relax_residual(v, grid.h, params.p, params.eps)


def p_laplace_relax(
    spec: ProblemSpec,
    params: PdeParams,
    tol: float,
    omega: float | None = None,
    max_sweeps: int = 10**6,
    check_every: int = 10,
) -> ScalarField:
    """Solve ``div((eps^2 + |Dv|^2)^(p/2-1) Dv) = 0`` with ``v = g`` on the boundary.

    Red-black nonlinear SOR on the divergence-form 5-point scheme. Face
    coefficients use the one-sided normal difference across the face and
    the average of the two adjacent central tangential differences. Each
    node first moves to the exact root of its own balance equation, then
    over-relaxes by ``omega``.

    Over-relaxation is safeguarded: if the residual turns non-finite or
    grows tenfold past its best value, the last good iterate is restored
    and ``omega - 1`` is halved.
    """
    if spec.kind != DIRICHLET:
        raise PreconditionError("p_laplace_relax needs a cauchy-dirichlet problem")
    grid = spec.grid
    omega = default_omega(grid) if omega is None else float(omega)
    if not (0.0 < omega < 2.0):
        raise ValueError("omega must lie in (0, 2)")
    v = np.array(spec.initial.values)
    mask = grid.boundary_mask()
    v[mask] = spec.boundary_values[mask]
    history = []
    best = math.inf
    good = v.copy()
    res = math.inf
    for sweep in range(1, max_sweeps + 1):
        _kernels.relax_sweep(v, grid.h, params.p, params.eps, omega)
        if sweep % check_every:
            continue
        res = float(np.max(np.abs(relax_residual(v, grid, params))))
        history.append(res)
        if not np.isfinite(res) or res > 10.0 * best:
            if omega <= 1.0:
                raise ConvergenceError("relaxation diverged", res, history)
            omega = 1.0 + 0.8 * (omega - 1.0)
            log.info("relaxation unstable at sweep %d, omega reduced to %.4f", sweep, omega)
            v[...] = good
            continue
        if res <= best:
            best = res
            good[...] = v
        if res < tol:
            log.info("relaxation converged in %d sweeps, residual %.3e", sweep, res)
            return ScalarField(grid, v, spec.initial.time)
    raise ConvergenceError(f"relaxation did not converge in {max_sweeps} sweeps", res, history)


def sweep_p(
    spec: ProblemSpec,
    p_list: Sequence[float],
    eps: float,
    t_end: float,
    record_every: int = 10,
    safety: float = 0.9,
    monitors: Callable[[float], Iterable[Monitor]] | None = None,
    keep_snapshots: bool = False,
) -> dict[float, RunResult]:
    """Solve the same problem for each ``p`` of a strictly decreasing list above 1."""
    p_list = [float(p) for p in p_list]
    if not p_list:
        raise ValueError("p_list is empty")
    if any(p <= 1.0 for p in p_list):
        raise ValueError("every p must exceed 1")
    if any(b >= a for a, b in zip(p_list, p_list[1:])):
        raise ValueError("p_list must be strictly decreasing")
    out = {}
    for p in p_list:
        cfg = SolverConfig(PdeParams(p, eps), t_end, record_every=record_every, safety=safety)
        mons = monitors(p) if monitors is not None else ()
        out[p] = solve(spec, cfg, mons, keep_snapshots=keep_snapshots)
    return out


def extract_zero_level_radius(field: ScalarField) -> float:
    """Distance from the box centre to the first sign change along the +x ray.

    Values on the ray are linearly interpolated between nodes.
    """
    g = field.grid
    center = [0.5 * (a + b) for a, b in zip(g.lo, g.hi)]
    xs = g.axis(0)
    if g.n == 1:
        row = field.values
    else:
        ys = g.axis(1)
        row = np.array([np.interp(center[1], ys, field.values[i, :]) for i in range(xs.size)])
    u0 = float(np.interp(center[0], xs, row))
    ahead = xs > center[0]
    rx = np.concatenate([[center[0]], xs[ahead]])
    ru = np.concatenate([[u0], row[ahead]])
    if u0 == 0.0:
        return 0.0
    s0 = np.sign(u0)
    for k in range(1, rx.size):
        if ru[k] == 0.0:
            return float(rx[k] - center[0])
        if np.sign(ru[k]) != s0:
            frac = ru[k - 1] / (ru[k - 1] - ru[k])
            return float(rx[k - 1] + frac * (rx[k] - rx[k - 1]) - center[0])
    raise PreconditionError("field does not change sign along the +x ray from the centre")
