"""Numerical checks of comparison, maximum-principle and convergence properties.

Every check owns its solver instances and is deterministic: repeated calls
return bit-identical reports. Tolerances for ordering checks are relative to
the oscillation of the data, so they are invariant under ``u -> k u + c``.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .datums import bump
from .errors import PreconditionError
from .exact import SelfSimilarParams, gp_exact, gp_field, gp_time_derivative, tychonoff_barrier
from .grid import Grid
from .operator import PdeParams, operator_field
from .solver import CAUCHY, March, ProblemSpec, RunResult, SolverConfig, solve

log = logging.getLogger(__name__)


@dataclass
class ComparisonReport:
    """Worst violation of an ordering that should hold, and where it happened."""

    max_violation: float
    location: tuple | None
    tolerance: float
    check: str = "comparison"
    parameters: str = ""

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.check} [{self.parameters}] violation={self.max_violation:.3e} tol={self.tolerance:.3e}"


@dataclass
class OrderReport:
    """Errors on successive grid levels and the observed convergence order."""

    h: list[float]
    errors: list[float]
    pairwise_orders: list[float] = field(default_factory=list)
    monotone: bool = True

    def __post_init__(self):
        if len(self.errors) < 2 or len(self.h) != len(self.errors):
            raise PreconditionError("an order estimate needs at least two grid levels")
        if any(not e > 0.0 for e in self.errors):
            raise PreconditionError("errors must be strictly positive to estimate an order")
        self.pairwise_orders = [
            math.log(e0 / e1) / math.log(h0 / h1)
            for (h0, e0), (h1, e1) in zip(zip(self.h, self.errors), zip(self.h[1:], self.errors[1:]))
        ]
        self.monotone = all(e1 < e0 for e0, e1 in zip(self.errors, self.errors[1:]))
        if not self.monotone:
            log.warning("non-monotone error sequence %s", self.errors)

    @property
    def observed_order(self) -> float:
        return min(self.pairwise_orders)


def osc(values) -> float:
    values = np.asarray(values)
    return float(np.max(values) - np.min(values))


def _same_grid(spec1: ProblemSpec, spec2: ProblemSpec) -> None:
    if spec1.grid != spec2.grid:
        raise PreconditionError("both problems must share one grid")


def _interior(grid: Grid):
    return (slice(1, -1),) * grid.n


def _worst(diff: np.ndarray, current, t):
    """Update ``current = (value, node, time)`` with the max of ``diff``."""
    idx = int(np.argmax(diff))
    val = float(diff.flat[idx])
    if current is None or val > current[0]:
        node = tuple(int(i) + 1 for i in np.unravel_index(idx, diff.shape))
        return (val, node, t)
    return current


def check_comparison(
    spec1: ProblemSpec, spec2: ProblemSpec, cfg: SolverConfig, rel_tol: float = 1e-6
) -> ComparisonReport:
    """Co-evolve ``g1 <= g2`` and report ``sup (u1 - u2)^+`` over interior nodes and steps."""
    _same_grid(spec1, spec2)
    if np.any(spec1.initial.values > spec2.initial.values):
        raise PreconditionError("g1 <= g2 must hold on the parabolic boundary")
    if np.any(spec1.boundary_values > spec2.boundary_values):
        raise PreconditionError("boundary data must be ordered")
    m1, m2 = March(spec1, cfg), March(spec2, cfg)
    inner = _interior(spec1.grid)
    worst = None
    while True:
        diff = np.maximum(m1.u[inner] - m2.u[inner], 0.0)
        worst = _worst(diff, worst, m1.time)
        if m1.done:
            break
        m1.step()
        m2.step()
    tol = rel_tol * osc(spec2.initial.values)
    return ComparisonReport(worst[0], (worst[1], worst[2]), tol, "comparison", f"p={cfg.params.p}")


def _contraction(spec1, spec2, cfg):
    _same_grid(spec1, spec2)
    ref = float(np.max(np.abs(spec1.initial.values - spec2.initial.values)))
    m1, m2 = March(spec1, cfg), March(spec2, cfg)
    worst = None
    while True:
        d = np.abs(m1.u - m2.u)
        worst = _worst(d[_interior(spec1.grid)], worst, m1.time)
        if m1.done:
            break
        m1.step()
        m2.step()
    return ref, worst


def check_sup_contraction(spec1: ProblemSpec, spec2: ProblemSpec, cfg: SolverConfig) -> float:
    """Excess ``[sup_x |u1 - u2|(t) - sup_x |g1 - g2|]^+`` maximized over steps.

    The reference sup runs over every node, so for Cauchy-Dirichlet problems
    it covers the whole parabolic boundary.
    """
    ref, worst = _contraction(spec1, spec2, cfg)
    return max(0.0, worst[0] - ref)


def contraction_report(spec1, spec2, cfg, rel_tol: float = 1e-6) -> ComparisonReport:
    ref, worst = _contraction(spec1, spec2, cfg)
    return ComparisonReport(
        max(0.0, worst[0] - ref), (worst[1], worst[2]), rel_tol * ref, "sup_contraction", f"p={cfg.params.p}"
    )


def check_max_principle(spec: ProblemSpec, cfg: SolverConfig, rel_tol: float = 1e-6) -> ComparisonReport:
    """Extrema over the interior stay within the extrema of the parabolic-boundary data."""
    data = np.concatenate([spec.initial.values.ravel(), spec.boundary_values[spec.grid.boundary_mask()]])
    hi, lo = float(np.max(data)), float(np.min(data))
    march = March(spec, cfg)
    inner = _interior(spec.grid)
    worst = None
    while True:
        u = march.u[inner]
        worst = _worst(np.maximum(np.maximum(u - hi, lo - u), 0.0), worst, march.time)
        if march.done:
            break
        march.step()
    return ComparisonReport(
        worst[0], (worst[1], worst[2]), rel_tol * (hi - lo), "max_principle", f"p={cfg.params.p}"
    )


@dataclass(frozen=True)
class TychonoffBarrier:
    y: Sequence[float]
    K: float
    mu: float
    T: float
    eps_t: float
    p: float

    def __call__(self, x, t):
        return tychonoff_barrier(x, t, self.y, self.K, self.mu, self.T, self.eps_t, self.p)


def check_tychonoff_domination(
    spec: ProblemSpec, cfg: SolverConfig, barrier: TychonoffBarrier, rel_tol: float = 1e-6
) -> ComparisonReport:
    """Evolve ``u`` and report ``sup (u - v)^+`` against the closed-form barrier ``v``."""
    grid = spec.grid
    if not cfg.t_end < barrier.T + barrier.eps_t:
        raise PreconditionError("t_end must precede the barrier blow-up time T + eps_t")
    x = grid.coordinates()
    mask = grid.boundary_mask()
    if np.any(spec.initial.values > barrier(x, spec.initial.time)):
        raise PreconditionError("barrier does not dominate the initial datum")
    march = March(spec, cfg)
    inner = _interior(grid)
    bdry = spec.boundary_values[mask]
    worst = None
    while True:
        v = barrier(x, march.time)
        if np.any(bdry > v[mask]):
            raise PreconditionError(f"barrier does not dominate the boundary data at t = {march.time}")
        worst = _worst(np.maximum(march.u[inner] - v[inner], 0.0), worst, march.time)
        if march.done:
            break
        march.step()
    tol = rel_tol * osc(spec.initial.values)
    return ComparisonReport(
        worst[0], (worst[1], worst[2]), tol, "tychonoff", f"p={cfg.params.p} K={barrier.K} mu={barrier.mu:.3g}"
    )


def check_infinite_speed(
    spec: ProblemSpec, cfg: SolverConfig, probes: np.ndarray, threshold: float = 1e-12
) -> ComparisonReport:
    """Solution at the probe points must exceed ``threshold`` at ``cfg.t_end``."""
    run = solve(spec, cfg)
    grid = spec.grid
    idx = [tuple(int(round((x[k] - grid.lo[k]) / grid.h[k])) for k in range(grid.n)) for x in probes]
    vals = np.array([run.final.values[i] for i in idx])
    k = int(np.argmin(vals))
    return ComparisonReport(
        max(0.0, threshold - float(vals[k])), (idx[k], run.final.time), 0.0,
        "infinite_speed", f"p={cfg.params.p} min={vals[k]:.3e}",
    )


def check_concavity(
    spec: ProblemSpec, cfg: SolverConfig, window: float | None = None, tol: float = 1e-8
) -> ComparisonReport:
    """Discrete midpoint concavity along each axis at every recorded time.

    ``window`` restricts the check to nodes with ``|x_k| <= window``.
    """
    run = solve(spec, cfg, keep_snapshots=True)
    grid = spec.grid
    x = grid.coordinates()
    inner = _interior(grid)
    sel = np.ones(tuple(c - 2 for c in grid.counts), dtype=bool)
    if window is not None:
        sel = np.all(np.abs(x[inner]) <= window, axis=-1)
    worst = None
    for snap in run.snapshots:
        u = snap.values
        for k in range(grid.n):
            plus = list(inner)
            minus = list(inner)
            plus[k] = slice(2, None)
            minus[k] = slice(None, -2)
            defect = 0.5 * (u[tuple(plus)] + u[tuple(minus)]) - u[inner]
            worst = _worst(np.where(sel, np.maximum(defect, 0.0), 0.0), worst, snap.time)
    return ComparisonReport(worst[0], (worst[1], worst[2]), tol, "concavity", f"p={cfg.params.p}")


def check_gradient_growth(run: RunResult, rel: float = 0.05) -> ComparisonReport:
    """Soft check: sup |Du| never exceeds its initial value by more than ``rel``."""
    g = run.sup_gradient_trace.values
    excess = float(np.max(g) / g[0] - 1.0) if g[0] > 0 else 0.0
    rep = ComparisonReport(max(0.0, excess), None, rel, "gradient_growth", "soft")
    if not rep.passed:
        log.warning("sup |Du| grew by %.3g relative to t=0 (soft check)", excess)
    return rep


@dataclass(frozen=True)
class GpProblem:
    """Refinement study seeded with the self-similar solution at ``t0``.

    Grids are cell-centred about the origin (``staggered``), so no node sits
    on the line where ``DG_p`` vanishes.
    """

    p: float
    n: int = 2
    half_width: float = 6.0
    t0: float = 1.0
    t_end: float = 1.25
    eps: float = 1e-8
    safety: float = 0.9
    staggered: bool = True

    def grid_for(self, h: float) -> Grid:
        pad = 0.5 * h if self.staggered else 0.0
        return Grid.from_spacing(-self.half_width - pad, self.half_width + pad, h, self.n)

    def spec_for(self, h: float) -> ProblemSpec:
        grid = self.grid_for(h)
        return ProblemSpec.dirichlet(grid, gp_field(grid, self.t0, self.p))

    def config(self) -> SolverConfig:
        return SolverConfig(PdeParams(self.p, self.eps), self.t_end, record_every=10**9, safety=self.safety)

    def window(self, grid: Grid) -> np.ndarray:
        return np.all(np.abs(grid.coordinates()) <= 0.5 * self.half_width, axis=-1)

    def solve(self, h: float) -> RunResult:
        return solve(self.spec_for(h), self.config())

    def error(self, h: float) -> float:
        """Sup error on the inner half-box against the closed form at ``t_end``."""
        run = self.solve(h)
        grid = run.final.grid
        ref = gp_exact(grid.coordinates(), run.final.time, SelfSimilarParams(self.p, self.n))
        return float(np.max(np.abs(run.final.values - ref)[self.window(grid)]))


def estimate_order(problem: GpProblem, h_list: Sequence[float]) -> OrderReport:
    h_list = [float(h) for h in h_list]
    return OrderReport(h_list, [problem.error(h) for h in h_list])


def operator_residual(p: float, h: float, half_width: float = 6.0, t: float = 1.0,
                      r_min: float = 0.5, eps: float = 1e-10, n: int = 2) -> float:
    """Sup of ``operator(G_p) - d/dt G_p`` over interior nodes with ``|x| >= r_min``."""
    grid = Grid.from_spacing(-half_width, half_width, h, n)
    x = grid.coordinates()
    a = operator_field(gp_field(grid, t, p).values, grid, PdeParams(p, eps))
    exact = gp_time_derivative(x, t, SelfSimilarParams(p, n))
    sel = (np.sqrt(np.sum(x * x, axis=-1)) >= r_min) & ~grid.boundary_mask()
    return float(np.max(np.abs(a - exact)[sel]))


def estimate_residual_order(p: float, h_list: Sequence[float], **kw) -> OrderReport:
    h_list = [float(h) for h in h_list]
    return OrderReport(h_list, [operator_residual(p, h, **kw) for h in h_list])


def binade_pair(spec: ProblemSpec, shift: float = 0.5) -> tuple[ProblemSpec, ProblemSpec]:
    """Affinely map the data into ``[1.125, 1.375]`` and pair it with a copy raised by ``shift``.

    Doubles in ``[1, 2)`` are evenly spaced and ``shift = 0.5`` is an even
    multiple of that spacing. Both members keep a margin of ``0.125`` to the
    binade edges, so small over- and undershoots stay inside it. Neighbour differences and the Euler update
    then round identically for both members of the pair, so additive
    invariance can be checked for exact equality.
    """
    g = spec.initial.values
    lo, span = float(np.min(g)), osc(g)
    k = 0.25 / span if span > 0.0 else 0.0
    base = ProblemSpec(
        spec.kind, spec.grid, spec.initial.with_values(1.125 + k * (g - lo)),
        1.125 + k * (spec.boundary - lo),
    )
    return base, base.shifted(shift)


def standard_suite(
    spec: ProblemSpec, cfg: SolverConfig, probes: np.ndarray | None = None, rel_tol: float = 1e-6
) -> list[ComparisonReport]:
    """Comparison, contraction, shift, maximum-principle and barrier checks for one problem.

    The ordered partner of ``g`` is ``g`` plus a half-height bump centred
    half a unit along the first axis. Infinite-speed probes are checked
    when ``probes`` is given.
    """
    grid = spec.grid
    x = grid.coordinates()
    offset = np.zeros(grid.n)
    offset[0] = 0.5
    upper = spec.with_initial(spec.initial.values + 0.5 * bump(x, center=offset))
    reports = []

    def named(rep, check, params=None):
        rep.check = check
        rep.parameters = params or f"p={cfg.params.p} eps={cfg.params.eps}"
        return rep

    reports.append(named(check_comparison(spec, upper, cfg, rel_tol), "comparison_ordered"))
    same = check_comparison(spec, spec, cfg, rel_tol)
    same.tolerance = 0.0
    reports.append(named(same, "comparison_identical"))
    low, high = binade_pair(spec)
    shift = check_comparison(low, high, cfg, rel_tol)
    shift.tolerance = 0.0
    reports.append(named(shift, "comparison_shift"))
    reports.append(named(contraction_report(spec, upper, cfg, rel_tol), "contraction_distinct"))
    sc = contraction_report(low, high, cfg, rel_tol)
    sc.tolerance = 0.0
    reports.append(named(sc, "contraction_shift"))
    reports.append(named(check_max_principle(spec, cfg, rel_tol), "max_principle"))
    if spec.kind == CAUCHY:
        reports.append(tychonoff_report(spec, cfg, rel_tol))
    if probes is not None:
        reports.append(named(check_infinite_speed(spec, cfg, probes), "infinite_speed",
                             f"p={cfg.params.p} t={cfg.t_end}"))
    return reports


def minimal_barrier(spec: ProblemSpec, T: float, eps_t: float, p: float, y=None, margin: float = 1.01):
    """Barrier centred at ``y`` with ``K`` the far field and the smallest ``mu`` dominating ``g``, times ``margin``."""
    grid = spec.grid
    y = np.zeros(grid.n) if y is None else np.asarray(y, dtype=float)
    K = float(spec.boundary) if spec.kind == CAUCHY else float(np.max(spec.boundary_values))
    unit = tychonoff_barrier(grid.coordinates(), spec.initial.time, y, 0.0, 1.0, T, eps_t, p)
    mu = margin * max(0.0, float(np.max((spec.initial.values - K) / unit)))
    return TychonoffBarrier(tuple(y), K, mu, T, eps_t, p)


def tychonoff_report(spec: ProblemSpec, cfg: SolverConfig, rel_tol: float = 1e-6, eps_t: float = 0.05):
    barrier = minimal_barrier(spec, cfg.t_end, eps_t, cfg.params.p)
    rep = check_tychonoff_domination(spec, cfg, barrier, rel_tol)
    rep.check = "tychonoff"
    return rep


def write_reports_csv(reports: Iterable[ComparisonReport], path, comments=()) -> None:
    with open(path, "w", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["check", "parameter-set", "violation", "tolerance", "passed"])
        for r in reports:
            w.writerow([r.check, r.parameters, f"{r.max_violation:.17g}", f"{r.tolerance:.17g}", str(r.passed).lower()])
