"""Batch driver: ``pflow <experiment> --config <path> --out <dir> [--set key=value ...]``.

Config files are plain ``key = value`` lines; ``#`` starts a comment.
``--set`` overrides take precedence over the file. Every emitted file
starts with a ``# pflow manifest <hash>`` line, and identical manifests
produce byte-identical outputs.

Keys and defaults
-----------------
experiment     solve | verify | sweep-p | steady | energy-suite | order-study
datum          bump | cone | saddle | gp | concave          (bump)
kind           cauchy | dirichlet    (dirichlet for steady, saddle and gp)
n              1 or 2                                        (2)
lo, hi         box corners, scalar or comma list             (-4, 4; -6, 6 for order-study)
counts         nodes per axis, scalar or comma list          (161)
p              exponent, >= 1                                (3)
eps            regularization, > 0                           (1e-2)
dt             time step, <= CFL bound; empty means CFL      (empty)
t_end          absolute end time                             (0.1; 1.25 for order-study)
record_every   steps between samples                         (10)
safety         CFL safety factor in (0, 1]                   (0.9)
p_list         strictly decreasing exponents > 1             (1.5, 1.25, 1.1, 1.05)
h_list         grid spacings for order-study                 (0.1, 0.05)
tol            steady-state residual tolerance               (1e-9)
struwe_T       weighted-energy blow-up time                  (2)
r0             cone radius                                   (1)

order-study compares against the unregularized closed form, so it runs
with its own eps (1e-8 for the solve, 1e-10 for the residual).
"""
from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import datums
from .energy import (
    EnergyTrace,
    dissipation_rate,
    p_energy_monitor,
    regularized_energy,
    regularized_monitor,
    struwe_I,
    struwe_monitor,
)
from .errors import ConfigError, PflowError
from .exact import shrinking_sphere_radius
from .grid import Grid, ScalarField, write_snapshot
from .operator import PdeParams, cfl_dt
from .solver import (
    ProblemSpec,
    SolverConfig,
    extract_zero_level_radius,
    p_laplace_relax,
    solve,
    steady_run,
    step_explicit,
    sweep_p,
)
from .verify import (
    ComparisonReport,
    GpProblem,
    estimate_order,
    estimate_residual_order,
    standard_suite,
    write_reports_csv,
)

EXPERIMENTS = ("solve", "verify", "sweep-p", "steady", "energy-suite", "order-study")
DATUM_NAMES = ("bump", "cone", "saddle", "gp", "concave")
KIND_NAMES = ("cauchy", "dirichlet")


@dataclass(frozen=True)
class RunManifest:
    experiment: str
    datum: str = "bump"
    kind: str = "cauchy"
    n: int = 2
    lo: tuple = (-4.0, -4.0)
    hi: tuple = (4.0, 4.0)
    counts: tuple = (161, 161)
    p: float = 3.0
    eps: float = 1e-2
    dt: float | None = None
    t_end: float = 0.1
    record_every: int = 10
    safety: float = 0.9
    p_list: tuple = (1.5, 1.25, 1.1, 1.05)
    h_list: tuple = (0.1, 0.05)
    tol: float = 1e-9
    struwe_T: float = 2.0
    r0: float = 1.0

    @property
    def grid(self) -> Grid:
        return Grid(self.lo, self.hi, self.counts)

    @property
    def params(self) -> PdeParams:
        return PdeParams(self.p, self.eps)

    def solver_config(self, p: float | None = None) -> SolverConfig:
        params = self.params if p is None else PdeParams(p, self.eps)
        return SolverConfig(params, self.t_end, self.dt, self.record_every, self.safety)

    def datum_function(self):
        if self.datum == "cone":
            return lambda x: datums.cone(x, self.r0)
        if self.datum == "gp":
            return lambda x: datums.gp_initial(x, self.p, 1.0)
        return datums.DATUMS[self.datum]

    def problem(self) -> ProblemSpec:
        grid = self.grid
        if self.kind == "cauchy":
            return ProblemSpec.cauchy(grid, self.datum_function())
        return ProblemSpec.dirichlet(grid, self.datum_function())

    def canonical(self) -> str:
        return "\n".join(f"{f.name}={getattr(self, f.name)!r}" for f in fields(self))

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


_FLOAT = ("p", "eps", "t_end", "safety", "tol", "struwe_T", "r0")
_INT = ("n", "record_every")
_VECTOR = ("lo", "hi", "counts")
_LIST = ("p_list", "h_list")
_CHOICE = {"experiment": EXPERIMENTS, "datum": DATUM_NAMES, "kind": KIND_NAMES}
KEYS = _FLOAT + _INT + _VECTOR + _LIST + tuple(_CHOICE) + ("dt",)


def _number(value: str, cast, key, line):
    try:
        return cast(value)
    except ValueError:
        raise ConfigError(f"{key}: malformed number {value!r}", line) from None


def _split(value: str):
    return [v.strip() for v in value.split(",") if v.strip()]


def _parse_lines(text: str, origin_line: bool = True):
    entries = []
    for number, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected key=value, got {body!r}", number if origin_line else None)
        key, value = (s.strip() for s in body.split("=", 1))
        entries.append((key, value, number if origin_line else None))
    return entries


def parse_config(text: str, overrides=(), experiment: str | None = None) -> RunManifest:
    """Build a validated manifest from a config document and ``key=value`` overrides.

    ``experiment`` (the command-line subcommand) must agree with an
    ``experiment`` key in the document if both are present.
    """
    entries = _parse_lines(text)
    for item in overrides:
        entries.extend(_parse_lines(item, origin_line=False))
    raw: dict[str, tuple[str, int | None]] = {}
    seen_in_file = set()
    for key, value, line in entries:
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", line)
        if line is not None:
            if key in seen_in_file:
                raise ConfigError(f"duplicate key {key!r}", line)
            seen_in_file.add(key)
        raw[key] = (value, line)

    if "experiment" in raw and experiment is not None and raw["experiment"][0] != experiment:
        value, line = raw["experiment"]
        raise ConfigError(f"config names experiment {value!r} but {experiment!r} was requested", line)
    exp = experiment if experiment is not None else raw.get("experiment", (None, None))[0]
    if exp is None:
        raise ConfigError("no experiment given")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {exp!r}", raw.get("experiment", ("", None))[1])

    def line_of(key):
        return raw.get(key, ("", None))[1]

    values: dict = {}
    for key, (value, line) in raw.items():
        if key == "experiment":
            continue
        if key in _CHOICE:
            if value not in _CHOICE[key]:
                raise ConfigError(f"{key} must be one of {_CHOICE[key]}, got {value!r}", line)
            values[key] = value
        elif key in _FLOAT:
            values[key] = _number(value, float, key, line)
        elif key in _INT:
            values[key] = _number(value, int, key, line)
        elif key == "dt":
            values[key] = None if value in ("", "none", "cfl") else _number(value, float, key, line)
        elif key in _LIST:
            values[key] = tuple(_number(v, float, key, line) for v in _split(value))
        else:
            cast = int if key == "counts" else float
            values[key] = tuple(_number(v, cast, key, line) for v in _split(value))

    n = values.get("n", 2)
    if n not in (1, 2):
        raise ConfigError(f"n must be 1 or 2, got {n}", line_of("n"))
    half = 6.0 if exp == "order-study" else 4.0
    for key, default in (("lo", -half), ("hi", half), ("counts", 161)):
        vec = values.get(key, (default,))
        if len(vec) == 1:
            vec = vec * n
        if len(vec) != n:
            raise ConfigError(f"{key} needs 1 or {n} entries, got {len(vec)}", line_of(key))
        values[key] = vec
    if "kind" not in values:
        values["kind"] = "dirichlet" if exp == "steady" or values.get("datum") in ("saddle", "gp") else "cauchy"
    if "t_end" not in values and exp == "order-study":
        values["t_end"] = 1.25
    manifest = RunManifest(experiment=exp, n=n, **{k: v for k, v in values.items() if k != "n"})
    _validate(manifest, line_of)
    return manifest


def _validate(m: RunManifest, line_of) -> None:
    def check(ok, key, message):
        if not ok:
            raise ConfigError(f"{key}: {message}", line_of(key))

    check(m.p >= 1.0, "p", f"p >= 1 required, got {m.p}")
    check(m.eps > 0.0, "eps", f"eps must be positive, got {m.eps}")
    check(0.0 < m.safety <= 1.0, "safety", f"safety must lie in (0, 1], got {m.safety}")
    check(m.record_every >= 1, "record_every", "record_every must be >= 1")
    check(np.isfinite(m.t_end) and m.t_end >= 0.0, "t_end", f"t_end must be finite and >= 0, got {m.t_end}")
    check(m.tol > 0.0, "tol", "tol must be positive")
    check(m.r0 > 0.0, "r0", "r0 must be positive")
    check(all(c >= 3 for c in m.counts), "counts", "at least 3 nodes per axis")
    check(all(b > a for a, b in zip(m.lo, m.hi)), "hi", "hi must exceed lo on every axis")
    check(m.dt is None or m.dt > 0.0, "dt", "dt must be positive")
    if m.dt is not None:
        limit = cfl_dt(m.grid, m.params, 1.0)
        check(m.dt <= limit * (1.0 + 1e-12), "dt", f"dt = {m.dt} exceeds the CFL bound {limit:.6g}")
    check(m.kind == "dirichlet" or m.experiment != "steady", "kind", "steady runs need kind = dirichlet")
    check(not (m.datum == "gp" and m.p <= 1.0), "p", "the gp datum needs p > 1")
    try:
        m.problem()
    except PflowError as exc:
        raise ConfigError(f"problem setup: {exc}", line_of("kind") or line_of("datum")) from exc
    if m.experiment == "sweep-p":
        ps = m.p_list
        check(len(ps) >= 1 and all(p > 1.0 for p in ps), "p_list", "every p must exceed 1")
        check(all(b < a for a, b in zip(ps, ps[1:])), "p_list", "p_list must be strictly decreasing")
    if m.experiment == "order-study":
        check(len(m.h_list) >= 2 and all(h > 0.0 for h in m.h_list), "h_list", "need >= 2 positive spacings")
        check(m.p > 1.0, "p", "order-study needs p > 1")
        check(m.t_end > 1.0, "t_end", "order-study starts from G_p at t = 1, so t_end must exceed 1")
    if m.experiment == "energy-suite":
        check(m.struwe_T > m.t_end, "struwe_T", "struwe_T must exceed t_end")


# ---------------------------------------------------------------- experiments


class _Output:
    def __init__(self, manifest: RunManifest, out: Path):
        self.manifest = manifest
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.header = [f"pflow manifest {manifest.digest}", f"experiment {manifest.experiment}"]

    def snapshot(self, name: str, f: ScalarField) -> None:
        write_snapshot(f, self.out / name, self.header)

    def trace(self, name: str, trace: EnergyTrace) -> None:
        trace.write_csv(self.out / name, self.header)

    def reports(self, reports) -> int:
        write_reports_csv(reports, self.out / "report.csv", self.header)
        for r in reports:
            print(r.summary())
        return 0 if all(r.passed for r in reports) else 1

    def table(self, name: str, columns, rows) -> None:
        lines = ["# " + c for c in self.header] + [",".join(columns)]
        for row in rows:
            lines.append(",".join(v if isinstance(v, str) else f"{v:.17g}" for v in row))
        (self.out / name).write_text("\n".join(lines) + "\n")


def _monotone_report(trace: EnergyTrace, rel: float, check: str, increasing: bool = False) -> ComparisonReport:
    v = trace.values
    steps = (v[:-1] - v[1:]) if increasing else (v[1:] - v[:-1])
    scale = np.where(v[:-1] > 0.0, np.abs(v[:-1]), 1.0)
    excess = float(max(0.0, np.max(steps / scale))) if v.size > 1 else 0.0
    return ComparisonReport(excess, None, rel, check, trace.name)


def _inner_half(grid: Grid) -> np.ndarray:
    x = grid.coordinates()
    center = 0.5 * (np.array(grid.lo) + np.array(grid.hi))
    half = 0.25 * (np.array(grid.hi) - np.array(grid.lo))
    return np.all(np.abs(x - center) <= half, axis=-1)


def _run_solve(m: RunManifest, o: _Output) -> int:
    spec = m.problem()
    o.snapshot("initial.snap", spec.initial)
    if m.t_end <= spec.initial.time:
        print(f"solve: t_end = {m.t_end}, initial snapshot only")
        return 0
    mons = [regularized_monitor(m.params), p_energy_monitor(m.p)]
    run = solve(spec, m.solver_config(), mons)
    o.snapshot("final.snap", run.final)
    for name, trace in run.traces.items():
        o.trace(f"{name}.csv", trace)
    o.trace("sup_gradient.csv", run.sup_gradient_trace)
    print(f"solve: t = {run.final.time:.6g} after {run.step_count} steps, "
          f"max u = {np.max(run.final.values):.6g}, min u = {np.min(run.final.values):.6g}")
    return 0


def _probes(m: RunManifest, spec: ProblemSpec):
    """Axis probes two support radii beyond the unit bump support, if they lie inside."""
    if m.datum != "bump":
        return None
    grid = spec.grid
    pts = []
    for k in range(grid.n):
        for s in (-1.0, 1.0):
            x = np.zeros(grid.n)
            x[k] = 3.0 * s
            pts.append(x)
    pts = np.array(pts)
    lo, hi = np.array(grid.lo), np.array(grid.hi)
    if np.any(pts <= lo) or np.any(pts >= hi):
        return None
    return pts


def _run_verify(m: RunManifest, o: _Output) -> int:
    spec = m.problem()
    return o.reports(standard_suite(spec, m.solver_config(), _probes(m, spec)))


def _run_sweep(m: RunManifest, o: _Output) -> int:
    spec = m.problem()
    runs = sweep_p(spec, m.p_list, m.eps, m.t_end, m.record_every, m.safety)
    window = _inner_half(spec.grid)
    rows, diffs = [], []
    prev = None
    for p, run in runs.items():
        o.snapshot(f"final_p{p:g}.snap", run.final)
        d = float("nan") if prev is None else float(np.max(np.abs(run.final.values - prev)[window]))
        prev = run.final.values
        if np.isfinite(d):
            diffs.append(d)
        radius = float("nan")
        if m.datum == "cone" and m.n == 2:
            radius = extract_zero_level_radius(run.final)
        rows.append((p, d, radius))
    o.table("sweep.csv", ("p", "sup_diff_previous", "zero_level_radius"), rows)
    reports = []
    if len(diffs) >= 2:
        growth = max(b - a for a, b in zip(diffs, diffs[1:]))
        reports.append(ComparisonReport(max(0.0, growth), None, 0.0, "sweep_differences_decrease", f"p={m.p_list}"))
    if m.datum == "cone" and m.n == 2:
        target = shrinking_sphere_radius(m.r0, m.t_end, 2)
        rel = abs(rows[-1][2] - target) / target
        reports.append(ComparisonReport(rel, None, 0.05, "zero_level_radius", f"p={m.p_list[-1]} t={m.t_end}"))
    return o.reports(reports)


def _run_steady(m: RunManifest, o: _Output) -> int:
    spec = m.problem()
    cfg = m.solver_config()
    run = steady_run(spec, cfg, m.tol, [regularized_monitor(m.params)])
    relaxed = p_laplace_relax(spec, m.params, m.tol)
    o.snapshot("steady.snap", run.final)
    o.snapshot("relaxed.snap", relaxed)
    trace = run.traces["regularized_energy"]
    o.trace("regularized_energy.csv", trace)
    diff = float(np.max(np.abs(run.final.values - relaxed.values)))
    reports = [
        ComparisonReport(diff, None, 1e-4, "steady_vs_relaxation", f"p={m.p} eps={m.eps}"),
        _monotone_report(trace, 1e-8, "energy_non_increasing"),
    ]
    return o.reports(reports)


def _run_energy(m: RunManifest, o: _Output) -> int:
    spec = m.problem()
    x0 = np.zeros(m.n)
    mons = [regularized_monitor(m.params), p_energy_monitor(m.p), struwe_monitor(x0, m.struwe_T, m.p)]
    cfg = m.solver_config()
    run = solve(spec, cfg, mons)
    reports = []
    for name, rel in (("regularized_energy", 1e-8), ("p_energy", 1e-6), ("struwe", 1e-6)):
        o.trace(f"{name}.csv", run.traces[name])
        reports.append(_monotone_report(run.traces[name], rel, f"{name}_non_increasing"))
    i_trace = EnergyTrace("struwe_I", list(struwe_I(run, m.struwe_T)))
    o.trace("struwe_I.csv", i_trace)
    reports.append(_monotone_report(i_trace, 1e-6, "struwe_I_non_decreasing", increasing=True))
    # dissipation identity at the final state, dt = CFL / 4
    f = run.final
    quarter = SolverConfig(m.params, 1.0, cfl_dt(spec.grid, m.params, 1.0) / 4.0)
    f2 = step_explicit(f, spec.with_initial(f.values), quarter)
    rate = dissipation_rate(f, m.params)
    decrement = (regularized_energy(f2, m.params) - regularized_energy(f, m.params)) / (f2.time - f.time)
    mismatch = abs(decrement - rate) / abs(rate) if rate != 0.0 else 0.0
    reports.append(ComparisonReport(mismatch, None, 0.1, "dissipation_identity", "dt=cfl/4"))
    return o.reports(reports)


def _run_order(m: RunManifest, o: _Output) -> int:
    half = float(min(min(-a for a in m.lo), min(m.hi)))
    problem = GpProblem(m.p, m.n, half_width=half, t_end=m.t_end, safety=m.safety)
    hs = sorted(m.h_list, reverse=True)
    forward = estimate_order(problem, hs)
    residual = estimate_residual_order(m.p, hs, half_width=half, n=m.n)
    rows = [(h, e, r) for h, e, r in zip(forward.h, forward.errors, residual.errors)]
    o.table("order.csv", ("h", "solve_error", "residual_error"), rows)
    reports = [
        ComparisonReport(max(0.0, 1.8 - forward.observed_order), None, 0.0, "solve_order",
                         f"p={m.p} order={forward.observed_order:.4f}"),
        ComparisonReport(max(0.0, 1.8 - residual.observed_order), None, 0.0, "residual_order",
                         f"p={m.p} order={residual.observed_order:.4f}"),
    ]
    return o.reports(reports)


_RUNNERS = {
    "solve": _run_solve,
    "verify": _run_verify,
    "sweep-p": _run_sweep,
    "steady": _run_steady,
    "energy-suite": _run_energy,
    "order-study": _run_order,
}


def run(manifest: RunManifest, out) -> int:
    """Execute the manifest's experiment, writing into ``out``; returns the exit status."""
    return _RUNNERS[manifest.experiment](manifest, _Output(manifest, Path(out)))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pflow", description=__doc__.splitlines()[0],
        epilog=__doc__[__doc__.index("Keys and defaults"):],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", type=Path, help="key=value config file")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    args = parser.parse_args(argv)
    text = args.config.read_text() if args.config is not None else ""
    try:
        manifest = parse_config(text, args.overrides, experiment=args.experiment)
    except ConfigError as exc:
        print(f"pflow: config error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(manifest, args.out)
    except PflowError as exc:
        print(f"pflow: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
