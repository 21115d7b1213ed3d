import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pflow.datums import bump, cone, saddle
from pflow.energy import regularized_energy, regularized_monitor
from pflow.errors import ConfigError, ConvergenceError, InstabilityError, PreconditionError
from pflow.exact import SelfSimilarParams, gp_exact, gp_field, heat_convolution
from pflow.grid import Grid, ScalarField
from pflow.operator import PdeParams, cfl_dt
from pflow.solver import (
    ProblemSpec,
    SolverConfig,
    extract_zero_level_radius,
    p_laplace_relax,
    solve,
    solve_to_steady,
    steady_run,
    step_explicit,
    sweep_p,
)

SQUARE = Grid.square(-1.0, 1.0, 21)


def test_problem_spec_validation():
    g = Grid.square(-1.0, 1.0, 9)
    with pytest.raises(PreconditionError):
        ProblemSpec.cauchy(g, lambda x: x[..., 0])
    with pytest.raises(PreconditionError):
        ProblemSpec("neumann", g, ScalarField(g, np.zeros(g.counts)), 0.0)
    bad = np.zeros(g.counts)
    bad[0, 0] = 1.0
    with pytest.raises(PreconditionError):
        ProblemSpec("cauchy-dirichlet", g, ScalarField(g, np.zeros(g.counts)), bad)
    spec = ProblemSpec.cauchy(g, lambda x: 2.0 + 0 * x[..., 0])
    assert spec.boundary == 2.0


def test_config_rejects_dt_above_cfl_at_construction():
    g = Grid.from_spacing(-1.0, 1.0, 0.05)
    limit = cfl_dt(g, PdeParams(2.0), 1.0)
    with pytest.raises(ConfigError):
        SolverConfig(PdeParams(2.0), 1.0, dt=1.0, grid=g)
    SolverConfig(PdeParams(2.0), 1.0, dt=limit, grid=g)
    loose = SolverConfig(PdeParams(2.0), 1.0, dt=1.0)
    with pytest.raises(ConfigError):
        loose.time_step(g)
    for kw in ({"t_end": -1.0}, {"t_end": 1.0, "dt": -1e-3}, {"t_end": 1.0, "record_every": 0},
               {"t_end": 1.0, "safety": 1.5}):
        with pytest.raises(ConfigError):
            SolverConfig(PdeParams(2.0), **kw)


def test_affine_step_changes_only_time():
    # dyadic spacing and coefficients make every difference exact
    g = Grid.square(0.0, 1.0, 9)
    spec = ProblemSpec.dirichlet(g, lambda x: 1.0 + 2.0 * x[..., 0] - 0.75 * x[..., 1])
    cfg = SolverConfig(PdeParams(1.5), 1.0)
    out = step_explicit(spec.initial, spec, cfg)
    assert np.array_equal(out.values, spec.initial.values)
    assert out.time == cfg.time_step(g)
    generic = ProblemSpec.dirichlet(SQUARE, lambda x: 0.3 + np.pi * x[..., 0] - np.e * x[..., 1])
    out = step_explicit(generic.initial, generic, cfg)
    assert np.max(np.abs(out.values - generic.initial.values)) <= 1e-12


@pytest.mark.parametrize("p", [1.0, 1.5, 3.0])
def test_constant_preserved_bitwise(p):
    spec = ProblemSpec.cauchy(SQUARE, lambda x: 0.0 * x[..., 0] + 0.123456789)
    run = solve(spec, SolverConfig(PdeParams(p), 0.2))
    assert np.all(run.final.values == 0.123456789)


def test_one_step_against_gp_closed_form():
    # cell-centred nodes avoid x = 0, where the regularized coefficients are the identity
    p = 3.0
    ratios = []
    for h in (0.2, 0.1):
        g = Grid.from_spacing(-6.0 - h / 2, 6.0 + h / 2, h)
        spec = ProblemSpec.dirichlet(g, gp_field(g, 1.0, p).values, time=1.0)
        cfg = SolverConfig(PdeParams(p, 1e-8), 2.0, safety=1.0)
        dt = cfg.time_step(g)
        out = step_explicit(spec.initial, spec, cfg)
        ref = gp_exact(g.coordinates(), 1.0 + dt, SelfSimilarParams(p))
        # boundary nodes hold frozen data; the bound concerns computed nodes
        dev = float(np.max(np.abs(out.values - ref)[~g.boundary_mask()]))
        ratios.append(dev / (dt * dt + dt * h * h))
    assert max(ratios) <= 1.0
    assert ratios[1] <= 2.0 * ratios[0]


def test_zero_horizon_returns_initial():
    spec = ProblemSpec.cauchy(SQUARE, bump)
    run = solve(spec, SolverConfig(PdeParams(2.0), 0.0), [regularized_monitor(PdeParams(2.0))])
    assert np.array_equal(run.final.values, spec.initial.values)
    assert run.step_count == 0
    assert len(run.traces["regularized_energy"]) == 1


def test_heat_case_matches_convolution_oracle():
    g = Grid.from_spacing(-6.0, 6.0, 0.05)
    spec = ProblemSpec.cauchy(g, bump)
    run = solve(spec, SolverConfig(PdeParams(2.0), 0.5))
    ref = heat_convolution(spec.initial, 0.5)
    inner = np.all(np.abs(g.coordinates()) <= 4.0, axis=-1)
    rel = np.max(np.abs(run.final.values - ref.values)[inner]) / np.max(np.abs(ref.values[inner]))
    assert rel <= 0.02


def test_empty_monitors():
    run = solve(ProblemSpec.cauchy(SQUARE, bump), SolverConfig(PdeParams(2.0), 0.01))
    assert run.traces == {}
    assert run.final.time == 0.01


def test_record_schedule_and_exact_end_time():
    spec = ProblemSpec.cauchy(SQUARE, bump)
    cfg = SolverConfig(PdeParams(2.0), 0.1, record_every=7)
    run = solve(spec, cfg, [regularized_monitor(cfg.params)])
    t = run.traces["regularized_energy"].times
    assert t[0] == 0.0 and t[-1] == 0.1
    assert np.all(np.diff(t) > 0)
    assert len(t) == run.step_count // 7 + 1 + (run.step_count % 7 != 0)


def test_solve_is_deterministic():
    spec = ProblemSpec.cauchy(SQUARE, bump)
    cfg = SolverConfig(PdeParams(1.7, 0.05), 0.05)
    a, b = solve(spec, cfg), solve(spec, cfg)
    assert np.array_equal(a.final.values, b.final.values)


@given(st.floats(-50.0, 50.0), st.sampled_from([1.2, 2.0, 3.5]))
def test_additive_invariance(c, p):
    spec = ProblemSpec.cauchy(SQUARE, bump)
    cfg = SolverConfig(PdeParams(p), 0.02)
    base = solve(spec, cfg).final.values
    shifted = solve(spec.shifted(c), cfg).final.values
    assert np.max(np.abs(shifted - c - base)) <= 1e-12 * max(1.0, abs(c))


def test_additive_invariance_exact_within_binade():
    spec = ProblemSpec.cauchy(SQUARE, lambda x: 1.0 + 0.25 * bump(x))
    cfg = SolverConfig(PdeParams(3.0), 0.05)
    base = solve(spec, cfg).final.values
    assert np.all(solve(spec.shifted(0.5), cfg).final.values - base == 0.5)


@given(st.integers(0, 2**31), st.sampled_from([1.0, 1.5, 2.0, 4.0]))
def test_sup_bound_for_p2_random_dirichlet_data(seed, p):
    r = np.random.default_rng(seed)
    g = Grid.square(0.0, 1.0, 12)
    data = r.standard_normal(g.counts)
    spec = ProblemSpec.dirichlet(g, data)
    run = solve(spec, SolverConfig(PdeParams(2.0, 0.1), 0.01))
    # p = 2 is a convex combination under CFL, hence exactly bounded
    assert run.final.values.max() <= data.max()
    assert run.final.values.min() >= data.min()


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_sup_bound_smooth_data(p):
    g = Grid.from_spacing(-3.0, 3.0, 0.05)
    spec = ProblemSpec.cauchy(g, bump)
    run = solve(spec, SolverConfig(PdeParams(p), 0.1), keep_snapshots=True)
    for snap in run.snapshots:
        assert snap.values.max() <= 1.0 + 1e-6
        assert snap.values.min() >= -1e-6


def test_instability_detected():
    g = Grid.square(0.0, 1.0, 6, n=1)
    data = np.array([0.0, 1e308, -1e308, 1e308, -1e308, 0.0])
    spec = ProblemSpec.dirichlet(g, data)
    with pytest.raises(InstabilityError):
        step_explicit(spec.initial, spec, SolverConfig(PdeParams(2.0), 1.0))


def test_steady_returns_immediately_for_affine():
    g = Grid.square(0.0, 1.0, 9)
    spec = ProblemSpec.dirichlet(g, lambda x: 0.5 + x[..., 0] - 0.25 * x[..., 1])
    run = steady_run(spec, SolverConfig(PdeParams(1.5), 0.0), 1e-10)
    assert run.step_count == 0


def test_steady_of_linear_data():
    spec = ProblemSpec.dirichlet(SQUARE, lambda x: x[..., 0])
    out = solve_to_steady(spec, SolverConfig(PdeParams(1.5), 0.0), 1e-12)
    assert np.max(np.abs(out.values - SQUARE.coordinates()[..., 0])) <= 1e-10


def test_steady_requires_dirichlet():
    with pytest.raises(PreconditionError):
        steady_run(ProblemSpec.cauchy(SQUARE, bump), SolverConfig(PdeParams(2.0), 0.0), 1e-6)


def test_steady_step_cap():
    spec = ProblemSpec.dirichlet(SQUARE, saddle)
    with pytest.raises(ConvergenceError):
        steady_run(spec, SolverConfig(PdeParams(1.5), 0.0), 1e-12, max_steps=5)


def test_relaxation_harmonic_case():
    spec = ProblemSpec.dirichlet(SQUARE, lambda x: x[..., 0])
    start = spec.with_initial(np.where(SQUARE.boundary_mask(), spec.initial.values, 0.0))
    v = p_laplace_relax(start, PdeParams(2.0), 1e-12)
    assert np.max(np.abs(v.values - SQUARE.coordinates()[..., 0])) <= 1e-10


@pytest.mark.parametrize("p,eps", [(1.2, 1e-2), (1.5, 1e-3), (3.0, 0.1), (5.0, 1e-2)])
def test_relaxation_1d_is_affine(p, eps):
    g = Grid.square(0.0, 2.0, 41, n=1)
    a, b = -0.7, 1.9
    init = np.zeros(41)
    init[0], init[-1] = a, b
    v = p_laplace_relax(ProblemSpec.dirichlet(g, init), PdeParams(p, eps), 1e-12)
    x = g.axis(0)
    assert np.max(np.abs(v.values - (a + (b - a) * x / 2.0))) <= 1e-10


def test_relaxation_minimizes_regularized_energy(rng):
    g = Grid.square(-1.0, 1.0, 31)
    params = PdeParams(3.0, 1e-2)
    spec = ProblemSpec.dirichlet(g, saddle)
    v = p_laplace_relax(spec, params, 1e-11)
    e0 = regularized_energy(v, params)
    inner = ~g.boundary_mask()
    for _ in range(20):
        bumpy = np.zeros(g.counts)
        bumpy[inner] = 1e-2 * rng.standard_normal(inner.sum())
        assert e0 <= regularized_energy(v.with_values(v.values + bumpy), params)


def test_relaxation_iteration_cap():
    with pytest.raises(ConvergenceError) as info:
        p_laplace_relax(ProblemSpec.dirichlet(SQUARE, saddle), PdeParams(1.5), 1e-14, max_sweeps=20)
    assert len(info.value.history) == 2


def test_sweep_single_p_equals_solve():
    spec = ProblemSpec.cauchy(SQUARE, bump)
    runs = sweep_p(spec, [1.5], 1e-2, 0.05)
    single = solve(spec, SolverConfig(PdeParams(1.5, 1e-2), 0.05))
    assert np.array_equal(runs[1.5].final.values, single.final.values)


def test_sweep_validation():
    spec = ProblemSpec.cauchy(SQUARE, bump)
    for bad in ([], [1.5, 1.5], [1.2, 1.5], [1.5, 1.0]):
        with pytest.raises(ValueError):
            sweep_p(spec, bad, 1e-2, 0.01)


@pytest.mark.parametrize("r", [1.0, 2.0])
def test_zero_level_radius(r):
    g = Grid.from_spacing(-3.0, 3.0, 0.1)
    f = ScalarField.from_function(g, lambda x: x[..., 0] ** 2 + x[..., 1] ** 2 - r * r)
    assert abs(extract_zero_level_radius(f) - r) <= 0.1


def test_zero_level_radius_of_cone_datum():
    g = Grid.from_spacing(-3.0, 3.0, 0.02)
    assert extract_zero_level_radius(ScalarField.from_function(g, cone)) == pytest.approx(1.0, abs=1e-12)


def test_zero_level_radius_without_sign_change():
    f = ScalarField(SQUARE, np.ones(SQUARE.counts))
    with pytest.raises(PreconditionError):
        extract_zero_level_radius(f)
