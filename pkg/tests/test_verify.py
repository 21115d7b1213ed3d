import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pflow.datums import bump, concave_cone
from pflow.errors import PreconditionError
from pflow.grid import Grid
from pflow.operator import PdeParams
from pflow.solver import ProblemSpec, SolverConfig, solve
from pflow.verify import (
    ComparisonReport,
    GpProblem,
    OrderReport,
    TychonoffBarrier,
    binade_pair,
    check_comparison,
    check_concavity,
    check_gradient_growth,
    check_infinite_speed,
    check_max_principle,
    check_sup_contraction,
    check_tychonoff_domination,
    minimal_barrier,
    osc,
    standard_suite,
    write_reports_csv,
)

GRID = Grid.from_spacing(-2.0, 2.0, 0.1)
SPEC = ProblemSpec.cauchy(GRID, bump)
CFG = SolverConfig(PdeParams(3.0, 1e-2), 0.05)


def test_comparison_of_identical_data_is_exact():
    rep = check_comparison(SPEC, SPEC, CFG)
    assert rep.max_violation == 0.0 and rep.passed


@settings(max_examples=10)
@given(st.floats(1.0, 4.0))
def test_comparison_shift_within_a_binade_is_exact(p):
    low, high = binade_pair(SPEC)
    assert np.all(high.initial.values - low.initial.values == 0.5)
    assert osc(low.initial.values) == pytest.approx(0.25, rel=1e-15)
    cfg = SolverConfig(PdeParams(p, 1e-2), 0.02)
    assert check_comparison(low, high, cfg).max_violation == 0.0
    assert check_sup_contraction(low, high, cfg) == 0.0


def test_comparison_of_ordered_pair():
    upper = SPEC.with_initial(SPEC.initial.values + 0.5 * bump(GRID.coordinates(), center=[0.5, 0.0]))
    rep = check_comparison(SPEC, upper, CFG)
    assert rep.passed
    # the mirrored pair -u2 <= -u1 is ordered as well
    neg_lo = SPEC.with_initial(-upper.initial.values)
    neg_hi = SPEC.with_initial(-SPEC.initial.values)
    neg_lo = ProblemSpec.cauchy(GRID, neg_lo.initial.values, 0.0)
    neg_hi = ProblemSpec.cauchy(GRID, neg_hi.initial.values, 0.0)
    assert check_comparison(neg_lo, neg_hi, CFG).passed


def test_comparison_preconditions():
    upper = SPEC.shifted(0.1)
    with pytest.raises(PreconditionError):
        check_comparison(upper, SPEC, CFG)
    other = ProblemSpec.cauchy(Grid.from_spacing(-2.0, 2.0, 0.2), bump)
    with pytest.raises(PreconditionError):
        check_comparison(SPEC, other, CFG)
    with pytest.raises(PreconditionError):
        check_sup_contraction(SPEC, other, CFG)


def test_sup_contraction_distinct_data():
    other = SPEC.with_initial(0.7 * bump(GRID.coordinates(), center=[0.3, -0.4]))
    for p in (1.5, 3.0):
        cfg = SolverConfig(PdeParams(p, 1e-2), 0.05)
        assert check_sup_contraction(SPEC, other, cfg) <= 1e-6


def test_max_principle_cauchy_and_dirichlet():
    assert check_max_principle(SPEC, CFG).passed
    d = ProblemSpec.dirichlet(GRID, lambda x: np.sin(x[..., 0]) * np.cos(x[..., 1]))
    rep = check_max_principle(d, CFG)
    assert rep.passed and rep.check == "max_principle"


def test_tychonoff_dominates_with_large_mu():
    T, eps_t = CFG.t_end, 0.05
    big = TychonoffBarrier((0.0, 0.0), 0.0, 1e3, T, eps_t, 3.0)
    assert check_tychonoff_domination(SPEC, CFG, big).passed
    tight = minimal_barrier(SPEC, T, eps_t, 3.0)
    assert tight.mu > 0.0
    assert check_tychonoff_domination(SPEC, CFG, tight).passed


def test_tychonoff_without_gaussian_part_is_max_principle():
    b = TychonoffBarrier((0.0, 0.0), 1.0, 0.0, CFG.t_end, 0.05, 3.0)
    assert check_tychonoff_domination(SPEC, CFG, b).passed


def test_tychonoff_preconditions():
    small = TychonoffBarrier((0.0, 0.0), 0.0, 1e-3, CFG.t_end, 0.05, 3.0)
    with pytest.raises(PreconditionError):
        check_tychonoff_domination(SPEC, CFG, small)
    early = TychonoffBarrier((0.0, 0.0), 0.0, 1e3, 0.01, 0.01, 3.0)
    with pytest.raises(PreconditionError):
        check_tychonoff_domination(SPEC, CFG, early)


def test_infinite_speed_reaches_probes():
    g = Grid.from_spacing(-5.0, 5.0, 0.1)
    spec = ProblemSpec.cauchy(g, bump)
    probes = np.array([[3.0, 0.0], [0.0, -3.0]])
    rep = check_infinite_speed(spec, SolverConfig(PdeParams(1.5, 1e-2), 0.1), probes)
    assert rep.passed
    # before any step the probes are still zero
    assert not check_infinite_speed(spec, SolverConfig(PdeParams(1.5), 0.0), probes).passed


def test_concavity_in_1d():
    g = Grid.from_spacing(-3.0, 3.0, 0.05, n=1)
    spec = ProblemSpec.dirichlet(g, concave_cone)
    for p in (1.5, 3.0):
        assert check_concavity(spec, SolverConfig(PdeParams(p, 1e-2), 0.1, record_every=20)).passed


def test_concavity_in_2d_window():
    g = Grid.from_spacing(-8.0, 8.0, 0.1)
    spec = ProblemSpec.dirichlet(g, concave_cone)
    cfg = SolverConfig(PdeParams(3.0, 1e-2), 0.1, record_every=25)
    assert check_concavity(spec, cfg, window=4.0).passed


def test_concavity_detects_convex_data():
    g = Grid.from_spacing(-1.0, 1.0, 0.1, n=1)
    spec = ProblemSpec.dirichlet(g, lambda x: x[..., 0] ** 2)
    assert not check_concavity(spec, SolverConfig(PdeParams(2.0), 0.0)).passed


def test_gradient_growth_is_soft():
    run = solve(SPEC, CFG)
    rep = check_gradient_growth(run)
    assert rep.parameters == "soft"
    assert rep.max_violation >= 0.0


def test_order_report():
    rep = OrderReport([0.2, 0.1, 0.05], [4e-2, 1e-2, 2.5e-3])
    assert rep.pairwise_orders == pytest.approx([2.0, 2.0])
    assert rep.observed_order == pytest.approx(2.0) and rep.monotone
    assert not OrderReport([0.2, 0.1], [1.0, 2.0]).monotone
    for errs in ([1.0], [1.0, 0.0]):
        with pytest.raises(PreconditionError):
            OrderReport([0.1, 0.05][: len(errs)], errs)


def test_gp_reference_without_time_step_is_exact():
    prob = GpProblem(3.0, half_width=2.0, t_end=1.0)
    assert prob.error(0.1) == 0.0
    g = prob.grid_for(0.1)
    assert np.min(np.abs(g.axis(0))) == pytest.approx(0.05)


def test_suite_is_deterministic_and_written(tmp_path):
    probes = np.array([[1.5, 0.0]])
    a = standard_suite(SPEC, CFG, probes)
    b = standard_suite(SPEC, CFG, probes)
    assert [r.summary() for r in a] == [r.summary() for r in b]
    checks = [r.check for r in a]
    assert checks == [
        "comparison_ordered", "comparison_identical", "comparison_shift", "contraction_distinct",
        "contraction_shift", "max_principle", "tychonoff", "infinite_speed",
    ]
    assert all(r.passed for r in a)
    path = tmp_path / "report.csv"
    write_reports_csv(a, path, ["header line"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# header line"
    rows = list(csv.DictReader(lines[1:]))
    assert list(rows[0]) == ["check", "parameter-set", "violation", "tolerance", "passed"]
    assert [r["check"] for r in rows] == checks
    assert {r["passed"] for r in rows} == {"true"}


def test_report_summary_format():
    rep = ComparisonReport(2e-3, None, 1e-3, "x", "p=2")
    assert rep.summary().startswith("FAIL x [p=2]")
