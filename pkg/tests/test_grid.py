import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pflow.errors import PreconditionError, StencilError
from pflow.exact import SelfSimilarParams, gp_exact, gp_field
from pflow.grid import (
    Grid,
    ScalarField,
    gradient_array,
    gradient_central,
    hessian_central,
    read_snapshot,
    resample,
    write_snapshot,
)

coef = st.floats(-3.0, 3.0, allow_nan=False)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid((0.0,) * 3, (1.0,) * 3, (5,) * 3)
    with pytest.raises(ValueError):
        Grid((0.0,), (1.0,), (2,))
    with pytest.raises(ValueError):
        Grid((1.0,), (0.0,), (5,))


def test_grid_geometry():
    g = Grid.from_spacing(-1.0, 1.0, 0.25, n=2)
    assert g.counts == (9, 9)
    assert g.h == (0.25, 0.25)
    assert g.coordinates().shape == (9, 9, 2)
    np.testing.assert_array_equal(g.node_position((0, 8)), [-1.0, 1.0])
    mask = g.boundary_mask()
    assert mask.sum() == 81 - 49
    assert not g.is_interior((0, 3)) and g.is_interior((1, 1))


def test_scalar_field_is_read_only_and_finite():
    g = Grid.square(0.0, 1.0, 5, n=1)
    f = ScalarField(g, np.zeros(5))
    with pytest.raises(ValueError):
        f.values[0] = 1.0
    with pytest.raises(ValueError):
        ScalarField(g, np.array([0.0, np.nan, 0.0, 0.0, 0.0]))
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros(5), time=-1.0)


def test_gradient_of_linear_in_1d():
    g = Grid.square(-1.0, 1.0, 21, n=1)
    f = ScalarField.from_function(g, lambda x: x[..., 0])
    for i in range(1, 20):
        assert gradient_central(f, (i,))[0] == pytest.approx(1.0, abs=1e-12)


def test_gradient_of_quadratic_at_half():
    g = Grid.from_spacing(0.0, 1.0, 0.1, n=1)
    f = ScalarField.from_function(g, lambda x: x[..., 0] ** 2)
    assert gradient_central(f, (5,))[0] == pytest.approx(1.0, abs=1e-12)


def test_constant_has_zero_derivatives():
    g = Grid.square(-1.0, 1.0, 7)
    f = ScalarField(g, np.full(g.counts, 3.7))
    assert np.array_equal(gradient_central(f, (3, 2)), np.zeros(2))
    assert np.array_equal(hessian_central(f, (3, 2)), np.zeros((2, 2)))


def test_hessian_examples():
    g1 = Grid.square(-1.0, 1.0, 11, n=1)
    f1 = ScalarField.from_function(g1, lambda x: x[..., 0] ** 2)
    for i in range(1, 10):
        assert hessian_central(f1, (i,))[0, 0] == pytest.approx(2.0, abs=1e-10)
    g2 = Grid.square(-1.0, 1.0, 11)
    f2 = ScalarField.from_function(g2, lambda x: x[..., 0] * x[..., 1])
    H = hessian_central(f2, (4, 6))
    assert H[0, 1] == pytest.approx(1.0, abs=1e-12)
    assert H[0, 0] == pytest.approx(0.0, abs=1e-12)
    assert H[1, 1] == pytest.approx(0.0, abs=1e-12)


def test_stencil_outside_interior_raises():
    g = Grid.square(0.0, 1.0, 5)
    f = ScalarField(g, np.zeros(g.counts))
    with pytest.raises(StencilError):
        gradient_central(f, (0, 2))
    with pytest.raises(StencilError):
        hessian_central(f, (2, 4))


@given(coef, coef, coef, coef, coef, coef, st.integers(1, 7), st.integers(1, 7))
def test_central_stencils_exact_on_quadratics(a, bx, by, cxx, cxy, cyy, i, j):
    g = Grid.square(-1.0, 1.0, 9)

    def q(x):
        X, Y = x[..., 0], x[..., 1]
        return a + bx * X + by * Y + cxx * X * X + cxy * X * Y + cyy * Y * Y

    f = ScalarField.from_function(g, q)
    x, y = g.node_position((i, j))
    grad = gradient_central(f, (i, j))
    H = hessian_central(f, (i, j))
    scale = 1.0 + abs(a) + abs(bx) + abs(by) + abs(cxx) + abs(cxy) + abs(cyy)
    tol = 1e-12 * scale / np.min(g.h) ** 2
    np.testing.assert_allclose(grad, [bx + 2 * cxx * x + cxy * y, by + cxy * x + 2 * cyy * y], atol=tol)
    np.testing.assert_allclose(H, [[2 * cxx, cxy], [cxy, 2 * cyy]], atol=tol)


@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=25, max_size=25), st.integers(1, 3), st.integers(1, 3))
def test_hessian_symmetric_bitwise(vals, i, j):
    g = Grid.square(0.0, 1.0, 5)
    H = hessian_central(ScalarField(g, np.array(vals)), (i, j))
    assert H[0, 1] == H[1, 0]


def test_gradient_array_matches_pointwise():
    g = Grid.from_spacing(-1.0, 1.0, 0.2)
    f = ScalarField.from_function(g, lambda x: np.sin(x[..., 0]) * np.cos(2 * x[..., 1]))
    ga = gradient_array(f.values, g)
    for node in [(1, 1), (4, 7), (9, 9)]:
        np.testing.assert_allclose(ga[(slice(None),) + tuple(k - 1 for k in node)], gradient_central(f, node), rtol=1e-14)


def test_resample_identity_is_identical():
    g = Grid.square(-1.0, 1.0, 13)
    f = ScalarField.from_function(g, lambda x: np.exp(x[..., 0]) - x[..., 1] ** 3)
    assert np.array_equal(resample(f, g).values, f.values)


def test_resample_linear_exact():
    coarse = Grid.square(-1.0, 2.0, 7)
    fine = Grid.square(-1.0, 2.0, 31)
    f = ScalarField.from_function(coarse, lambda x: 2.0 - 3.0 * x[..., 0] + 0.5 * x[..., 1])
    out = resample(f, fine)
    X = fine.coordinates()
    np.testing.assert_allclose(out.values, 2.0 - 3.0 * X[..., 0] + 0.5 * X[..., 1], atol=1e-13)


def test_resample_gp_second_order():
    # interpolation error against direct re-evaluation on the half-spacing grid
    errs = []
    for h in (0.2, 0.1):
        coarse = Grid.from_spacing(-4.0, 4.0, h)
        fine = Grid.from_spacing(-4.0, 4.0, h / 2)
        f = gp_field(coarse, 1.0, 3.0)
        direct = gp_exact(fine.coordinates(), 1.0, SelfSimilarParams(3.0))
        err = float(np.max(np.abs(resample(f, fine).values - direct)))
        assert err <= 0.25 * h * h
        errs.append(err)
    assert np.log2(errs[0] / errs[1]) >= 1.8


def test_resample_box_mismatch():
    f = ScalarField(Grid.square(0.0, 1.0, 5), np.zeros((5, 5)))
    with pytest.raises(PreconditionError):
        resample(f, Grid.square(0.0, 2.0, 9))


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=4 * 6, max_size=4 * 6),
       st.floats(0.0, 1e6, allow_nan=False))
def test_snapshot_round_trip_bitwise(tmp_path_factory, vals, t):
    g = Grid((-1.5, 0.1), (2.75, 3.3), (4, 6))
    f = ScalarField(g, np.array(vals), t)
    path = tmp_path_factory.mktemp("snap") / "f.snap"
    write_snapshot(f, path, ["manifest abc", "note"])
    back = read_snapshot(path)
    assert back.grid == g
    assert back.time == f.time
    assert np.array_equal(back.values, f.values)
    assert path.read_text().startswith("# manifest abc\n")


def test_snapshot_1d_round_trip(tmp_path):
    g = Grid.from_spacing(0.0, 1.0, 0.1, n=1)
    f = ScalarField.from_function(g, lambda x: np.sin(7 * x[..., 0]), 0.3)
    write_snapshot(f, tmp_path / "a.snap")
    back = read_snapshot(tmp_path / "a.snap")
    assert back.grid == g and np.array_equal(back.values, f.values)
