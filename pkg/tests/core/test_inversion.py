import numpy as np
import pytest

from cdual.core.ctransform import ValueTable, c_conjugate
from cdual.core.inversion import (
    FIRST,
    CurveFamily,
    SkewMap,
    check_arcwise_convexity,
    check_cconvexity_criterion,
    invert_via_skew,
    is_c_skew,
    minimax_gap,
    minimize_Ip,
)
from cdual.core.hamiltonian import hamiltonian_of
from cdual.core.selfdual import Lagrangian
from cdual.core.space import FiniteSpace, make_sqdist_coupling
from cdual.errors import InvalidInput


QUARTER = SkewMap((2, 3, 4, 5, 6, 7, 0, 1))


def test_straight_lines_follow_grid_order(grid3):
    lines = CurveFamily.straight_lines(grid3.xspace)
    path, t = lines.curve(0, 2)
    assert path == (0, 1, 2)
    assert t.tolist() == [0.0, 0.5, 1.0]
    assert lines.curve(2, 0)[0] == (2, 1, 0)
    with pytest.raises(InvalidInput):
        CurveFamily.straight_lines(FiniteSpace.circle(4))


def test_geodesics_take_short_arcs():
    geodesics = CurveFamily.geodesics(FiniteSpace.circle(8))
    assert geodesics.curve(0, 6)[0] == (0, 7, 6)
    assert geodesics.curve(0, 4)[0] == (0, 1, 2, 3, 4)
    assert geodesics.curve(4, 0)[0] == (4, 5, 6, 7, 0)


def test_curve_models_are_validated():
    with pytest.raises(InvalidInput):
        CurveFamily.from_model(3, [(0, 2)], [[0, 1]], [[0.0, 1.0]])
    with pytest.raises(InvalidInput):
        CurveFamily.from_model(3, [(0, 2)], [[0, 1, 2]], [[0.0, 0.7, 0.5]])
    family = CurveFamily.from_model(3, [(0, 2)], [[0, 1, 2]], [[0.0, 0.5, 1.0]])
    assert family.to_model() == {"pairs": [[0, 2]], "paths": [[0, 1, 2]], "t": [[0.0, 0.5, 1.0]]}
    with pytest.raises(InvalidInput):
        family.curve(2, 0)


def test_chord_inequality_witness():
    lines = CurveFamily.straight_lines(FiniteSpace.interval([-1.0, 0.0, 1.0]))
    bump = np.array([-1.0, 0.0, -1.0])
    report = check_arcwise_convexity(bump, lines)
    assert not report.holds
    assert report.worst == pytest.approx(1.0)
    assert report.witness == (0, 0, 2, 1)
    assert check_arcwise_convexity(bump, lines, concave=True).holds


def test_per_row_curve_families(grid3):
    lines = CurveFamily.straight_lines(grid3.xspace)
    table = np.array([[1.0, 0.0, 1.0], [-1.0, 0.0, -1.0]])
    with pytest.raises(InvalidInput):
        check_arcwise_convexity(table, {0: lines, 1: lines}, uniform=True)
    report = check_arcwise_convexity(table, {0: lines, 1: lines}, uniform=False, frozen=[0])
    assert report.holds


def test_arclength_fails_with_antipodal_witness(circle8):
    report = check_arcwise_convexity(circle8.table, CurveFamily.geodesics(circle8.xspace))
    assert not report.holds
    _, a, b, _ = report.witness
    assert circle8.xspace.metric[a, b] == np.pi


def test_squared_distance_conjugates_are_arcwise_convex(rng):
    grid = FiniteSpace.uniform_interval(-1.0, 1.0, 9)
    c = make_sqdist_coupling(grid)
    lines = CurveFamily.straight_lines(grid)
    assert check_arcwise_convexity(c.table, lines).holds

    for _ in range(5):
        phi = ValueTable(grid, rng.integers(-4, 5, size=9).astype(float))
        assert check_arcwise_convexity(c_conjugate(phi, c).values, lines).holds


def test_negative_squared_distance_flips_to_concave():
    grid = FiniteSpace.uniform_interval(-1.0, 1.0, 9)
    c = make_sqdist_coupling(grid, -1.0)
    lines = CurveFamily.straight_lines(grid)
    assert not check_arcwise_convexity(c.table, lines).holds
    assert check_arcwise_convexity(c.table, lines, concave=True).holds

    # a single finite point gives φ^c(y) = -(x0 - y)², concave in y
    phi = ValueTable.from_values([0.0] + [None] * 8, grid)
    phic = c_conjugate(phi, c).values
    assert not check_arcwise_convexity(phic, lines).holds
    assert check_arcwise_convexity(-phic, lines).holds


def test_quarter_rotation_is_c_skew(circle8):
    check = is_c_skew(QUARTER, circle8)
    assert check.holds and check.residual <= 1e-12
    assert not is_c_skew(SkewMap(tuple(range(8))), circle8)
    with pytest.raises(InvalidInput):
        is_c_skew(SkewMap((0, 1)), circle8)


def test_constant_maps_are_c_skew(grid3):
    for p in range(3):
        assert is_c_skew(SkewMap.constant(3, p), grid3)


def test_quarter_rotation_has_no_solution_on_grid(circle8):
    result = invert_via_skew(ValueTable(circle8.xspace, np.zeros(8)), QUARTER, circle8)
    assert not result.solved
    assert result.min_value == pytest.approx(np.pi / 2)
    assert result.inclusions == {}
    assert result.to_dict()["no_solution_on_grid"] is True


def test_skew_inversion_with_hypotheses(grid3):
    lines = CurveFamily.straight_lines(grid3.xspace)
    phi = ValueTable(grid3.xspace, [0.5, 0.0, 0.5])
    result = invert_via_skew(phi, SkewMap.constant(3, 2), grid3, curves_x=lines, curves_y=lines)
    assert result.solved
    assert result.argmin == (2,)
    assert result.inclusions == {2: True}
    assert all(h.holds for h in result.hypotheses.values())
    with pytest.raises(InvalidInput):
        invert_via_skew(phi, SkewMap((0, 1, 2)), grid3)


def test_minimize_Ip_on_quadratic(grid3, half_square):
    L = Lagrangian(grid3, half_square)
    result = minimize_Ip(L, 2)
    assert result.solved
    assert result.min_value == pytest.approx(0.0, abs=1e-12)
    assert result.argmin == (2,)

    lines = CurveFamily.straight_lines(grid3.xspace)
    with pytest.raises(InvalidInput):
        minimize_Ip(L, 2, curves=lines)
    reported = minimize_Ip(L, 0, curves=lines, H=hamiltonian_of(L))
    assert reported.argmin == (0,)
    assert reported.hypothesis.variable == FIRST
    with pytest.raises(InvalidInput):
        minimize_Ip(L, 3)


def test_minimax_identities(grid3, circle8, rng):
    lines = CurveFamily.straight_lines(grid3.xspace)
    for p in range(3):
        report = minimax_gap(np.zeros((3, 3)), SkewMap.constant(3, p), grid3, curves=lines)
        assert report.identity_residual <= 1e-12
        assert report.gap == pytest.approx(0.0, abs=1e-12)
        assert report.hypothesis.holds

    x = np.array([-1.0, 0.0, 1.0])
    quadratic = 0.5 * (x[None, :] ** 2 - x[:, None] ** 2)
    report = minimax_gap(quadratic, SkewMap.constant(3, 1), grid3)
    assert report.gap == pytest.approx(0.0, abs=1e-12)
    assert report.inf_I == pytest.approx(0.0, abs=1e-12)

    upper = np.triu(rng.integers(-3, 4, size=(8, 8)).astype(float), 1)
    report = minimax_gap(upper - upper.T, QUARTER, circle8)
    assert report.identity_residual <= 1e-12
    assert report.gap >= -1e-12

    with pytest.raises(InvalidInput):
        minimax_gap(np.ones((3, 3)), SkewMap.constant(3, 0), grid3)


def test_cconvexity_criterion(grid3):
    lines = CurveFamily.straight_lines(grid3.xspace)
    half_square = check_cconvexity_criterion(ValueTable(grid3.xspace, [0.5, 0.0, 0.5]), grid3, curves_x=lines)
    assert half_square.hypothesis_holds and half_square.c_convex
    assert half_square.implication_holds
    assert half_square.minimax_gap == pytest.approx(0.0, abs=1e-12)

    # the Lipschitz-type bound holds for the bump but the arc-wise hypothesis does not
    bump = check_cconvexity_criterion(ValueTable(grid3.xspace, [0.0, 1.0, 0.0]), grid3, curves_x=lines)
    assert bump.hypothesis_holds and not bump.c_convex
    assert not bump.hypotheses["phi_minus_c_first_variable"].holds
