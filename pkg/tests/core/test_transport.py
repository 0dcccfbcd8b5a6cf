import numpy as np
import pytest

from cdual.constants import BACKEND_HIGHS, BACKEND_NETWORK_SIMPLEX
from cdual.core.space import FiniteSpace, make_coupling, make_inner_product_coupling, make_neg_half_sqdist_coupling
from cdual.core.transport import (
    DiscreteMeasure,
    Involution,
    NotAGraph,
    Plan,
    extract_involution,
    extract_support_inclusion,
    graph_plan_identity,
    lifted_cost,
    monotone_rearrangement,
    solve_dk_sym,
    solve_lifted,
    solve_mk_sym,
    symmetrized_cost,
    verify_duality,
)
from cdual.errors import InvalidInput

NONUNIFORM_COST = [[3, -1, 0, 2], [1, 4, -2, 0], [0, 2, 5, -1], [-3, 1, 2, 4]]
NONUNIFORM_T = [1, 2, 3, 0]
NONUNIFORM_MU = [0.125, 0.25, 0.25, 0.375]


@pytest.fixture
def nonuniform():
    c = make_coupling(np.array(NONUNIFORM_COST, dtype=float))
    return c, np.array(NONUNIFORM_T), DiscreteMeasure(c.xspace, NONUNIFORM_MU)


def test_measure_validation():
    space = FiniteSpace.discrete(3)
    with pytest.raises(InvalidInput):
        DiscreteMeasure(space, [0.5, 0.5, 0.5])
    with pytest.raises(InvalidInput):
        DiscreteMeasure(space, [1.5, -0.5, 0.0])
    with pytest.raises(InvalidInput):
        DiscreteMeasure(space, [0.5, 0.5])
    mu = DiscreteMeasure(space, [0.5, 0.5, 0.0])
    assert mu.support.tolist() == [0, 1]


def test_plan_validation(binary):
    mu = DiscreteMeasure.uniform(binary.xspace)
    with pytest.raises(InvalidInput):
        Plan([[0.5, 0.0], [0.5, 0.0]], mu)
    with pytest.raises(InvalidInput):
        Plan([[0.3, 0.3], [0.3, 0.1]], mu)
    plan = Plan([[0.25, 0.25], [0.25, 0.25]], mu)
    assert len(plan.support()) == 4


def test_symmetrized_cost_is_symmetric(nonuniform):
    c, T, _ = nonuniform
    cost = symmetrized_cost(c, T)
    np.testing.assert_array_equal(cost, cost.T)
    assert cost[0, 1] == (c(0, T[1]) + c(1, T[0])) / 2


def test_swap_value_and_involution(binary):
    mu = DiscreteMeasure.uniform(binary.xspace)
    plan, value = solve_mk_sym(binary, [1, 0], mu)
    assert value == pytest.approx(0.5, abs=1e-12)
    np.testing.assert_allclose(plan.matrix, [[0.0, 0.5], [0.5, 0.0]], atol=1e-12)

    certificate = solve_dk_sym(binary, [1, 0], mu)
    assert certificate.anchoring == "lp"
    assert verify_duality(value, certificate)

    result = monotone_rearrangement(binary, [1, 0], mu)
    assert not result.monotone
    assert isinstance(result.involution, Involution)
    assert result.involution.mapping == (1, 0)
    assert result.involution.is_involution and result.involution.preserves_measure
    assert result.composite_monotone is True
    assert abs(result.support.integral) <= 1e-8


def test_monotone_map_adopts_diagonal_plan():
    grid = np.linspace(0.0, 1.0, 5)
    c = make_inner_product_coupling(grid, grid)
    mu = DiscreteMeasure.uniform(c.xspace)
    result = monotone_rearrangement(c, np.arange(5), mu)
    assert result.monotone and result.diagonal_adopted
    assert result.certificate.anchoring == "graph"
    assert result.duality_gap <= 1e-6
    assert result.involution.is_identity
    assert result.inclusion_failures == ()
    assert result.gradient is not None


def test_circle_rotation_gradient_is_first_order():
    circle = FiniteSpace.circle(32)
    c = make_neg_half_sqdist_coupling(circle)
    T = (np.arange(32) + 1) % 32
    result = monotone_rearrangement(c, T, DiscreteMeasure.uniform(circle))
    assert result.monotone and result.diagonal_adopted
    assert result.gradient.max_deviation <= 2 * result.gradient.h


def test_backends_agree(nonuniform):
    c, T, mu = nonuniform
    _, simplex = solve_mk_sym(c, T, mu, BACKEND_NETWORK_SIMPLEX)
    _, highs = solve_mk_sym(c, T, mu, BACKEND_HIGHS)
    assert simplex == pytest.approx(highs, abs=1e-8)
    with pytest.raises(InvalidInput):
        solve_mk_sym(c, T, mu, "interior_point")


def test_lifted_problem_doubles_the_value(nonuniform):
    c, T, mu = nonuniform
    _, value = solve_mk_sym(c, T, mu)
    lifted = solve_lifted(c, T, mu)
    assert lifted.value == pytest.approx(2 * value, abs=1e-6)
    assert graph_plan_identity(lifted, T, c) <= 1e-6
    projected = lifted.projected_plan(mu)
    assert projected.value(symmetrized_cost(c, T)) == pytest.approx(value, abs=1e-6)


def test_lifted_atoms(nonuniform):
    c, T, _ = nonuniform
    us, vs, cost = lifted_cost(c, T, [0, 2])
    assert us == ((0, 1), (2, 3))
    assert vs == ((1, 0), (3, 2))
    assert cost[0, 1] == c(0, 3) + c(2, 1)


def test_rearrangement_on_nonuniform_measure(nonuniform):
    c, T, mu = nonuniform
    result = monotone_rearrangement(c, T, mu)
    assert result.duality_gap <= 1e-6
    assert result.support.max_residual <= 1e-6


def test_split_plan_is_not_a_graph(binary):
    mu = DiscreteMeasure.uniform(binary.xspace)
    result = extract_involution(Plan([[0.25, 0.25], [0.25, 0.25]], mu))
    assert isinstance(result, NotAGraph)
    assert result.rows == (0, 1)


def test_map_is_validated(binary):
    mu = DiscreteMeasure.uniform(binary.xspace)
    with pytest.raises(InvalidInput):
        solve_mk_sym(binary, [0, 2], mu)
    with pytest.raises(InvalidInput):
        solve_mk_sym(binary, [0.0, 1.0], mu)
    with pytest.raises(InvalidInput):
        solve_mk_sym(binary, [0, 1], DiscreteMeasure.uniform(FiniteSpace.discrete(3)))


def test_support_inclusion_on_nonuniform_instance(nonuniform):
    c, T, mu = nonuniform
    plan, _ = solve_mk_sym(c, T, mu)
    certificate = solve_dk_sym(c, T, mu)
    report = extract_support_inclusion(plan, certificate.lagrangian, T)
    assert report.max_residual <= 1e-6
    assert abs(report.integral) <= 1e-8
    assert report.support == plan.support()
