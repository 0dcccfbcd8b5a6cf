import numpy as np
import pytest

from cdual.core.ctransform import ValueTable, c_conjugate_dual
from cdual.core.hamiltonian import (
    check_hamiltonian_properties,
    diagonal_subdifferential,
    first_order_ratios,
    gradient_consistency_check,
    hamiltonian_of,
    lagrangian_from_hamiltonian,
    lipschitz_bound_check,
    partial_c_subdiff_2,
    single_valuedness_scan,
    tilde_graph,
)
from cdual.core.monotone import Relation
from cdual.core.selfdual import (
    Lagrangian,
    fitzpatrick,
    graph_of_dbar,
    selfdual_from_cconvex,
    synthesize_selfdual,
)
from cdual.core.space import (
    FiniteSpace,
    SymmetrizedCoupling,
    make_coupling,
    make_neg_half_sqdist_coupling,
)
from cdual.errors import InvalidInput


@pytest.fixture
def quadratic(grid3, half_square):
    return hamiltonian_of(Lagrangian(grid3, half_square))


def test_quadratic_hamiltonian_is_difference_of_squares(quadratic, grid3):
    x = grid3.xspace.coords[:, 0]
    expected = 0.5 * (x[None, :] ** 2 - x[:, None] ** 2)
    np.testing.assert_allclose(quadratic.table, expected)
    np.testing.assert_allclose(quadratic.antisymmetric_part, expected)
    assert quadratic(0, 1) == pytest.approx(-0.5)
    assert quadratic.domain() == (0, 1, 2)


def test_properties_hold_for_selfdual_lagrangians(quadratic, grid3):
    report = check_hamiltonian_properties(quadratic)
    assert report.passed
    assert report["sub_antisymmetry"].residual == pytest.approx(0.0, abs=1e-12)

    F = fitzpatrick(Relation(((0, 0), (0, 1), (1, 1), (1, 2), (2, 2))), grid3)
    L = synthesize_selfdual(F.table, F.conjugate, SymmetrizedCoupling(grid3))
    report = check_hamiltonian_properties(hamiltonian_of(L))
    assert report.passed, report.to_dict()
    assert not report["antisymmetric_row_c_convexity"].asserted
    with pytest.raises(KeyError):
        report["missing"]


def test_lagrangian_is_recovered_from_hamiltonian(quadratic, half_square):
    np.testing.assert_allclose(lagrangian_from_hamiltonian(quadratic), half_square)


def test_subdifferentials_of_quadratic(quadratic):
    assert partial_c_subdiff_2(quadratic, 0, 1) == frozenset({1})
    for x in range(3):
        assert diagonal_subdifferential(quadratic, x) == frozenset({x})
    graph = tilde_graph(quadratic)
    assert graph.relation.pairs == ((0, 0), (1, 1), (2, 2))


def _graph_pairs(graph):
    return () if graph.relation is None else graph.relation.pairs


def test_tilde_graph_matches_dbar_graph_on_synthesized_lagrangian(grid3):
    F = fitzpatrick(Relation(((0, 0), (0, 1), (1, 1), (1, 2), (2, 2))), grid3)
    L = synthesize_selfdual(F.table, F.conjugate, SymmetrizedCoupling(grid3))
    H = hamiltonian_of(L)
    assert _graph_pairs(tilde_graph(H)) == _graph_pairs(graph_of_dbar(L))
    assert tilde_graph(H).domain == graph_of_dbar(L).domain


def test_tilde_graph_matches_dbar_graph_for_c_convex_potentials(rng):
    for size in (3, 5, 7):
        c = make_coupling(rng.integers(-4, 5, size=(size, size)).astype(float))
        for _ in range(4):
            g = ValueTable(c.yspace, rng.integers(-3, 4, size=size).astype(float))
            L = selfdual_from_cconvex(c_conjugate_dual(g, c), c)
            H = hamiltonian_of(L)
            assert _graph_pairs(tilde_graph(H)) == _graph_pairs(graph_of_dbar(L))
            for x in range(size):
                expected = {y for p, y in _graph_pairs(graph_of_dbar(L)) if p == x}
                assert diagonal_subdifferential(H, x) == expected


def test_single_valuedness_scan(quadratic):
    report = single_valuedness_scan(quadratic)
    assert report.fraction == 1.0
    assert report.multivalued == ()
    with pytest.raises(InvalidInput):
        single_valuedness_scan(quadratic, points=[])


def test_gradient_check_falls_back_at_endpoints(quadratic):
    report = gradient_consistency_check(quadratic, [0, 1, 2])
    assert report.h == 1.0
    assert report.stencils_used == {"backward": 1, "central": 1, "forward": 1}
    assert report.max_deviation == pytest.approx(0.5)
    assert report.max_deviation <= report.h / 2
    assert report.deviations[1] == pytest.approx(0.0)

    with pytest.raises(InvalidInput):
        gradient_consistency_check(quadratic, [0, 1, 2], stencil="upwind")
    with pytest.raises(InvalidInput):
        gradient_consistency_check(quadratic, [0, 1])


def test_first_order_ratios():
    assert first_order_ratios([0.4, 0.2, 0.1]) == [2.0, 2.0]
    assert first_order_ratios([1e-7, 1e-9]) == [None]
    assert first_order_ratios([0.1, 0.0]) == [float("inf")]


def test_lipschitz_bound():
    line = FiniteSpace.uniform_interval(0.0, 1.0, 5)
    c = make_neg_half_sqdist_coupling(line)
    phi = ValueTable(line, c.table[:, 2])
    L = selfdual_from_cconvex(phi, c)
    assert L.residual() <= 1e-9
    for obj in (L, hamiltonian_of(L)):
        report = lipschitz_bound_check(obj)
        assert report.bound == pytest.approx(2.0)
        assert report.holds
        assert report.max_ratio <= report.bound


def test_lipschitz_needs_neg_half_sqdist(quadratic):
    with pytest.raises(InvalidInput):
        lipschitz_bound_check(quadratic)


def test_all_infinite_row_has_no_hamiltonian(binary):
    L = Lagrangian(binary, [[np.inf, np.inf], [0.0, 0.0]])
    with pytest.raises(InvalidInput):
        hamiltonian_of(L)
