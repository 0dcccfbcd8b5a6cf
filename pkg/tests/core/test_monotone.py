import numpy as np
import pytest

from cdual.core.monotone import (
    Relation,
    admissible_extensions,
    check_enlargement_equivalence,
    enlarge,
    enlargement_identity_residual,
    extend_to_maximal,
    fitzpatrick_table,
    is_c_cyclically_monotone,
    is_c_monotone,
    is_maximal_c_monotone,
    pair_matrix,
)
from cdual.core.space import make_coupling, make_inner_product_coupling
from cdual.errors import InvalidInput, ResourceLimit

STAIRCASE = Relation(((0, 0), (0, 1), (1, 1), (1, 2), (2, 2)))


def test_relation_is_sorted_and_validated():
    M = Relation.from_pairs([[1, 0], [0, 1]])
    assert M.pairs == ((0, 1), (1, 0))
    assert (1, 0) in M
    assert Relation.graph([2, 0, 1]).pairs == ((0, 2), (1, 0), (2, 1))
    assert Relation.graph([2, 0, 1], domain=[1]).pairs == ((1, 0),)
    with pytest.raises(InvalidInput):
        Relation(())
    with pytest.raises(InvalidInput):
        Relation(((0, 0), (0, 0)))


def test_anti_diagonal_is_not_monotone(binary):
    check = is_c_monotone(Relation(((0, 1), (1, 0))), binary)
    assert not check
    assert check.margin == pytest.approx(1.0)
    assert check.witness == ((0, 1), (1, 0))


def test_staircase_is_maximal(grid3):
    assert is_c_monotone(STAIRCASE, grid3)
    result = is_maximal_c_monotone(STAIRCASE, grid3)
    assert result.holds
    assert result.extensions == ()


def test_identity_graph_is_monotone_but_not_maximal():
    c = make_inner_product_coupling(np.linspace(0, 1, 5), np.linspace(0, 1, 5))
    identity = Relation.graph(list(range(5)))
    result = is_maximal_c_monotone(identity, c)
    assert result.monotone and not result.holds
    assert (0, 1) in result.extensions
    assert set(result.extensions) == set(admissible_extensions(identity, c))


def test_extension_reaches_a_maximal_superset():
    c = make_inner_product_coupling(np.linspace(0, 1, 5), np.linspace(0, 1, 5))
    identity = Relation.graph(list(range(5)))
    maximal = extend_to_maximal(identity, c)
    assert set(identity.pairs) <= set(maximal.pairs)
    assert is_maximal_c_monotone(maximal, c).holds


def test_extension_needs_a_monotone_start(binary):
    with pytest.raises(InvalidInput):
        extend_to_maximal(Relation(((0, 1), (1, 0))), binary)


def test_fitzpatrick_equals_cost_on_monotone_relation(grid3):
    F = fitzpatrick_table(STAIRCASE, grid3)
    np.testing.assert_allclose(F[STAIRCASE.xs, STAIRCASE.ys], grid3.table[STAIRCASE.xs, STAIRCASE.ys])
    assert np.all(F >= grid3.table - 1e-12)


def test_cyclic_checks_follow_pairwise_result(grid3, binary):
    for order in (3, 4):
        assert is_c_cyclically_monotone(STAIRCASE, grid3, order)
        bad = is_c_cyclically_monotone(Relation(((0, 1), (1, 0))), binary, order)
        assert not bad
        assert bad.order == order
        assert len(bad.witness) == order


def test_cycle_caps_are_enforced():
    c = make_coupling(np.zeros((5, 5)))
    pairs = [(x, y) for x in range(5) for y in range(5)][:21]
    M = Relation(tuple(pairs))
    assert is_c_cyclically_monotone(M, c, 3)
    with pytest.raises(ResourceLimit):
        is_c_cyclically_monotone(M, c, 4)
    with pytest.raises(ResourceLimit):
        is_c_cyclically_monotone(Relation(((0, 0),)), c, 6)
    with pytest.raises(InvalidInput):
        is_c_cyclically_monotone(Relation(((0, 0),)), c, 1)
    # caps are inclusive
    assert is_c_cyclically_monotone(Relation(tuple(pairs[:20])), c, 4)


def test_enlargement_equivalence(grid3, binary):
    for M, c in ((STAIRCASE, grid3), (Relation(((0, 1), (1, 0))), binary)):
        report = check_enlargement_equivalence(M, c, n_max=4)
        assert report.equivalent
        assert report.identity_residual <= 1e-12
        assert set(report.cyclic) == {2, 3, 4}


def test_enlargement_identity_on_random_relations(rng):
    for _ in range(10):
        c = make_coupling(rng.normal(size=(4, 4)))
        cells = rng.choice(16, size=5, replace=False)
        M = Relation(tuple((int(k // 4), int(k % 4)) for k in cells))
        assert enlargement_identity_residual(pair_matrix(M, c)) <= 1e-12


def test_enlarge_swaps_each_pair():
    E = enlarge(Relation(((0, 1), (2, 0))))
    assert E.pairs == (((0, 1), (1, 0)), ((2, 0), (0, 2)))


def test_monotonicity_ignores_constant_shifts(grid3, binary):
    for c, M in ((grid3, STAIRCASE), (binary, Relation(((0, 1), (1, 0))))):
        base = is_c_monotone(M, c)
        shifted = is_c_monotone(M, c.shifted(5.0))
        assert bool(shifted.holds) == bool(base.holds)
        assert shifted.margin == pytest.approx(base.margin)
