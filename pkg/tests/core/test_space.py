import numpy as np
import pytest

from cdual.core.space import (
    CouplingFamily,
    FiniteSpace,
    SymmetrizedCoupling,
    eval_C,
    make_coupling,
    make_neg_half_sqdist_coupling,
    make_sqdist_coupling,
    swap_xy,
    swap_yx,
)
from cdual.errors import InvalidInput


def test_circle_metric_uses_whole_steps():
    circle = FiniteSpace.circle(8)
    assert circle.metric[0, 4] == np.pi
    assert circle.metric[0, 1] == circle.metric[0, 7] == np.pi / 4
    assert circle.diameter == np.pi
    assert circle.spacing == pytest.approx(np.pi / 4)


def test_circle_offsets_send_antipodes_forward():
    circle = FiniteSpace.circle(4)
    offsets = circle.offsets()
    assert offsets[0, 2] == offsets[2, 0] == np.pi
    assert offsets[0, 3] == pytest.approx(-np.pi / 2)


def test_interval_spacing_only_for_uniform_grids():
    assert FiniteSpace.uniform_interval(0.0, 1.0, 5).spacing == pytest.approx(0.25)
    uneven = FiniteSpace.interval([0.0, 1.0, 3.0])
    assert uneven.spacing is None
    assert not uneven.is_grid
    assert uneven.metric[0, 2] == 3.0


def test_torus_is_product_of_circles():
    torus = FiniteSpace.torus(2, 3)
    assert torus.n == 6
    assert torus.metric[0, 3] == pytest.approx(np.pi)
    assert torus.metric[0, 1] == pytest.approx(2 * np.pi / 3)


@pytest.mark.parametrize(
    "metric",
    [
        [[0.0, 1.0], [2.0, 0.0]],
        [[1.0, 1.0], [1.0, 0.0]],
        [[0.0, -1.0], [-1.0, 0.0]],
        [[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [5.0, 1.0, 0.0]],
    ],
)
def test_bad_metrics_are_rejected(metric):
    with pytest.raises(InvalidInput):
        FiniteSpace.from_metric(metric)


def test_triangle_violation_is_named():
    with pytest.raises(InvalidInput, match="triangle inequality"):
        FiniteSpace.from_metric([[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [5.0, 1.0, 0.0]])
    # equality on a path is still a metric
    assert FiniteSpace.from_metric([[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]]).diameter == 2.0


@pytest.mark.parametrize("n", [1, 2, 7, 8, 32, 63, 64])
def test_circle_metric_satisfies_triangle_inequality(n):
    d = FiniteSpace.circle(n).metric
    through = d[:, :, None] + d[None, :, :]
    assert np.all(d[:, None, :] <= through + 1e-12)
    assert d.max() <= np.pi


@pytest.mark.parametrize(
    "space",
    [
        FiniteSpace.circle(16),
        FiniteSpace.torus(3, 4),
        FiniteSpace.interval([-2.0, -0.5, 0.0, 0.3, 1.7]),
    ],
    ids=["circle", "torus", "uneven_interval"],
)
def test_neg_half_sqdist_is_diameter_lipschitz(space):
    c = make_neg_half_sqdist_coupling(space)
    d, diam = space.metric, space.diameter
    # |c(x, z) - c(y, z)| <= diam · d(x, y) for all triples
    spread = np.abs(c.table[:, None, :] - c.table[None, :, :])
    assert np.all(spread <= diam * d[:, :, None] + 1e-12)


def test_coupling_rejects_non_finite_and_misshapen_tables():
    with pytest.raises(InvalidInput):
        make_coupling([[0.0, np.nan]])
    with pytest.raises(InvalidInput):
        make_coupling([[0.0, 1.0]], FiniteSpace.discrete(2))
    with pytest.raises(InvalidInput):
        make_coupling(np.zeros((0, 2)))


def test_symmetrized_coupling_matches_definition():
    c = make_coupling([[1.0, 2.0], [3.0, 4.0]])
    sc = SymmetrizedCoupling(c)
    # u = (x1, y1) = (0, 1), v = (y2, x2) = (0, 1)
    assert eval_C(sc, (0, 1), (0, 1)) == c(0, 0) + c(1, 1)
    assert sc((1, 0), (1, 0)) == c(1, 1) + c(0, 0)
    assert swap_yx(swap_xy((0, 1))) == (0, 1)

    us = [(0, 0), (0, 1), (1, 1)]
    vs = [(1, 0), (0, 1)]
    table = sc.lifted_table(us, vs)
    for i, u in enumerate(us):
        for j, v in enumerate(vs):
            assert table[i, j] == sc(u, v)


def test_eval_C_checks_indices():
    sc = SymmetrizedCoupling(make_coupling(np.zeros((2, 3))))
    with pytest.raises(InvalidInput):
        sc((0, 3), (0, 1))


def test_gradients_of_closed_form_families():
    grid = FiniteSpace.uniform_interval(0.0, 1.0, 3)
    c = make_neg_half_sqdist_coupling(grid)
    assert c.family == CouplingFamily.NEG_HALF_SQDIST
    # d/dx of -(x - y)²/2 is y - x
    assert c.grad_x(0, 2) == pytest.approx(1.0)
    assert c.grad_x(2, 1) == pytest.approx(-0.5)
    assert make_sqdist_coupling(grid).grad_x(0, 2) == pytest.approx(-2.0)

    with pytest.raises(InvalidInput):
        make_coupling(np.zeros((2, 2))).grad_x_table()


def test_neighbors_wrap_on_circles_only():
    assert FiniteSpace.circle(5).neighbor(4, 1) == 0
    line = FiniteSpace.uniform_interval(0.0, 1.0, 5)
    assert line.neighbor(4, 1) is None
    assert line.neighbor(0, -1) is None
    with pytest.raises(InvalidInput):
        FiniteSpace.discrete(3).neighbor(0, 1)
