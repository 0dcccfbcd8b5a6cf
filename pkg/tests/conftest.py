"""Shared pytest fixtures: sample instances and small couplings."""

import json
from pathlib import Path

import numpy as np
import pytest

from cdual.core.space import (
    FiniteSpace,
    make_arclength_coupling,
    make_inner_product_coupling,
)

FIXTURES_DIR = Path(__file__).parent.parent / "data" / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES_DIR


@pytest.fixture
def load_fixture():
    def _load(name: str) -> dict:
        return json.loads((FIXTURES_DIR / f"{name}.json").read_text(encoding="utf-8"))

    return _load


@pytest.fixture
def grid3():
    """c(x, y) = xy on {-1, 0, 1}."""
    return make_inner_product_coupling([-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0])


@pytest.fixture
def binary():
    """c(x, y) = xy on {0, 1}."""
    return make_inner_product_coupling([0.0, 1.0], [0.0, 1.0])


@pytest.fixture
def circle8():
    return make_arclength_coupling(FiniteSpace.circle(8))


@pytest.fixture
def half_square(grid3):
    """L(x, y) = (x² + y²)/2 on grid3."""
    x = grid3.xspace.coords[:, 0]
    return 0.5 * (x[:, None] ** 2 + x[None, :] ** 2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
