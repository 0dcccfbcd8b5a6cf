"""
c-conjugation on finite spaces.

Sups over finite sets are exact maxes; the tolerance only absorbs float
rounding. Functions may take the value +inf (improper points are skipped by
every max), but at least one entry must be finite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from cdual.constants import DEFAULT_TOL, MAXPLUS_CHUNK_CELLS
from cdual.core.space import Coupling, FiniteSpace
from cdual.errors import EmptyResult, InvalidInput
from cdual.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class ValueTable:
    """An extended-real function on a finite space (values in ℝ ∪ {+inf})."""

    space: FiniteSpace
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True).ravel()
        if values.shape != (self.space.n,):
            raise InvalidInput(
                f"expected {self.space.n} values, got {values.shape[0]}"
            )
        if np.any(np.isnan(values)) or np.any(values == -np.inf):
            raise InvalidInput("values must be finite or +inf")
        if not np.any(np.isfinite(values)):
            raise InvalidInput("function is identically +inf (not proper)")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_values(
        cls, values: Sequence[float | None], space: FiniteSpace | None = None
    ) -> ValueTable:
        """Build from a list where ``None`` stands for +inf."""
        raw = np.array([np.inf if v is None else v for v in values], dtype=float)
        return cls(space or FiniteSpace.discrete(raw.size), raw)

    @property
    def finite_mask(self) -> np.ndarray:
        return np.isfinite(self.values)

    def __len__(self) -> int:
        return self.space.n

    def __getitem__(self, i: int) -> float:
        return float(self.values[i])

    def to_list(self) -> list[float | None]:
        return [float(v) if np.isfinite(v) else None for v in self.values]


def maxplus_product(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """R[i, j] = max_k P[i, k] + Q[k, j], evaluated in row chunks.

    Operands may hold -inf but not +inf.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.ndim != 2 or Q.ndim != 2 or P.shape[1] != Q.shape[0]:
        raise InvalidInput(f"max-plus shapes do not align: {P.shape} and {Q.shape}")

    rows, inner = P.shape
    cols = Q.shape[1]
    out = np.empty((rows, cols))
    step = max(1, MAXPLUS_CHUNK_CELLS // max(1, inner * cols))
    for start in range(0, rows, step):
        block = P[start : start + step, :, None] + Q[None, :, :]
        out[start : start + step] = block.max(axis=1)
    return out


def conjugate_values(values: np.ndarray, table: np.ndarray) -> np.ndarray:
    """max over rows r with finite values[r] of table[r, :] - values[r]."""
    finite = np.isfinite(values)
    if not np.any(finite):
        raise InvalidInput("cannot conjugate a function that is identically +inf")
    return (table[finite] - values[finite, None]).max(axis=0)


def _check_domain(f: ValueTable, size: int, side: str) -> None:
    if f.space.n != size:
        raise InvalidInput(
            f"function lives on {f.space.n} points but the coupling's {side} side has {size}"
        )


def c_conjugate(f: ValueTable, c: Coupling) -> ValueTable:
    """f^c(y) = max_x c(x, y) - f(x), a function on Y."""
    _check_domain(f, c.n, "X")
    return ValueTable(c.yspace, conjugate_values(f.values, c.table))


def c_conjugate_dual(g: ValueTable, c: Coupling) -> ValueTable:
    """g^c(x) = max_y c(x, y) - g(y), a function on X."""
    _check_domain(g, c.m, "Y")
    return ValueTable(c.xspace, conjugate_values(g.values, c.table.T))


def c_double_conjugate(f: ValueTable, c: Coupling) -> ValueTable:
    """f^cc, the largest c-convex minorant of f."""
    return c_conjugate_dual(c_conjugate(f, c), c)


def is_c_convex(f: ValueTable, c: Coupling, tol: float = DEFAULT_TOL) -> bool:
    fcc = c_double_conjugate(f, c).values
    return bool(np.max(np.abs(fcc - f.values)) <= tol)


def c_subdifferential(
    f: ValueTable, c: Coupling, x0: int, tol: float = DEFAULT_TOL
) -> frozenset[int]:
    """∂_c f(x0) through the Young equality f(x0) + f^c(y) = c(x0, y)."""
    x0 = c.xspace.check_index(x0)
    if not np.isfinite(f.values[x0]):
        raise EmptyResult(f"f(x0) = +inf at x0={x0}; the subdifferential is empty")
    fc = c_conjugate(f, c).values
    gap = f.values[x0] + fc - c.table[x0]
    return frozenset(np.flatnonzero(gap <= tol).tolist())


def c_subdifferential_graph(
    f: ValueTable, c: Coupling, tol: float = DEFAULT_TOL
) -> tuple[tuple[int, int], ...]:
    """All pairs (x, y) with y ∈ ∂_c f(x), x ranging over the finite points of f."""
    fc = c_conjugate(f, c).values
    gap = f.values[:, None] + fc[None, :] - c.table
    xs, ys = np.nonzero(np.isfinite(gap) & (gap <= tol))
    return tuple(zip(xs.tolist(), ys.tolist()))


def check_young(f: ValueTable, c: Coupling) -> float:
    """max over (x, y) of c(x, y) - f(x) - f^c(y); never positive beyond rounding."""
    fc = c_conjugate(f, c).values
    finite = f.finite_mask
    slack = c.table[finite] - f.values[finite, None] - fc[None, :]
    return float(slack.max())
