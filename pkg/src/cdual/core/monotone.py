"""
c-monotonicity and c-cyclic monotonicity of finite relations.

Every check reduces to the pair matrix A[i, j] = c(x_i, y_j) over the pairs
of a relation (for the enlargement E_M under C the matrix is A + Aᵀ), so the
same cycle enumerator serves both sides of the enlargement equivalence.
Witnesses are the lexicographically first violation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from cdual.constants import (
    DEFAULT_CYCLE_CAPS,
    DEFAULT_MAX_CYCLE_ORDER,
    DEFAULT_TOL,
    IDENTITY_TOL,
)
from cdual.core.ctransform import maxplus_product
from cdual.core.space import Coupling
from cdual.errors import InvalidInput, ResourceLimit
from cdual.utils.logger import get_logger

logger = get_logger(__name__)

Pair = tuple[int, int]


@dataclass(frozen=True)
class Relation:
    """A nonempty set of (x, y) index pairs, kept in sorted order."""

    pairs: tuple[Pair, ...]

    def __post_init__(self):
        pairs = tuple((int(x), int(y)) for x, y in self.pairs)
        if not pairs:
            raise InvalidInput("a relation must contain at least one pair")
        if len(set(pairs)) != len(pairs):
            raise InvalidInput("a relation must not contain duplicate pairs")
        object.__setattr__(self, "pairs", tuple(sorted(pairs)))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[int]]) -> Relation:
        return cls(tuple((p[0], p[1]) for p in pairs))

    @classmethod
    def graph(cls, T: Sequence[int], domain: Iterable[int] | None = None) -> Relation:
        """Graph {(x, T(x))} of a map given as a y-index per x."""
        xs = range(len(T)) if domain is None else domain
        return cls(tuple((x, int(T[x])) for x in xs))

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __contains__(self, pair: object) -> bool:
        return pair in set(self.pairs)

    @property
    def xs(self) -> np.ndarray:
        return np.array([p[0] for p in self.pairs], dtype=int)

    @property
    def ys(self) -> np.ndarray:
        return np.array([p[1] for p in self.pairs], dtype=int)

    def check_bounds(self, c: Coupling) -> None:
        for x, y in self.pairs:
            c.check_pair(x, y)

    def to_dict(self) -> dict[str, Any]:
        return {"pairs": [list(p) for p in self.pairs]}


@dataclass(frozen=True)
class Enlargement:
    """E_M = {((x, y), (y, x)) : (x, y) ∈ M}."""

    source: Relation
    pairs: tuple[tuple[Pair, Pair], ...]


@dataclass(frozen=True)
class MonotonicityCheck:
    """Outcome of a monotonicity test.

    ``margin`` is the largest violation found (<= tol when the check holds);
    ``witness`` lists the offending pairs of the relation in cycle order.
    """

    holds: bool
    margin: float
    witness: tuple[Pair, ...] | None = None
    order: int = 2

    def __bool__(self) -> bool:
        return self.holds

    def to_dict(self) -> dict[str, Any]:
        return {
            "holds": self.holds,
            "margin": self.margin,
            "order": self.order,
            "witness": None if self.witness is None else [list(p) for p in self.witness],
        }


@dataclass(frozen=True)
class MaximalityCheck:
    holds: bool
    monotone: bool
    extensions: tuple[Pair, ...] = field(default_factory=tuple)

    def __bool__(self) -> bool:
        return self.holds

    def to_dict(self) -> dict[str, Any]:
        return {
            "holds": self.holds,
            "monotone": self.monotone,
            "extensions": [list(p) for p in self.extensions],
        }


@dataclass(frozen=True)
class EnlargementReport:
    monotone: MonotonicityCheck
    cyclic: dict[int, MonotonicityCheck]
    identity_residual: float

    @property
    def equivalent(self) -> bool:
        return self.monotone.holds == all(check.holds for check in self.cyclic.values())

    def to_dict(self) -> dict[str, Any]:
        return {
            "monotone": self.monotone.to_dict(),
            "cyclic": {str(k): v.to_dict() for k, v in sorted(self.cyclic.items())},
            "identity_residual": self.identity_residual,
            "equivalent": self.equivalent,
        }


def pair_matrix(M: Relation, c: Coupling) -> np.ndarray:
    """A[i, j] = c(x_i, y_j) for the i-th and j-th pairs of M."""
    M.check_bounds(c)
    return c.table[np.ix_(M.xs, M.ys)]


def _pairwise_check(A: np.ndarray, pairs: tuple[Pair, ...], tol: float) -> MonotonicityCheck:
    d = np.diag(A)
    violation = A + A.T - d[:, None] - d[None, :]
    upper = np.triu(np.ones_like(violation, dtype=bool), k=1)
    if not upper.any():
        return MonotonicityCheck(True, 0.0)

    margin = float(violation[upper].max())
    bad = np.argwhere(upper & (violation > tol))
    if bad.size == 0:
        return MonotonicityCheck(True, margin)
    i, j = bad[0]
    return MonotonicityCheck(False, margin, (pairs[i], pairs[j]))


def _cycle_check(
    A: np.ndarray, pairs: tuple[Pair, ...], order: int, tol: float
) -> MonotonicityCheck:
    """Cycle sums Σ_p A[i_p, i_p] - A[i_{p+1}, i_p] over all order-tuples."""
    k = A.shape[0]
    d = np.diag(A)
    grids = np.ogrid[tuple(slice(0, k) for _ in range(order))]
    total = np.zeros((k,) * order)
    for p in range(order):
        current, following = grids[p], grids[(p + 1) % order]
        total = total + (d[current] - A[following, current])

    worst = float(-total.min())
    bad = total < -tol
    if not bad.any():
        return MonotonicityCheck(True, max(worst, 0.0), order=order)
    flat = int(np.argmax(bad.ravel()))
    cycle = np.unravel_index(flat, total.shape)
    return MonotonicityCheck(
        False, worst, tuple(pairs[int(i)] for i in cycle), order=order
    )


def _enforce_caps(size: int, order: int, caps: dict[int, int], max_order: int) -> None:
    if order < 2:
        raise InvalidInput(f"cycle order must be at least 2, got {order}")
    if order > max_order:
        raise ResourceLimit(f"cycle order {order} exceeds the configured cap {max_order}")
    cap = caps.get(order)
    if order > 2 and (cap is None or size > cap):
        raise ResourceLimit(
            f"{size} pairs at order {order} exceeds the enumeration cap {cap}"
        )


def is_c_monotone(M: Relation, c: Coupling, tol: float = DEFAULT_TOL) -> MonotonicityCheck:
    """c(x₁,y₂) + c(x₂,y₁) <= c(x₁,y₁) + c(x₂,y₂) + tol for every two pairs of M."""
    return _pairwise_check(pair_matrix(M, c), M.pairs, tol)


def is_c_cyclically_monotone(
    M: Relation,
    c: Coupling,
    order: int,
    tol: float = DEFAULT_TOL,
    caps: dict[int, int] | None = None,
    max_order: int = DEFAULT_MAX_CYCLE_ORDER,
) -> MonotonicityCheck:
    caps = DEFAULT_CYCLE_CAPS if caps is None else caps
    _enforce_caps(len(M), order, caps, max_order)
    return _cycle_check(pair_matrix(M, c), M.pairs, order, tol)


def fitzpatrick_table(M: Relation, c: Coupling) -> np.ndarray:
    """F[x, y] = max over (a, b) ∈ M of c(x, b) + c(a, y) - c(a, b)."""
    M.check_bounds(c)
    a, b = M.xs, M.ys
    left = c.table[:, b]
    right = c.table[a, :] - c.table[a, b][:, None]
    return maxplus_product(left, right)


def admissible_extensions(M: Relation, c: Coupling, tol: float = DEFAULT_TOL) -> tuple[Pair, ...]:
    """Pairs (x, y) ∉ M whose addition keeps M c-monotone: F(x, y) - c(x, y) <= tol."""
    slack = fitzpatrick_table(M, c) - c.table
    members = np.zeros_like(slack, dtype=bool)
    members[M.xs, M.ys] = True
    xs, ys = np.nonzero((slack <= tol) & ~members)
    return tuple(zip(xs.tolist(), ys.tolist()))


def is_maximal_c_monotone(
    M: Relation, c: Coupling, tol: float = DEFAULT_TOL
) -> MaximalityCheck:
    """Exhaustive single-pair extension search.

    Monotonicity is a pairwise condition, so M is maximal iff no single pair
    can be added.
    """
    monotone = is_c_monotone(M, c, tol)
    if not monotone.holds:
        return MaximalityCheck(holds=False, monotone=False)
    extensions = admissible_extensions(M, c, tol)
    return MaximalityCheck(holds=not extensions, monotone=True, extensions=extensions)


def extend_to_maximal(
    M: Relation,
    c: Coupling,
    priority: np.ndarray | None = None,
    tol: float = DEFAULT_TOL,
) -> Relation:
    """Grow a c-monotone M to a maximal one, adding one admissible pair at a time.

    Among admissible pairs the one with the smallest ``priority[x, y]`` is
    added first (row-major order when no priority is given).
    """
    if not is_c_monotone(M, c, tol):
        raise InvalidInput("only c-monotone relations can be extended")
    table = c.table
    order = (
        np.arange(table.size, dtype=float).reshape(table.shape)
        if priority is None
        else np.asarray(priority, dtype=float)
    )
    if order.shape != table.shape:
        raise InvalidInput(f"priority must have shape {table.shape}")

    pairs = set(M.pairs)
    F = fitzpatrick_table(M, c)
    members = np.zeros(table.shape, dtype=bool)
    members[M.xs, M.ys] = True

    while True:
        candidates = (F - table <= tol) & ~members
        if not candidates.any():
            break
        ranked = np.where(candidates, order, np.inf)
        x, y = np.unravel_index(int(np.argmin(ranked)), table.shape)
        pairs.add((int(x), int(y)))
        members[x, y] = True
        F = np.maximum(F, table[:, [y]] + table[[x], :] - table[x, y])

    added = len(pairs) - len(M)
    logger.debug("extended relation by %d pairs to size %d", added, len(pairs))
    return Relation(tuple(pairs))


def enlarge(M: Relation) -> Enlargement:
    return Enlargement(source=M, pairs=tuple(((x, y), (y, x)) for x, y in M.pairs))


def enlargement_identity_residual(A: np.ndarray) -> float:
    """max |order-2 C-cycle sum of E_M - 2·(c(x₁,y₁)+c(x₂,y₂)-c(x₁,y₂)-c(x₂,y₁))|."""
    AE = A + A.T
    dE = np.diag(AE)
    d = np.diag(A)
    lhs = dE[:, None] + dE[None, :] - AE - AE.T
    rhs = d[:, None] + d[None, :] - A - A.T
    return float(np.max(np.abs(lhs - 2.0 * rhs)))


def check_enlargement_equivalence(
    M: Relation,
    c: Coupling,
    n_max: int = 4,
    tol: float = DEFAULT_TOL,
    caps: dict[int, int] | None = None,
    max_order: int = DEFAULT_MAX_CYCLE_ORDER,
) -> EnlargementReport:
    """Compare c-monotonicity of M with C-cyclic monotonicity of E_M for orders 2..n_max."""
    caps = DEFAULT_CYCLE_CAPS if caps is None else caps
    A = pair_matrix(M, c)
    AE = A + A.T

    cyclic: dict[int, MonotonicityCheck] = {}
    for order in range(2, n_max + 1):
        _enforce_caps(len(M), order, caps, max_order)
        cyclic[order] = _cycle_check(AE, M.pairs, order, tol)

    report = EnlargementReport(
        monotone=_pairwise_check(A, M.pairs, tol),
        cyclic=cyclic,
        identity_residual=enlargement_identity_residual(A),
    )
    if not report.equivalent:
        logger.warning("enlargement equivalence failed for relation of size %d", len(M))
    if report.identity_residual > IDENTITY_TOL:
        logger.warning("enlargement identity residual %.3e", report.identity_residual)
    return report
