"""
Hamiltonians of Lagrangians and their diagnostics.

H_L(z, x) = max_y c(x, y) - L(z, y) is stored as a table ``[z, x]``. For a
selfdual L the diagonal c-subdifferential x ↦ ∂²_c H(x, x) recovers the
represented c-monotone map, which is what the grid diagnostics probe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from cdual.constants import (
    CONVERGENCE_NOISE_FLOOR,
    DEFAULT_GRAPH_TOL,
    DEFAULT_TIE_TOL,
    DEFAULT_TOL,
    STENCIL_BACKWARD,
    STENCIL_CENTRAL,
    STENCIL_FORWARD,
    STENCILS,
)
from cdual.core.ctransform import ValueTable, c_subdifferential, maxplus_product
from cdual.core.monotone import Relation
from cdual.core.selfdual import DbarGraph, Lagrangian, hamiltonian_table
from cdual.core.space import Coupling, CouplingFamily, FiniteSpace
from cdual.errors import InvalidInput
from cdual.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    lagrangian: Lagrangian
    table: np.ndarray

    @property
    def coupling(self) -> Coupling:
        return self.lagrangian.coupling

    @property
    def space(self) -> FiniteSpace:
        return self.coupling.xspace

    @property
    def antisymmetric_part(self) -> np.ndarray:
        return 0.5 * (self.table - self.table.T)

    def __call__(self, z: int, x: int) -> float:
        return float(self.table[z, x])

    def domain(self, tol: float = DEFAULT_GRAPH_TOL) -> tuple[int, ...]:
        """D_{c,L}: points x with L(x, y) = c(x, y) for some y."""
        gap = self.lagrangian.table - self.coupling.table
        return tuple(np.flatnonzero(gap.min(axis=1) <= tol).tolist())

    def to_dict(self) -> dict[str, Any]:
        return {"table": self.table.tolist()}


@dataclass(frozen=True)
class PropertyCheck:
    name: str
    residual: float
    passed: bool
    asserted: bool = True
    witness: tuple[int, ...] | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "residual": self.residual,
            "passed": self.passed,
            "asserted": self.asserted,
            "witness": None if self.witness is None else list(self.witness),
        }


@dataclass(frozen=True)
class HamiltonianReport:
    checks: tuple[PropertyCheck, ...]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks if check.asserted)

    def __getitem__(self, name: str) -> PropertyCheck:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


@dataclass(frozen=True)
class SingleValuednessReport:
    fraction: float
    multivalued: tuple[int, ...]
    sizes: dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "fraction": self.fraction,
            "multivalued": list(self.multivalued),
            "sizes": {str(k): v for k, v in sorted(self.sizes.items())},
        }


@dataclass(frozen=True)
class GradientReport:
    max_deviation: float
    h: float
    stencil: str
    stencils_used: dict[str, int]
    worst_point: int
    deviations: tuple[float, ...]

    @property
    def scaled_deviation(self) -> float:
        return self.max_deviation / self.h

    def to_dict(self) -> dict[str, Any]:
        return {
            "max_deviation": self.max_deviation,
            "h": self.h,
            "stencil": self.stencil,
            "stencils_used": dict(sorted(self.stencils_used.items())),
            "worst_point": self.worst_point,
        }


@dataclass(frozen=True)
class LipschitzReport:
    max_ratio: float
    bound: float
    holds: bool
    witness: tuple[str, int, int] | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "max_ratio": self.max_ratio,
            "bound": self.bound,
            "holds": self.holds,
            "witness": None if self.witness is None else list(self.witness),
        }


def hamiltonian_of(L: Lagrangian) -> Hamiltonian:
    empty_rows = np.flatnonzero(~np.isfinite(L.table).any(axis=1))
    if empty_rows.size:
        raise InvalidInput(f"L is identically +inf on rows {empty_rows.tolist()}")
    return Hamiltonian(L, hamiltonian_table(L.table, L.coupling))


def lagrangian_from_hamiltonian(H: Hamiltonian) -> np.ndarray:
    """max_z c(z, y) - H(x, z) as a table ``[x, y]``; equals L for selfdual L."""
    return maxplus_product(-H.table, H.coupling.table)


def _row_double_conjugate(rows: np.ndarray, c: Coupling) -> np.ndarray:
    """Double c-conjugate of each row, every row read as a function on X."""
    conj = maxplus_product(-rows, c.table)
    return maxplus_product(-conj, c.table.T)


def _max_check(name: str, residuals: np.ndarray, tol: float, asserted: bool = True) -> PropertyCheck:
    if residuals.size == 0:
        return PropertyCheck(name, 0.0, True, asserted)
    flat = int(np.argmax(residuals))
    worst = float(residuals.ravel()[flat])
    witness = tuple(int(i) for i in np.unravel_index(flat, residuals.shape))
    return PropertyCheck(name, worst, worst <= tol, asserted, witness)


def check_hamiltonian_properties(H: Hamiltonian, tol: float = DEFAULT_GRAPH_TOL) -> HamiltonianReport:
    c = H.coupling
    table = H.table
    conjugate = H.lagrangian.conjugate()
    antisym = H.antisymmetric_part
    domain = np.array(H.domain(tol), dtype=int)

    checks = [
        _max_check(
            "row_c_convexity",
            np.abs(_row_double_conjugate(table, c) - table),
            tol,
        ),
        _max_check(
            "double_conjugate_identity",
            np.abs(_row_double_conjugate(-table.T, c) - table),
            tol,
        ),
        _max_check(
            "sub_antisymmetry",
            np.maximum(table + table.T, 0.0),
            tol,
        ),
        _max_check(
            "reconstruction",
            np.abs(maxplus_product(c.table.T, -table.T) - conjugate),
            tol,
        ),
        _max_check(
            "diagonal_zero_on_domain",
            np.abs(table[domain, domain]),
            tol,
        ),
        _max_check(
            "antisymmetric_reconstruction",
            np.abs(maxplus_product(c.table.T, -antisym.T) - conjugate),
            tol,
        ),
        _max_check(
            "antisymmetric_row_c_convexity",
            np.abs(_row_double_conjugate(antisym, c) - antisym),
            tol,
            asserted=False,
        ),
    ]
    report = HamiltonianReport(tuple(checks))
    for check in checks:
        if check.asserted and not check.passed:
            logger.warning("hamiltonian check %s failed (residual %.3e)", check.name, check.residual)
    return report


def partial_c_subdiff_2(H: Hamiltonian, z: int, x: int, tol: float = DEFAULT_TOL) -> frozenset[int]:
    """c-subdifferential of x' ↦ H(z, x') at x."""
    z = H.space.check_index(z)
    row = ValueTable(H.space, H.table[z])
    return c_subdifferential(row, H.coupling, x, tol)


def diagonal_subdifferential(H: Hamiltonian, x: int, tol: float = DEFAULT_TOL) -> frozenset[int]:
    """∂̃H(x): ∂²_c H(x, x) on the domain, empty off it."""
    if x not in H.domain(tol):
        return frozenset()
    return partial_c_subdiff_2(H, x, x, tol)


def tilde_graph(H: Hamiltonian, tol: float = DEFAULT_TOL) -> DbarGraph:
    domain = H.domain(tol)
    pairs = [(x, y) for x in domain for y in sorted(partial_c_subdiff_2(H, x, x, tol))]
    if not pairs:
        return DbarGraph(relation=None, domain=())
    return DbarGraph(relation=Relation(tuple(pairs)), domain=tuple(sorted({p[0] for p in pairs})))


def _count_distinct(values: np.ndarray, tie_tol: float) -> int:
    if values.size == 0:
        return 0
    ordered = np.sort(values)
    return 1 + int(np.sum(np.diff(ordered) > tie_tol))


def single_valuedness_scan(
    H: Hamiltonian,
    tie_tol: float = DEFAULT_TIE_TOL,
    points: Sequence[int] | None = None,
) -> SingleValuednessReport:
    """Fraction of points whose diagonal c-subdifferential is a singleton.

    Candidates whose analytic c-gradients agree within tie_tol count once.
    """
    points = list(H.space.points if points is None else points)
    if not points:
        raise InvalidInput("single-valuedness scan needs at least one point")
    try:
        grads: np.ndarray | None = H.coupling.grad_x_table()
    except InvalidInput:
        grads = None

    sizes: dict[int, int] = {}
    for x in points:
        candidates = sorted(diagonal_subdifferential(H, x, tie_tol))
        if grads is not None and candidates:
            sizes[x] = _count_distinct(grads[x, candidates], tie_tol)
        else:
            sizes[x] = len(candidates)

    multivalued = tuple(x for x in points if sizes[x] != 1)
    fraction = 1.0 - len(multivalued) / len(points)
    logger.info("single-valued at %.1f%% of %d points", 100 * fraction, len(points))
    return SingleValuednessReport(fraction, multivalued, sizes)


def gradient_consistency_check(
    H: Hamiltonian,
    T: Sequence[int],
    stencil: str = STENCIL_CENTRAL,
    points: Sequence[int] | None = None,
) -> GradientReport:
    """Finite-difference ∇₂H(x, x) against the analytic ∂₁c(x, Tx).

    Where the requested stencil leaves the grid (interval endpoints) the
    one-sided stencil that stays on it is used instead and counted.
    """
    if stencil not in STENCILS:
        raise InvalidInput(f"stencil must be one of {STENCILS}")
    space = H.space
    if not space.is_grid:
        raise InvalidInput("gradient consistency needs a uniform interval or circle grid")
    T = np.asarray(T, dtype=int)
    if T.shape != (space.n,):
        raise InvalidInput(f"map must assign a y-index to each of {space.n} points")
    grads = H.coupling.grad_x_table()
    h = float(space.spacing)
    table = H.table

    used = {name: 0 for name in STENCILS}
    deviations = []
    for x in list(space.points if points is None else points):
        left, right = space.neighbor(x, -1), space.neighbor(x, 1)
        chosen = stencil
        if chosen == STENCIL_CENTRAL and (left is None or right is None):
            chosen = STENCIL_FORWARD if right is not None else STENCIL_BACKWARD
        if chosen == STENCIL_FORWARD and right is None:
            chosen = STENCIL_BACKWARD
        if chosen == STENCIL_BACKWARD and left is None:
            chosen = STENCIL_FORWARD

        if chosen == STENCIL_CENTRAL:
            fd = (table[x, right] - table[x, left]) / (2.0 * h)
        elif chosen == STENCIL_FORWARD:
            fd = (table[x, right] - table[x, x]) / h
        else:
            fd = (table[x, x] - table[x, left]) / h
        used[chosen] += 1
        deviations.append(abs(fd - grads[x, T[x]]))

    deviations_arr = np.asarray(deviations)
    worst = int(np.argmax(deviations_arr))
    report = GradientReport(
        max_deviation=float(deviations_arr[worst]),
        h=h,
        stencil=stencil,
        stencils_used={k: v for k, v in used.items() if v},
        worst_point=worst if points is None else int(list(points)[worst]),
        deviations=tuple(float(d) for d in deviations_arr),
    )
    logger.info(
        "gradient consistency: max deviation %.3e at h=%.3e (%.2f h)",
        report.max_deviation,
        h,
        report.scaled_deviation,
    )
    return report


def first_order_ratios(
    deviations: Sequence[float], floor: float = CONVERGENCE_NOISE_FLOOR
) -> list[float | None]:
    """Ratios dev[k] / dev[k+1] between successive grid refinements.

    A ratio is None when the coarser deviation is already below ``floor``.
    """
    ratios: list[float | None] = []
    for coarse, fine in zip(deviations, deviations[1:]):
        if coarse <= floor:
            ratios.append(None)
        elif fine <= 0.0:
            ratios.append(float("inf"))
        else:
            ratios.append(coarse / fine)
    return ratios


def _slot_ratios(table: np.ndarray, metric: np.ndarray) -> np.ndarray:
    diffs = np.abs(table[:, None, :] - table[None, :, :]).max(axis=2)
    positive = metric > 0
    return np.where(positive, diffs / np.where(positive, metric, 1.0), 0.0)


def lipschitz_bound_check(obj: Lagrangian | Hamiltonian, tol: float = DEFAULT_TOL) -> LipschitzReport:
    """Empirical Lipschitz constant in each slot against 2·diam(X)."""
    if isinstance(obj, Hamiltonian):
        table = obj.table
        c = obj.coupling
        row_metric = col_metric = c.xspace.require_metric()
    else:
        table = obj.table
        c = obj.coupling
        row_metric = c.xspace.require_metric()
        col_metric = c.yspace.require_metric()
    if c.family != CouplingFamily.NEG_HALF_SQDIST:
        raise InvalidInput("the Lipschitz bound applies to the c = -d²/2 family")

    diameter = max(c.xspace.diameter, c.yspace.diameter)
    bound = 2.0 * diameter
    rows = _slot_ratios(table, row_metric)
    cols = _slot_ratios(table.T, col_metric)

    witness = None
    max_ratio = 0.0
    for slot, ratios in (("first", rows), ("second", cols)):
        flat = int(np.argmax(ratios))
        value = float(ratios.ravel()[flat])
        if value > max_ratio:
            i, j = np.unravel_index(flat, ratios.shape)
            max_ratio, witness = value, (slot, int(i), int(j))
    return LipschitzReport(max_ratio, bound, max_ratio <= bound + tol, witness)
