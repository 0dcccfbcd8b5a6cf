"""
Fitzpatrick functions and C-selfdual Lagrangians.

The C-conjugate of a table L on U = X×Y,

    L^C(y, x) = max over (x₁, y₁) of c(x₁, y) + c(x, y₁) - L(x₁, y₁),

is evaluated as two successive maxes through the Hamiltonian
H(z, x) = max_y c(x, y) - L(z, y):  L^C(y, x) = max_z c(z, y) + H(z, x).
That costs O(n²m) instead of the O(n²m²) double loop.

A selfdual Lagrangian between given bounds is synthesized by the averaging
iteration L ↦ (L + L̄)/2 with L̄(x, y) = L^C(y, x), started from
K = (Φ_C + Φ∘R₁)/2. The residual L - L̄ stays nonnegative and at least halves
every step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterator

import numpy as np

from cdual.constants import DEFAULT_GRAPH_TOL, DEFAULT_MAX_ITER, DEFAULT_TOL
from cdual.core.ctransform import ValueTable, c_conjugate, maxplus_product
from cdual.core.monotone import Relation, fitzpatrick_table, is_maximal_c_monotone
from cdual.core.space import Coupling, SymmetrizedCoupling
from cdual.errors import InvalidInput, NonConvergence
from cdual.utils.logger import get_logger

logger = get_logger(__name__)


def _checked_table(table: Any, shape: tuple[int, int], name: str, finite: bool) -> np.ndarray:
    array = np.asarray(table, dtype=float)
    if array.shape != shape:
        raise InvalidInput(f"{name} must have shape {shape}, got {array.shape}")
    if np.any(np.isnan(array)) or np.any(array == -np.inf):
        raise InvalidInput(f"{name} must be finite or +inf")
    if finite and not np.all(np.isfinite(array)):
        raise InvalidInput(f"{name} must be finite")
    if not np.any(np.isfinite(array)):
        raise InvalidInput(f"{name} is identically +inf")
    return array


def hamiltonian_table(L: np.ndarray, c: Coupling) -> np.ndarray:
    """H[z, x] = max_y c(x, y) - L(z, y)."""
    return maxplus_product(-np.asarray(L, dtype=float), c.table.T)


def product_conjugate(L: np.ndarray, c: Coupling) -> np.ndarray:
    """C-conjugate of a table on X×Y, returned as a table ``[y, x]`` on Y×X."""
    L = _checked_table(L, (c.n, c.m), "L", finite=False)
    return maxplus_product(c.table.T, hamiltonian_table(L, c))


def product_conjugate_dual(g: np.ndarray, c: Coupling) -> np.ndarray:
    """C-conjugate of a table ``[y, x]`` on Y×X back to X×Y.

    g_C(x, y) = max c(x, y₂) + c(x₂, y) - g(y₂, x₂), which is the forward
    conjugate of gᵀ read with swapped arguments.
    """
    g = _checked_table(g, (c.m, c.n), "g", finite=False)
    return product_conjugate(g.T, c).T


@dataclass(frozen=True, eq=False)
class Lagrangian:
    """An extended-real table L[x, y] on X×Y with selfduality metadata."""

    coupling: Coupling
    table: np.ndarray
    selfdual_residual: float | None = None
    tol: float | None = None
    iterations: int | None = None

    def __post_init__(self):
        c = self.coupling
        table = np.array(
            _checked_table(self.table, (c.n, c.m), "L", finite=False), copy=True
        )
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    def conjugate(self) -> np.ndarray:
        return product_conjugate(self.table, self.coupling)

    def residual(self) -> float:
        if self.selfdual_residual is not None:
            return self.selfdual_residual
        return is_selfdual(self).residual

    def to_dict(self) -> dict[str, Any]:
        return {
            "table": self.table.tolist(),
            "residual": self.selfdual_residual,
            "tol": self.tol,
            "iterations": self.iterations,
        }


@dataclass(frozen=True)
class SelfdualCheck:
    holds: bool
    residual: float

    def __bool__(self) -> bool:
        return self.holds


@dataclass(frozen=True, eq=False)
class FitzpatrickFunction:
    """F_{c,M} and its C-conjugate; ``maximal`` records which guarantees apply."""

    relation: Relation
    coupling: Coupling
    table: np.ndarray
    conjugate: np.ndarray
    monotone: bool
    maximal: bool

    @property
    def guarantee(self) -> str:
        if self.maximal:
            return "equality_iff_membership"
        if self.monotone:
            return "lower_bound_only"
        return "none"


@dataclass(frozen=True)
class DbarGraph:
    """Graph of ∂̄_c L with its domain; ``relation`` is None when the graph is empty."""

    relation: Relation | None
    domain: tuple[int, ...]

    @property
    def empty(self) -> bool:
        return self.relation is None

    def to_dict(self) -> dict[str, Any]:
        return {
            "pairs": [] if self.relation is None else [list(p) for p in self.relation],
            "domain": list(self.domain),
            "empty": self.empty,
        }


@dataclass(frozen=True)
class SandwichReport:
    """Violations of c <= F <= L <= F^C∘swap and the spread of all four on M."""

    c_le_f: float
    f_le_l: float
    l_le_fc: float
    spread_on_relation: float
    tol: float

    @property
    def holds(self) -> bool:
        return max(self.c_le_f, self.f_le_l, self.l_le_fc, self.spread_on_relation) <= self.tol

    def to_dict(self) -> dict[str, Any]:
        return {
            "c_le_f": self.c_le_f,
            "f_le_l": self.f_le_l,
            "l_le_fc": self.l_le_fc,
            "spread_on_relation": self.spread_on_relation,
            "holds": self.holds,
        }


def C_conjugate_lagrangian(L: Lagrangian) -> np.ndarray:
    """L^C as a table ``[y, x]``."""
    return L.conjugate()


def is_selfdual(L: Lagrangian, tol: float = DEFAULT_TOL) -> SelfdualCheck:
    residual = float(np.max(np.abs(L.conjugate().T - L.table)))
    return SelfdualCheck(residual <= tol, residual)


def fitzpatrick(M: Relation, c: Coupling, tol: float = DEFAULT_TOL) -> FitzpatrickFunction:
    F = fitzpatrick_table(M, c)
    maximality = is_maximal_c_monotone(M, c, tol)
    if not maximality.holds:
        logger.info(
            "relation of size %d is not maximal c-monotone (monotone=%s); "
            "F = c is only guaranteed on M",
            len(M),
            maximality.monotone,
        )
    return FitzpatrickFunction(
        relation=M,
        coupling=c,
        table=F,
        conjugate=product_conjugate(F, c),
        monotone=maximality.monotone,
        maximal=maximality.holds,
    )


def feasibility_violation(psi: np.ndarray, phi: np.ndarray, c: Coupling) -> float:
    """max over (u, v) of C(u, v) - ψ(u) - φ(v), i.e. max(ψ^C - φ)."""
    return float(np.max(product_conjugate(psi, c) - phi))


def synthesis_iterates(
    psi: np.ndarray, phi: np.ndarray, sc: SymmetrizedCoupling
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (L_k, L̄_k) for the averaging iteration, starting from K."""
    c = sc.base
    Phi = 0.5 * (phi + psi.T)
    L = 0.5 * (product_conjugate_dual(Phi, c) + Phi.T)
    while True:
        Lbar = product_conjugate(L, c).T
        yield L, Lbar
        L = 0.5 * (L + Lbar)


def _check_iterate(
    L: np.ndarray,
    Lbar: np.ndarray,
    previous: np.ndarray | None,
    lower: np.ndarray,
    upper: np.ndarray,
    tol: float,
    k: int,
) -> None:
    violations = {
        "conjugate_below": float(np.max(Lbar - L)),
        "above_lower_bound": float(np.max(lower - L)),
        "below_upper_bound": float(np.max(L - upper)),
        "nonincreasing": 0.0 if previous is None else float(np.max(L - previous)),
    }
    for name, value in violations.items():
        if value > tol:
            raise NonConvergence(
                f"synthesis invariant {name!r} broken at iteration {k} by {value:.3e}",
                residual=value,
                iterations=k,
            )


def synthesize_selfdual(
    psi: np.ndarray,
    phi: np.ndarray,
    sc: SymmetrizedCoupling,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    check_invariants: bool = False,
) -> Lagrangian:
    """A C-selfdual L with L(u) <= (φ(R₁u) + ψ(u))/2, given ψ(u) + φ(v) >= C(u, v)."""
    c = sc.base
    psi = _checked_table(psi, (c.n, c.m), "psi", finite=True)
    phi = _checked_table(phi, (c.m, c.n), "phi", finite=True)

    violation = feasibility_violation(psi, phi, c)
    if violation > tol:
        raise InvalidInput(
            f"bounds are not feasible: C(u, v) exceeds psi(u) + phi(v) by {violation:.3e}"
        )

    Phi = 0.5 * (phi + psi.T)
    lower = product_conjugate_dual(Phi, c)
    upper = Phi.T

    previous = None
    residual = float("inf")
    for k, (L, Lbar) in enumerate(synthesis_iterates(psi, phi, sc)):
        residual = float(np.max(np.abs(L - Lbar)))
        logger.debug("synthesis iteration %d residual %.3e", k, residual)
        if check_invariants:
            _check_iterate(L, Lbar, previous, lower, upper, tol, k)
        if residual <= tol:
            logger.info("synthesis converged in %d iterations (residual %.2e)", k, residual)
            return Lagrangian(c, L, selfdual_residual=residual, tol=tol, iterations=k)
        if k >= max_iter:
            break
        previous = L

    raise NonConvergence(
        f"synthesis did not reach tol={tol:g} in {max_iter} iterations",
        residual=residual,
        iterations=max_iter,
    )


def graph_of_dbar(
    L: Lagrangian, tol: float = DEFAULT_GRAPH_TOL, require_selfdual: bool = True
) -> DbarGraph:
    """{(x, y) : L(x, y) - c(x, y) <= tol} and its projection D_{c,L}."""
    if require_selfdual:
        residual = L.residual()
        if residual > tol:
            raise InvalidInput(f"L is not selfdual (residual {residual:.3e} > {tol:g})")

    gap = L.table - L.coupling.table
    xs, ys = np.nonzero(gap <= tol)
    if xs.size == 0:
        return DbarGraph(relation=None, domain=())
    relation = Relation(tuple(zip(xs.tolist(), ys.tolist())))
    return DbarGraph(relation=relation, domain=tuple(sorted(set(xs.tolist()))))


def selfdual_from_cconvex(phi: ValueTable, c: Coupling, tol: float = DEFAULT_TOL) -> Lagrangian:
    """L(x, y) = φ(x) + φ^c(y); C-selfdual exactly when φ is c-convex."""
    phic = c_conjugate(phi, c).values
    table = phi.values[:, None] + phic[None, :]
    L = Lagrangian(c, table)
    check = is_selfdual(L, tol)
    if not check.holds:
        logger.warning("phi is not c-convex; L = phi + phi^c has residual %.3e", check.residual)
    return Lagrangian(c, table, selfdual_residual=check.residual, tol=tol)


def check_sandwich(F: FitzpatrickFunction, L: Lagrangian, tol: float = DEFAULT_GRAPH_TOL) -> SandwichReport:
    c = F.coupling.table
    upper = F.conjugate.T
    on_m = (F.relation.xs, F.relation.ys)
    stacked = np.stack([c[on_m], F.table[on_m], L.table[on_m], upper[on_m]])
    return SandwichReport(
        c_le_f=float(np.max(c - F.table)),
        f_le_l=float(np.max(F.table - L.table)),
        l_le_fc=float(np.max(L.table - upper)),
        spread_on_relation=float(np.max(stacked.max(axis=0) - stacked.min(axis=0))),
        tol=tol,
    )
