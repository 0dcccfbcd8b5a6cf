"""
Symmetric Monge–Kantorovich transport and its selfdual dual.

For a map T: X → Y and a probability vector μ on X,

    MK_sym(c) = max { Σ π[x, z] c(x, Tz) : π ∈ Γ_sym(μ, μ) }.

Because the admissible plans are symmetric, the objective may be replaced by
the symmetrized cost ĉ[x, z] = (c(x, Tz) + c(z, Tx)) / 2, after which any
optimizer over Γ(μ, μ) symmetrizes to an optimizer over Γ_sym(μ, μ).

The dual side lifts μ to μ̃₁ = (id, T)#μ on X×Y and μ̃₂ = (T, id)#μ on Y×X,
solves the lifted problem for potentials (ψ, φ), canonicalizes them to be
feasible on the whole product and runs the selfdual synthesis on them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import ot
from scipy import sparse
from scipy.optimize import linprog

from cdual.constants import (
    BACKEND_HIGHS,
    BACKEND_NETWORK_SIMPLEX,
    DEFAULT_DUALITY_TOL,
    DEFAULT_INTEGRAL_TOL,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    HIGHS_FEASIBILITY_TOL,
    LP_BACKENDS,
    MARGINAL_TOL,
    MEASURE_SUM_TOL,
    NETWORK_SIMPLEX_MAX_ITER,
    SUPPORT_TOL_FACTOR,
)
from cdual.core.ctransform import maxplus_product
from cdual.core.hamiltonian import (
    GradientReport,
    Hamiltonian,
    gradient_consistency_check,
    hamiltonian_of,
    partial_c_subdiff_2,
)
from cdual.core.monotone import Pair, Relation, is_c_monotone
from cdual.core.selfdual import Lagrangian, product_conjugate_dual, synthesize_selfdual
from cdual.core.space import Coupling, CouplingFamily, FiniteSpace, SymmetrizedCoupling
from cdual.errors import CertificateMismatch, InvalidInput, SolverError
from cdual.utils.logger import get_logger

logger = get_logger(__name__)


# ----------------------------------------------------------------------
# measures, plans and certificates
# ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    space: FiniteSpace
    weights: np.ndarray

    def __post_init__(self):
        weights = np.array(self.weights, dtype=float, copy=True).ravel()
        if weights.shape != (self.space.n,):
            raise InvalidInput(f"expected {self.space.n} weights, got {weights.shape[0]}")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise InvalidInput("measure weights must be finite and nonnegative")
        if abs(weights.sum() - 1.0) > MEASURE_SUM_TOL:
            raise InvalidInput(f"measure weights sum to {weights.sum()!r}, not 1")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, space: FiniteSpace) -> DiscreteMeasure:
        return cls(space, np.full(space.n, 1.0 / space.n))

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)

    @property
    def support_tol(self) -> float:
        """Mass threshold below which a plan entry counts as zero."""
        return SUPPORT_TOL_FACTOR * float(self.weights.max())

    def to_dict(self) -> dict[str, Any]:
        return {"weights": self.weights.tolist()}


@dataclass(frozen=True, eq=False)
class Plan:
    """A symmetric transport plan π ∈ Γ_sym(μ, μ)."""

    matrix: np.ndarray
    measure: DiscreteMeasure

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float, copy=True)
        n = self.measure.space.n
        if matrix.shape != (n, n):
            raise InvalidInput(f"plan must have shape {(n, n)}, got {matrix.shape}")
        if np.any(matrix < -MARGINAL_TOL):
            raise InvalidInput("plan entries must be nonnegative")
        matrix = np.clip(matrix, 0.0, None)
        mu = self.measure.weights
        marginal_error = max(
            np.max(np.abs(matrix.sum(axis=1) - mu)),
            np.max(np.abs(matrix.sum(axis=0) - mu)),
        )
        if marginal_error > MARGINAL_TOL:
            raise InvalidInput(f"plan marginals differ from mu by {marginal_error:.3e}")
        if np.max(np.abs(matrix - matrix.T)) > MARGINAL_TOL:
            raise InvalidInput("plan is not symmetric")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    def support(self, tol: float | None = None) -> tuple[tuple[int, int], ...]:
        tol = self.measure.support_tol if tol is None else tol
        xs, zs = np.nonzero(self.matrix > tol)
        return tuple(zip(xs.tolist(), zs.tolist()))

    def value(self, cost: np.ndarray) -> float:
        return float(np.sum(self.matrix * cost))

    def to_dict(self) -> dict[str, Any]:
        return {"matrix": self.matrix.tolist()}


@dataclass(frozen=True, eq=False)
class DualCertificate:
    """Canonical potentials, the synthesized selfdual L and ∫ L(x, Tx) dμ."""

    psi: np.ndarray
    phi: np.ndarray
    lagrangian: Lagrangian
    objective: float
    anchoring: str
    dual_value: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "objective": self.objective,
            "dual_value": self.dual_value,
            "anchoring": self.anchoring,
            "iterations": self.lagrangian.iterations,
            "selfdual_residual": self.lagrangian.selfdual_residual,
        }


@dataclass(frozen=True)
class Involution:
    mapping: tuple[int, ...]
    is_involution: bool
    preserves_measure: bool
    antisymmetry_residual: float | None = None

    @property
    def is_identity(self) -> bool:
        return all(i == s for i, s in enumerate(self.mapping))

    def to_dict(self) -> dict[str, Any]:
        return {
            "S": list(self.mapping),
            "is_involution": self.is_involution,
            "preserves_measure": self.preserves_measure,
            "antisymmetry_residual": self.antisymmetry_residual,
        }


@dataclass(frozen=True)
class NotAGraph:
    """The optimal plan splits mass: these rows have more than one support entry."""

    rows: tuple[int, ...]

    def to_dict(self) -> dict[str, Any]:
        return {"not_a_graph": True, "rows": list(self.rows)}


@dataclass(frozen=True)
class SupportReport:
    max_residual: float
    integral: float
    support: tuple[tuple[int, int], ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "max_residual": self.max_residual,
            "integral_H": self.integral,
            "support_size": len(self.support),
        }


@dataclass(frozen=True, eq=False)
class OTSolution:
    plan: np.ndarray
    value: float
    psi: np.ndarray
    phi: np.ndarray
    backend: str


@dataclass(frozen=True, eq=False)
class LiftedSolution:
    """Optimum of MK(C, μ̃₁, μ̃₂) over the atoms u_i = (x_i, Tx_i), v_j = (Tx_j, x_j)."""

    points: np.ndarray
    us: tuple[tuple[int, int], ...]
    vs: tuple[tuple[int, int], ...]
    cost: np.ndarray
    solution: OTSolution

    @property
    def value(self) -> float:
        return self.solution.value

    def projected_plan(self, mu: DiscreteMeasure) -> Plan:
        """π(A×B) = (π̃((A×Y)×(Y×B)) + π̃((B×Y)×(Y×A))) / 2."""
        n = mu.space.n
        matrix = np.zeros((n, n))
        idx = np.ix_(self.points, self.points)
        matrix[idx] = 0.5 * (self.solution.plan + self.solution.plan.T)
        return Plan(matrix, mu)


@dataclass(frozen=True, eq=False)
class RearrangementResult:
    plan: Plan
    value: float
    certificate: DualCertificate
    hamiltonian: Hamiltonian
    involution: Involution | NotAGraph
    support: SupportReport
    monotone: bool
    duality_gap: float
    diagonal_adopted: bool = False
    composite_monotone: bool | None = None
    gradient: GradientReport | None = None
    inclusion_failures: tuple[int, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict[str, Any]:
        return {
            "plan": self.plan.to_dict(),
            "value": self.value,
            "certificate": self.certificate.to_dict(),
            "involution": self.involution.to_dict(),
            "support": self.support.to_dict(),
            "monotone": self.monotone,
            "duality_gap": self.duality_gap,
            "diagonal_adopted": self.diagonal_adopted,
            "composite_monotone": self.composite_monotone,
            "gradient": None if self.gradient is None else self.gradient.to_dict(),
        }


# ----------------------------------------------------------------------
# LP backends
# ----------------------------------------------------------------------


def _solve_network_simplex(cost: np.ndarray, a: np.ndarray, b: np.ndarray) -> OTSolution:
    plan, log = ot.emd(a, b, -cost, numItermax=NETWORK_SIMPLEX_MAX_ITER, log=True)
    if log.get("result_code") != 1:
        raise SolverError(f"network simplex stopped with {log.get('warning')!r}")
    plan = np.asarray(plan, dtype=float)
    return OTSolution(
        plan=plan,
        value=float(np.sum(plan * cost)),
        psi=-np.asarray(log["u"], dtype=float),
        phi=-np.asarray(log["v"], dtype=float),
        backend=BACKEND_NETWORK_SIMPLEX,
    )


def _solve_highs(cost: np.ndarray, a: np.ndarray, b: np.ndarray) -> OTSolution:
    k1, k2 = cost.shape
    rows = sparse.kron(sparse.identity(k1), sparse.csr_matrix(np.ones((1, k2))))
    cols = sparse.kron(sparse.csr_matrix(np.ones((1, k1))), sparse.identity(k2))
    result = linprog(
        -cost.ravel(),
        A_eq=sparse.vstack([rows, cols]).tocsr(),
        b_eq=np.concatenate([a, b]),
        bounds=(0, None),
        method="highs-ds",
        options={
            "primal_feasibility_tolerance": HIGHS_FEASIBILITY_TOL,
            "dual_feasibility_tolerance": HIGHS_FEASIBILITY_TOL,
        },
    )
    if result.status != 0:
        raise SolverError(f"HiGHS failed: {result.message}")
    duals = -np.asarray(result.eqlin.marginals, dtype=float)
    plan = np.clip(result.x.reshape(k1, k2), 0.0, None)
    return OTSolution(
        plan=plan,
        value=float(np.sum(plan * cost)),
        psi=duals[:k1],
        phi=duals[k1:],
        backend=BACKEND_HIGHS,
    )


def _solve_ot(
    cost: np.ndarray, a: np.ndarray, b: np.ndarray, backend: str = BACKEND_NETWORK_SIMPLEX
) -> OTSolution:
    """Maximize Σ π cost over Γ(a, b); duals satisfy ψ_i + φ_j >= cost[i, j]."""
    if backend not in LP_BACKENDS:
        raise InvalidInput(f"unknown LP backend {backend!r}; expected one of {LP_BACKENDS}")
    if abs(a.sum() - b.sum()) > MEASURE_SUM_TOL:
        raise InvalidInput("marginals carry different total mass")

    if backend == BACKEND_NETWORK_SIMPLEX:
        try:
            return _solve_network_simplex(cost, a, b)
        except SolverError as e:
            logger.warning("%s; falling back to HiGHS", e)
    return _solve_highs(cost, a, b)


# ----------------------------------------------------------------------
# primal side
# ----------------------------------------------------------------------


def _check_map(T: Sequence[int], c: Coupling) -> np.ndarray:
    T = np.asarray(T)
    if T.shape != (c.n,) or not np.issubdtype(T.dtype, np.integer):
        raise InvalidInput(f"map must list one integer y-index for each of {c.n} points")
    if np.any(T < 0) or np.any(T >= c.m):
        raise InvalidInput(f"map values must lie in [0, {c.m})")
    return T.astype(int)


def _check_measure(mu: DiscreteMeasure, c: Coupling) -> None:
    if mu.space.n != c.n:
        raise InvalidInput(f"measure lives on {mu.space.n} points but X has {c.n}")


def symmetrized_cost(c: Coupling, T: Sequence[int]) -> np.ndarray:
    """ĉ[x, z] = (c(x, Tz) + c(z, Tx)) / 2."""
    T = _check_map(T, c)
    cross = c.table[:, T]
    return 0.5 * (cross + cross.T)


def solve_mk_sym(
    c: Coupling,
    T: Sequence[int],
    mu: DiscreteMeasure,
    backend: str = BACKEND_NETWORK_SIMPLEX,
) -> tuple[Plan, float]:
    _check_measure(mu, c)
    cost = symmetrized_cost(c, T)
    support = mu.support
    weights = mu.weights[support]

    solution = _solve_ot(cost[np.ix_(support, support)], weights, weights, backend)
    matrix = np.zeros_like(cost)
    matrix[np.ix_(support, support)] = 0.5 * (solution.plan + solution.plan.T)
    plan = Plan(matrix, mu)
    value = plan.value(cost)
    logger.info("MK_sym = %.12g (%s, %d atoms)", value, solution.backend, support.size)
    return plan, value


def lifted_cost(
    c: Coupling, T: Sequence[int], points: Sequence[int]
) -> tuple[tuple[Pair, ...], tuple[Pair, ...], np.ndarray]:
    """Atoms u_i = (x_i, Tx_i), v_j = (Tx_j, x_j) over ``points`` and C(u_i, v_j)."""
    T = _check_map(T, c)
    us = tuple((int(x), int(T[x])) for x in points)
    vs = tuple((int(T[x]), int(x)) for x in points)
    return us, vs, SymmetrizedCoupling(c).lifted_table(us, vs)


def solve_lifted(
    c: Coupling,
    T: Sequence[int],
    mu: DiscreteMeasure,
    backend: str = BACKEND_NETWORK_SIMPLEX,
) -> LiftedSolution:
    """Solve MK(C, μ̃₁, μ̃₂) as its own LP; its value is 2·MK_sym(c)."""
    _check_measure(mu, c)
    points = mu.support
    us, vs, cost = lifted_cost(c, T, points)
    weights = mu.weights[points]
    solution = _solve_ot(cost, weights, weights, backend)
    logger.info("MK(C) = %.12g (%s)", solution.value, solution.backend)
    return LiftedSolution(points, us, vs, cost, solution)


def graph_plan_identity(lifted: LiftedSolution, T: Sequence[int], c: Coupling) -> float:
    """Largest violation, over singletons, of the lifted marginal identities

    π̃((A×Y)×(Y×T⁻¹B)) = π̃((A×Y)×(B×X))   for A ⊂ X, B ⊂ Y,
    π̃((T⁻¹A×Y)×(Y×B)) = π̃((X×A)×(Y×B))   for A ⊂ Y, B ⊂ X.
    """
    T = _check_map(T, c)
    P = lifted.solution.plan
    u_x = np.array([u[0] for u in lifted.us])
    u_y = np.array([u[1] for u in lifted.us])
    v_y = np.array([v[0] for v in lifted.vs])
    v_x = np.array([v[1] for v in lifted.vs])

    def mass(rows: np.ndarray, cols: np.ndarray) -> float:
        return float(P[np.ix_(rows, cols)].sum())

    worst = 0.0
    for a in range(c.n):
        for b in range(c.m):
            lhs = mass(u_x == a, T[v_x] == b)
            rhs = mass(u_x == a, v_y == b)
            worst = max(worst, abs(lhs - rhs))
    for a in range(c.m):
        for b in range(c.n):
            lhs = mass(T[u_x] == a, v_x == b)
            rhs = mass(u_y == a, v_x == b)
            worst = max(worst, abs(lhs - rhs))
    return worst


# ----------------------------------------------------------------------
# dual side
# ----------------------------------------------------------------------


def _canonical_potentials(
    c: Coupling, T: np.ndarray, points: np.ndarray, alpha: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Extend support potentials on μ̃₁ to a pair feasible on all of U×V.

    φ(y, x) = max_i C(u_i, (y, x)) - α_i and ψ = φ_C; neither exceeds the
    support values it started from.
    """
    left = c.table[points, :].T - alpha[None, :]
    right = c.table[:, T[points]].T
    phi = maxplus_product(left, right)
    psi = product_conjugate_dual(phi, c)
    return psi, phi


def solve_dk_sym(
    c: Coupling,
    T: Sequence[int],
    mu: DiscreteMeasure,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    backend: str = BACKEND_NETWORK_SIMPLEX,
    check_invariants: bool = False,
) -> DualCertificate:
    """Optimal C-selfdual Lagrangian for DK_sym(c).

    When the graph of T is c-monotone on the support of μ, ψ = φ = c(x, Tx)
    is already an optimal pair for the lifted problem and no LP is solved.
    """
    T = _check_map(T, c)
    _check_measure(mu, c)
    points = mu.support
    weights = mu.weights[points]

    if is_c_monotone(Relation.graph(T, domain=points), c, tol).holds:
        alpha = c.table[points, T[points]]
        anchoring = "graph"
        dual_value = float(2.0 * weights @ alpha)
    else:
        lifted = solve_lifted(c, T, mu, backend)
        alpha = lifted.solution.psi
        anchoring = "lp"
        dual_value = float(weights @ (lifted.solution.psi + lifted.solution.phi))
        if abs(dual_value - lifted.value) > DEFAULT_DUALITY_TOL:
            raise SolverError(
                f"LP duals miss the primal value by {abs(dual_value - lifted.value):.3e}"
            )

    psi, phi = _canonical_potentials(c, T, points, alpha)
    L = synthesize_selfdual(
        psi, phi, SymmetrizedCoupling(c), tol=tol, max_iter=max_iter, check_invariants=check_invariants
    )
    objective = float(mu.weights @ L.table[np.arange(c.n), T])
    logger.info("DK_sym = %.12g (%s potentials)", objective, anchoring)
    return DualCertificate(
        psi=psi,
        phi=phi,
        lagrangian=L,
        objective=objective,
        anchoring=anchoring,
        dual_value=dual_value / 2.0,
    )


def verify_duality(plan_value: float, certificate: DualCertificate, tol: float = DEFAULT_DUALITY_TOL) -> bool:
    return abs(plan_value - certificate.objective) <= tol


# ----------------------------------------------------------------------
# rearrangement data
# ----------------------------------------------------------------------


def extract_support_inclusion(
    plan: Plan,
    L: Lagrangian,
    T: Sequence[int],
    tol: float = DEFAULT_DUALITY_TOL,
    integral_tol: float = DEFAULT_INTEGRAL_TOL,
    H: Hamiltonian | None = None,
) -> SupportReport:
    """c(z, Tx) - H_L(x, z) - L(x, Tx) = 0 on the support of π and ∫ H_L dπ = 0."""
    c = L.coupling
    T = _check_map(T, c)
    H = hamiltonian_of(L) if H is None else H

    support = plan.support()
    worst, witness = 0.0, None
    for x, z in support:
        residual = abs(c.table[z, T[x]] - H.table[x, z] - L.table[x, T[x]])
        if residual > worst:
            worst, witness = residual, (x, z)
    integral = float(np.sum(plan.matrix * H.table))

    if worst > tol:
        raise CertificateMismatch(
            f"complementary slackness fails on the plan support by {worst:.3e}",
            witness=witness,
            residual=worst,
        )
    if abs(integral) > integral_tol:
        raise CertificateMismatch(
            f"integral of H_L against the plan is {integral:.3e}, not 0",
            residual=abs(integral),
        )
    return SupportReport(worst, integral, support)


def extract_involution(
    plan: Plan, H: Hamiltonian | None = None, tol: float | None = None
) -> Involution | NotAGraph:
    """S(x) = the single z with π[x, z] > tol; μ-null rows map to themselves."""
    tol = plan.measure.support_tol if tol is None else tol
    mu = plan.measure.weights
    n = mu.size

    heavy = plan.matrix > tol
    split = tuple(i for i in range(n) if mu[i] > 0 and heavy[i].sum() != 1)
    if split:
        logger.info("optimal plan is not supported on a graph (rows %s)", list(split))
        return NotAGraph(split)

    S = np.arange(n)
    for i in np.flatnonzero(mu > 0):
        S[i] = int(np.flatnonzero(heavy[i])[0])

    pushed = np.zeros(n)
    np.add.at(pushed, S, mu)
    antisymmetry = None
    if H is not None:
        antisymmetry = float(np.max(np.abs(H.table[np.arange(n), S] + H.table[S, np.arange(n)])))
    return Involution(
        mapping=tuple(int(s) for s in S),
        is_involution=bool(np.all(S[S] == np.arange(n))),
        preserves_measure=bool(np.max(np.abs(pushed - mu)) <= MARGINAL_TOL),
        antisymmetry_residual=antisymmetry,
    )


def _gradient_report(H: Hamiltonian, T: np.ndarray) -> GradientReport | None:
    if not H.space.is_grid or H.coupling.family == CouplingFamily.GENERIC:
        return None
    try:
        return gradient_consistency_check(H, T)
    except InvalidInput as e:
        logger.debug("gradient sub-report skipped: %s", e)
        return None


def monotone_rearrangement(
    c: Coupling,
    T: Sequence[int],
    mu: DiscreteMeasure,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    backend: str = BACKEND_NETWORK_SIMPLEX,
    duality_tol: float = DEFAULT_DUALITY_TOL,
) -> RearrangementResult:
    """Optimal symmetric plan, selfdual certificate, involution S and checks.

    For a c-monotone T the diagonal plan is optimal and T(x) ∈ ∂²_c H_L(x, x)
    at every weighted point; both are verified and a failure raises
    CertificateMismatch.
    """
    T = _check_map(T, c)
    plan, value = solve_mk_sym(c, T, mu, backend)
    points = mu.support
    monotone = is_c_monotone(Relation.graph(T, domain=points), c, tol).holds

    diagonal_adopted = False
    if monotone:
        diagonal = Plan(np.diag(mu.weights), mu)
        diagonal_value = diagonal.value(symmetrized_cost(c, T))
        if abs(diagonal_value - value) > duality_tol:
            raise CertificateMismatch(
                f"diagonal plan value {diagonal_value:.12g} misses MK_sym = {value:.12g}",
                residual=abs(diagonal_value - value),
            )
        plan, value, diagonal_adopted = diagonal, diagonal_value, True

    certificate = solve_dk_sym(c, T, mu, tol=tol, max_iter=max_iter, backend=backend)
    gap = abs(value - certificate.objective)
    L = certificate.lagrangian
    H = hamiltonian_of(L)
    support = extract_support_inclusion(plan, L, T, tol=duality_tol, H=H)
    involution = extract_involution(plan, H)

    failures: tuple[int, ...] = ()
    composite = None
    if monotone:
        failures = tuple(
            int(x) for x in points if T[x] not in partial_c_subdiff_2(H, x, x, duality_tol)
        )
        if failures:
            raise CertificateMismatch(
                f"T(x) is missing from the diagonal subdifferential at {len(failures)} points",
                witness=failures[0],
            )
    elif isinstance(involution, Involution):
        S = np.asarray(involution.mapping)
        composite = is_c_monotone(Relation.graph(T[S], domain=points), c, tol).holds

    return RearrangementResult(
        plan=plan,
        value=value,
        certificate=certificate,
        hamiltonian=H,
        involution=involution,
        support=support,
        monotone=monotone,
        duality_gap=gap,
        diagonal_adopted=diagonal_adopted,
        composite_monotone=composite,
        gradient=_gradient_report(H, T),
        inclusion_failures=failures,
    )
