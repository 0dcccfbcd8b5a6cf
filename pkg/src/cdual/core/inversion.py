"""
Variational inversion of c-monotone maps.

A point p ∈ ∂̄_c L(x₀) is found by minimizing I_p(x) = L(x, p) - c(x, p), whose
infimum is zero exactly when the inclusion is solvable. For c-skew-adjoint B
the same idea solves Bx₀ ∈ ∂_c φ(x₀) through
J(x) = φ(x) + φ^c(Bx) - c(x, Bx).

On finite tables inf-sup and sup-inf are plain mins and maxes, so the minimax
step is computed directly and the arc-wise convexity hypotheses that would
close the gap are checked along explicit discrete curve families.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from cdual.constants import DEFAULT_TOL
from cdual.core.ctransform import (
    ValueTable,
    c_conjugate,
    c_double_conjugate,
    c_subdifferential,
    maxplus_product,
)
from cdual.core.hamiltonian import Hamiltonian
from cdual.core.selfdual import Lagrangian
from cdual.core.space import Coupling, FiniteSpace, SpaceKind
from cdual.errors import InvalidInput
from cdual.utils.logger import get_logger

logger = get_logger(__name__)

Endpoints = tuple[int, int]

FIRST = "first"
SECOND = "second"


@dataclass(frozen=True, eq=False)
class CurveFamily:
    """Discrete paths between ordered pairs of points of one space.

    ``paths[(a, b)]`` runs from a to b and ``params[(a, b)]`` gives its
    parameter values, 0 at a and 1 at b, strictly increasing.
    """

    size: int
    paths: Mapping[Endpoints, tuple[int, ...]]
    params: Mapping[Endpoints, tuple[float, ...]]

    def __post_init__(self):
        for (a, b), path in self.paths.items():
            t = self.params.get((a, b))
            if t is None or len(t) != len(path):
                raise InvalidInput(f"curve {a}->{b} needs one parameter per node")
            if path[0] != a or path[-1] != b:
                raise InvalidInput(f"curve {a}->{b} does not join its endpoints")
            if any(not 0 <= k < self.size for k in path):
                raise InvalidInput(f"curve {a}->{b} leaves the space")
            if t[0] != 0.0 or t[-1] != 1.0 or np.any(np.diff(t) <= 0):
                raise InvalidInput(f"curve {a}->{b} must be parameterized from 0 to 1 increasingly")

    @classmethod
    def straight_lines(cls, space: FiniteSpace) -> CurveFamily:
        """Index paths through the grid points lying between a and b on a line."""
        if space.kind != SpaceKind.INTERVAL:
            raise InvalidInput("straight-line curves need an interval space")
        coords = space.coords[:, 0]
        order = np.argsort(coords, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(space.n)

        paths, params = {}, {}
        for a in space.points:
            for b in space.points:
                if a == b:
                    continue
                step = 1 if rank[b] > rank[a] else -1
                path = tuple(int(order[r]) for r in range(rank[a], rank[b] + step, step))
                span = coords[b] - coords[a]
                paths[(a, b)] = path
                params[(a, b)] = tuple(float((coords[k] - coords[a]) / span) for k in path)
        return cls(space.n, paths, params)

    @classmethod
    def geodesics(cls, circle: FiniteSpace) -> CurveFamily:
        """Shortest index arcs on a circle; antipodal pairs go counterclockwise."""
        if circle.kind != SpaceKind.CIRCLE:
            raise InvalidInput("geodesic curves need a circle space")
        n = circle.n
        paths, params = {}, {}
        for a in range(n):
            for b in range(n):
                if a == b:
                    continue
                forward = (b - a) % n
                step, length = (1, forward) if forward <= n - forward else (-1, n - forward)
                paths[(a, b)] = tuple((a + step * k) % n for k in range(length + 1))
                params[(a, b)] = tuple(k / length for k in range(length + 1))
        return cls(n, paths, params)

    @classmethod
    def from_model(cls, size: int, pairs, paths, params) -> CurveFamily:
        if not len(pairs) == len(paths) == len(params):
            raise InvalidInput("curves need matching pairs, paths and t lists")
        return cls(
            size,
            {(int(a), int(b)): tuple(int(k) for k in p) for (a, b), p in zip(pairs, paths)},
            {(int(a), int(b)): tuple(float(s) for s in t) for (a, b), t in zip(pairs, params)},
        )

    def to_model(self) -> dict[str, Any]:
        pairs = sorted(self.paths)
        return {
            "pairs": [list(p) for p in pairs],
            "paths": [list(self.paths[p]) for p in pairs],
            "t": [list(self.params[p]) for p in pairs],
        }

    def curve(self, a: int, b: int) -> tuple[tuple[int, ...], np.ndarray]:
        if (a, b) not in self.paths:
            raise InvalidInput(f"no curve joins {a} to {b}")
        return self.paths[(a, b)], np.asarray(self.params[(a, b)])


@dataclass(frozen=True)
class SkewMap:
    mapping: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "mapping", tuple(int(y) for y in self.mapping))

    @classmethod
    def constant(cls, n: int, p: int) -> SkewMap:
        return cls((p,) * n)

    @property
    def indices(self) -> np.ndarray:
        return np.asarray(self.mapping, dtype=int)

    def check(self, c: Coupling) -> np.ndarray:
        B = self.indices
        if B.shape != (c.n,) or np.any(B < 0) or np.any(B >= c.m):
            raise InvalidInput(f"B must send each of {c.n} points to a y-index below {c.m}")
        return B


@dataclass(frozen=True)
class SkewCheck:
    holds: bool
    residual: float

    def __bool__(self) -> bool:
        return self.holds


@dataclass(frozen=True)
class ArcwiseReport:
    holds: bool
    worst: float
    variable: str
    concave: bool = False
    witness: tuple[int, int, int, int] | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "holds": self.holds,
            "worst": self.worst,
            "variable": self.variable,
            "concave": self.concave,
            "witness": None
            if self.witness is None
            else dict(zip(("frozen", "start", "end", "node"), self.witness)),
        }


@dataclass(frozen=True)
class IpResult:
    min_value: float
    argmin: tuple[int, ...]
    solved: bool
    hypothesis: ArcwiseReport | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "min": self.min_value,
            "argmin": list(self.argmin),
            "solved": self.solved,
            "no_solution_on_grid": not self.solved,
            "hypothesis": None if self.hypothesis is None else self.hypothesis.to_dict(),
        }


@dataclass(frozen=True)
class MinimaxReport:
    inf_sup: float
    sup_inf: float
    inf_I: float
    identity_residual: float
    skew_residual: float
    hypothesis: ArcwiseReport | None = None

    @property
    def gap(self) -> float:
        return self.inf_sup - self.sup_inf

    def to_dict(self) -> dict[str, Any]:
        return {
            "inf_sup": self.inf_sup,
            "sup_inf": self.sup_inf,
            "gap": self.gap,
            "inf_I": self.inf_I,
            "identity_residual": self.identity_residual,
            "skew_residual": self.skew_residual,
            "hypothesis": None if self.hypothesis is None else self.hypothesis.to_dict(),
        }


@dataclass(frozen=True)
class InversionResult:
    min_value: float
    argmin: tuple[int, ...]
    solved: bool
    skew_residual: float
    inclusions: dict[int, bool] = field(default_factory=dict)
    hypotheses: dict[str, ArcwiseReport] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "min": self.min_value,
            "argmin": list(self.argmin),
            "solved": self.solved,
            "no_solution_on_grid": not self.solved,
            "skew_residual": self.skew_residual,
            "inclusions": {str(k): v for k, v in sorted(self.inclusions.items())},
            "hypotheses": {k: v.to_dict() for k, v in sorted(self.hypotheses.items())},
        }


@dataclass(frozen=True)
class CriterionReport:
    hypothesis_holds: bool
    hypothesis_residual: float
    c_convex: bool
    cc_residual: float
    inf_sup: tuple[float, ...]
    sup_inf: tuple[float, ...]
    hypotheses: dict[str, ArcwiseReport] = field(default_factory=dict)

    @property
    def implication_holds(self) -> bool:
        return self.c_convex or not self.hypothesis_holds

    @property
    def minimax_gap(self) -> float:
        return float(np.max(np.asarray(self.inf_sup) - np.asarray(self.sup_inf)))

    def to_dict(self) -> dict[str, Any]:
        return {
            "hypothesis_holds": self.hypothesis_holds,
            "hypothesis_residual": self.hypothesis_residual,
            "c_convex": self.c_convex,
            "cc_residual": self.cc_residual,
            "implication_holds": self.implication_holds,
            "minimax_gap": self.minimax_gap,
            "hypotheses": {k: v.to_dict() for k, v in sorted(self.hypotheses.items())},
        }


# ----------------------------------------------------------------------
# arc-wise convexity
# ----------------------------------------------------------------------


def check_arcwise_convexity(
    F: np.ndarray,
    curves: CurveFamily | Mapping[int, CurveFamily],
    variable: str = SECOND,
    uniform: bool = True,
    tol: float = DEFAULT_TOL,
    frozen: Sequence[int] | None = None,
    concave: bool = False,
) -> ArcwiseReport:
    """Chord inequality F(ζ(t)) <= (1-t)F(ζ(0)) + tF(ζ(1)) at every node of every curve.

    ``F`` is a table ``[x, y]`` (the other variable is frozen) or a single
    function given as a 1-D array. With ``uniform=False`` each frozen index
    may bring its own family, passed as a mapping. ``concave`` flips the
    inequality. The witness is the worst violation, first in
    (start, end, frozen, node) order among ties.
    """
    if variable not in (FIRST, SECOND):
        raise InvalidInput(f"variable must be {FIRST!r} or {SECOND!r}")
    table = np.asarray(F, dtype=float)
    if table.ndim == 1:
        table, variable = table[None, :], SECOND
    elif variable == FIRST:
        table = table.T
    rows = list(range(table.shape[0]) if frozen is None else frozen)

    if uniform:
        if not isinstance(curves, CurveFamily):
            raise InvalidInput("uniform arc-wise convexity takes a single curve family")
        families = {row: curves for row in rows}
    else:
        families = {row: curves if isinstance(curves, CurveFamily) else curves[row] for row in rows}

    sign = -1.0 if concave else 1.0
    size = table.shape[1]
    worst, witness = -np.inf, None
    for a in range(size):
        for b in range(size):
            if a == b:
                continue
            for row in rows:
                path, t = families[row].curve(a, b)
                values = sign * table[row, list(path)]
                start, end = values[0], values[-1]
                if not (np.isfinite(start) and np.isfinite(end)):
                    continue
                violation = values - ((1.0 - t) * start + t * end)
                k = int(np.argmax(violation))
                if violation[k] > worst:
                    worst, witness = float(violation[k]), (row, a, b, int(path[k]))

    if witness is None:
        return ArcwiseReport(True, 0.0, variable, concave)
    holds = worst <= tol
    return ArcwiseReport(holds, max(worst, 0.0), variable, concave, None if holds else witness)


# ----------------------------------------------------------------------
# skew-adjoint maps and minimax
# ----------------------------------------------------------------------


def _skew_residual(B: np.ndarray, c: Coupling) -> float:
    A = c.table[:, B]
    d = np.diag(A)
    return float(np.max(np.abs(d[:, None] + d[None, :] - A - A.T)))


def is_c_skew(B: SkewMap, c: Coupling, tol: float = DEFAULT_TOL) -> SkewCheck:
    """c(x₁, Bx₁) + c(x₂, Bx₂) = c(x₁, Bx₂) + c(x₂, Bx₁) for all x₁, x₂."""
    residual = _skew_residual(B.check(c), c)
    return SkewCheck(residual <= tol, residual)


def minimize_Ip(
    L: Lagrangian,
    p: int,
    c: Coupling | None = None,
    tol: float = DEFAULT_TOL,
    curves: CurveFamily | None = None,
    H: Hamiltonian | None = None,
) -> IpResult:
    """min over x of I_p(x) = L(x, p) - c(x, p); lowest indices first in the argmin."""
    c = L.coupling if c is None else c
    p = c.yspace.check_index(p)
    I = L.table[:, p] - c.table[:, p]
    lowest = float(np.min(I))
    if lowest < -tol:
        logger.warning("I_p dips to %.3e below zero; L is not selfdual within tol", lowest)
    argmin = tuple(np.flatnonzero(I <= lowest + tol).tolist())

    hypothesis = None
    if curves is not None:
        if H is None:
            raise InvalidInput("the I_p hypothesis report needs the Hamiltonian of L")
        hypothesis = check_arcwise_convexity(
            H.table - c.table[:, [p]], curves, variable=FIRST, tol=tol
        )
    return IpResult(lowest, argmin, lowest <= tol, hypothesis)


def minimax_gap(
    H: Hamiltonian | np.ndarray,
    B: SkewMap,
    c: Coupling,
    tol: float = DEFAULT_TOL,
    curves: CurveFamily | None = None,
) -> MinimaxReport:
    """inf_x sup_z and sup_z inf_x of G(x, z) = H(z, x) + c(z, Bz) - c(x, Bz).

    With antisymmetric H and c-skew B, sup_z G(x, ·) = I(x) and
    inf_x G(·, z) = -I(z) where I(x) = L_H(x, Bx) - c(x, Bx).
    """
    table = np.asarray(H.table if isinstance(H, Hamiltonian) else H, dtype=float)
    if table.shape != (c.n, c.n):
        raise InvalidInput(f"H must be a {c.n}×{c.n} table")
    antisymmetry = float(np.max(np.abs(table + table.T)))
    if antisymmetry > tol:
        raise InvalidInput(f"H is not antisymmetric (residual {antisymmetry:.3e})")
    Bi = B.check(c)

    cross = c.table[:, Bi]
    G = table.T + np.diag(cross)[None, :] - cross
    inf_sup = float(G.max(axis=1).min())
    sup_inf = float(G.min(axis=0).max())

    L_H = maxplus_product(-table, c.table)
    I = L_H[np.arange(c.n), Bi] - np.diag(cross)
    inf_I = float(I.min())
    identity = max(abs(inf_sup - inf_I), abs(sup_inf + inf_I))

    hypothesis = None
    if curves is not None:
        hypothesis = check_arcwise_convexity(table - cross, curves, variable=FIRST, tol=tol)
    report = MinimaxReport(inf_sup, sup_inf, inf_I, identity, _skew_residual(Bi, c), hypothesis)
    if report.gap < -tol:
        logger.warning("weak duality broken: inf sup %.6g < sup inf %.6g", inf_sup, sup_inf)
    return report


def invert_via_skew(
    phi: ValueTable,
    B: SkewMap,
    c: Coupling,
    tol: float = DEFAULT_TOL,
    curves_x: CurveFamily | None = None,
    curves_y: CurveFamily | None = None,
) -> InversionResult:
    """min over x of J(x) = φ(x) + φ^c(Bx) - c(x, Bx); each zero solves Bx ∈ ∂_c φ(x)."""
    skew = is_c_skew(B, c, tol)
    if not skew.holds:
        raise InvalidInput(f"B is not c-skew-adjoint (residual {skew.residual:.3e})")
    Bi = B.indices
    phic = c_conjugate(phi, c).values
    rows = np.arange(c.n)
    J = phi.values + phic[Bi] - c.table[rows, Bi]
    lowest = float(np.min(J))
    argmin = tuple(np.flatnonzero(J <= lowest + tol).tolist())
    solved = lowest <= tol

    inclusions = {}
    if solved:
        inclusions = {x: int(Bi[x]) in c_subdifferential(phi, c, x, tol) for x in argmin}

    hypotheses = {}
    if curves_y is not None:
        hypotheses["c_second_variable"] = check_arcwise_convexity(c.table, curves_y, SECOND, tol=tol)
    if curves_x is not None:
        hypotheses["phi_minus_c_first_variable"] = check_arcwise_convexity(
            phi.values[:, None] - c.table, curves_x, FIRST, tol=tol
        )
    if not solved:
        logger.info("J stays above zero (min %.6g); no solution on the grid", lowest)
    return InversionResult(lowest, argmin, solved, skew.residual, inclusions, hypotheses)


def check_cconvexity_criterion(
    phi: ValueTable,
    c: Coupling,
    tol: float = DEFAULT_TOL,
    curves_x: CurveFamily | None = None,
    curves_y: CurveFamily | None = None,
) -> CriterionReport:
    """Test max_y c(x, y) - c(z, y) >= φ(x) - φ(z) and whether φ^cc = φ follows.

    Both sides of the minimax step are reported per x, with
    F_x(z, y) = c(x, y) - c(z, y) + φ(z): sup_y inf_z F_x = φ^cc(x) and
    inf_z sup_y F_x, which equals φ(x) under the hypothesis.
    """
    values = phi.values
    finite = phi.finite_mask
    oscillation = maxplus_product(c.table, -c.table.T)

    v = values[finite]
    gaps = v[:, None] - v[None, :] - oscillation[np.ix_(finite, finite)]
    hypothesis_residual = float(np.max(gaps))

    phicc = c_double_conjugate(phi, c).values
    cc_residual = float(np.max(np.abs(phicc - values)))
    inf_sup = np.where(finite[None, :], values[None, :] + oscillation, np.inf).min(axis=1)

    hypotheses = {}
    if curves_x is not None:
        hypotheses["phi_minus_c_first_variable"] = check_arcwise_convexity(
            values[:, None] - c.table, curves_x, FIRST, tol=tol
        )
    if curves_y is not None:
        reports = [
            check_arcwise_convexity(
                c.table[x][None, :] - c.table, curves_y, SECOND, tol=tol, concave=True
            )
            for x in range(c.n)
        ]
        hypotheses["coupling_difference_second_variable"] = max(reports, key=lambda r: r.worst)

    return CriterionReport(
        hypothesis_holds=hypothesis_residual <= tol,
        hypothesis_residual=max(hypothesis_residual, 0.0),
        c_convex=cc_residual <= tol,
        cc_residual=cc_residual,
        inf_sup=tuple(float(v) for v in inf_sup),
        sup_inf=tuple(float(v) for v in phicc),
        hypotheses=hypotheses,
    )
