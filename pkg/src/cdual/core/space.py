"""
Finite spaces, ground metrics and couplings.

Tables on X×Y are numpy arrays indexed ``[x, y]``; tables on Y×X are indexed
``[y, x]``. The swaps R₁(x,y) = (y,x) and R₂(y,x) = (x,y) therefore act on
tables as transposition.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Sequence

import numpy as np

from cdual.constants import MAXPLUS_CHUNK_CELLS, TRIANGLE_RTOL
from cdual.errors import InvalidInput
from cdual.utils.logger import get_logger

logger = get_logger(__name__)


class SpaceKind(str, Enum):
    DISCRETE = "discrete"
    METRIC = "metric"
    INTERVAL = "interval"
    CIRCLE = "circle"
    TORUS = "torus"


class CouplingFamily(str, Enum):
    """Closed-form cost families; all but GENERIC know their x-derivative."""

    GENERIC = "generic"
    INNER_PRODUCT = "inner_product"
    NEG_HALF_SQDIST = "neg_half_sqdist"
    SQDIST = "sqdist"
    NEG_SQDIST = "neg_sqdist"
    ARCLENGTH = "arclength"


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float, copy=True)
    array.setflags(write=False)
    return array


def _violates_triangle(metric: np.ndarray) -> bool:
    """Whether d[x, z] > d[x, y] + d[y, z] anywhere, beyond rounding slack."""
    n = metric.shape[0]
    slack = TRIANGLE_RTOL * max(1.0, float(metric.max()))
    rows = max(1, MAXPLUS_CHUNK_CELLS // (n * n))
    for start in range(0, n, rows):
        block = metric[start : start + rows]
        # block[x, y] + metric[y, z] against block[x, z]
        through = block[:, :, None] + metric[None, :, :]
        if np.any(block[:, None, :] > through + slack):
            return True
    return False


@dataclass(frozen=True, eq=False)
class FiniteSpace:
    """An indexed finite set 0..n-1 with optional coordinates and metric."""

    n: int
    coords: np.ndarray | None = None
    metric: np.ndarray | None = None
    kind: SpaceKind = SpaceKind.DISCRETE
    spacing: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInput(f"A finite space needs at least one point, got n={self.n}")

        if self.coords is not None:
            coords = np.asarray(self.coords, dtype=float)
            if coords.ndim == 1:
                coords = coords[:, None]
            if coords.ndim != 2 or coords.shape[0] != self.n:
                raise InvalidInput(
                    f"coords must have {self.n} rows, got shape {coords.shape}"
                )
            if not np.all(np.isfinite(coords)):
                raise InvalidInput("coords must be finite")
            object.__setattr__(self, "coords", _frozen(coords))

        if self.metric is not None:
            metric = np.asarray(self.metric, dtype=float)
            if metric.shape != (self.n, self.n):
                raise InvalidInput(
                    f"metric must be {self.n}x{self.n}, got shape {metric.shape}"
                )
            if not np.all(np.isfinite(metric)):
                raise InvalidInput("metric entries must be finite")
            if np.any(np.diag(metric) != 0.0):
                raise InvalidInput("metric must vanish on the diagonal")
            if not np.array_equal(metric, metric.T):
                raise InvalidInput("metric must be symmetric")
            if np.any(metric < 0.0):
                raise InvalidInput("metric entries must be nonnegative")
            if _violates_triangle(metric):
                raise InvalidInput("metric violates the triangle inequality")
            object.__setattr__(self, "metric", _frozen(metric))

    # ------------------------------------------------------------------
    # constructors
    # ------------------------------------------------------------------

    @classmethod
    def discrete(cls, n: int) -> FiniteSpace:
        return cls(n=n)

    @classmethod
    def from_metric(
        cls, metric: Sequence[Sequence[float]] | np.ndarray, coords: Any = None
    ) -> FiniteSpace:
        metric = np.asarray(metric, dtype=float)
        if metric.ndim != 2:
            raise InvalidInput("metric must be a square table")
        return cls(n=metric.shape[0], coords=coords, metric=metric, kind=SpaceKind.METRIC)

    @classmethod
    def interval(cls, points: Sequence[float] | np.ndarray) -> FiniteSpace:
        """Points on the real line with metric |x - y|.

        The spacing is recorded only when the points are strictly increasing
        and uniformly spaced.
        """
        pts = np.asarray(points, dtype=float).ravel()
        if pts.size == 0:
            raise InvalidInput("interval grid must be nonempty")
        metric = np.abs(pts[:, None] - pts[None, :])
        spacing = None
        if pts.size >= 2:
            steps = np.diff(pts)
            if np.all(steps > 0) and np.allclose(steps, steps[0], rtol=1e-12, atol=0.0):
                spacing = float(steps[0])
        return cls(
            n=pts.size,
            coords=pts,
            metric=metric,
            kind=SpaceKind.INTERVAL,
            spacing=spacing,
        )

    @classmethod
    def uniform_interval(cls, a: float, b: float, n: int) -> FiniteSpace:
        if n < 2 or not b > a:
            raise InvalidInput("uniform interval needs n >= 2 and b > a")
        return cls.interval(np.linspace(a, b, n))

    @classmethod
    def circle(cls, n: int) -> FiniteSpace:
        """n points at angles 2πk/n with arclength metric.

        Distances are step counts times 2π/n, so rotations by whole steps
        have exactly equal displacement at every point.
        """
        if n < 1:
            raise InvalidInput("circle needs at least one point")
        h = 2.0 * np.pi / n
        k = np.arange(n)
        steps = np.abs(k[:, None] - k[None, :])
        steps = np.minimum(steps, n - steps)
        return cls(
            n=n,
            coords=k * h,
            metric=steps * h,
            kind=SpaceKind.CIRCLE,
            spacing=h,
        )

    @classmethod
    def torus(cls, n1: int, n2: int) -> FiniteSpace:
        """Product of two circles; point (i, j) has index i * n2 + j."""
        c1, c2 = cls.circle(n1), cls.circle(n2)
        i, j = np.divmod(np.arange(n1 * n2), n2)
        d1 = c1.metric[np.ix_(i, i)]
        d2 = c2.metric[np.ix_(j, j)]
        coords = np.stack([c1.coords[i, 0], c2.coords[j, 0]], axis=1)
        return cls(
            n=n1 * n2,
            coords=coords,
            metric=np.sqrt(d1**2 + d2**2),
            kind=SpaceKind.TORUS,
        )

    # ------------------------------------------------------------------
    # queries
    # ------------------------------------------------------------------

    @property
    def points(self) -> range:
        return range(self.n)

    @property
    def is_grid(self) -> bool:
        """True for uniform 1-D grids (interval or circle) with known spacing."""
        return self.kind in (SpaceKind.INTERVAL, SpaceKind.CIRCLE) and self.spacing is not None

    def require_metric(self) -> np.ndarray:
        if self.metric is None:
            raise InvalidInput(f"space of kind {self.kind.value!r} has no metric")
        return self.metric

    @property
    def diameter(self) -> float:
        return float(self.require_metric().max())

    def check_index(self, i: int) -> int:
        if not 0 <= int(i) < self.n:
            raise InvalidInput(f"index {i} out of range for a space of {self.n} points")
        return int(i)

    def offsets(self) -> np.ndarray:
        """Signed displacement table ``[i, j]`` from point i to point j.

        On the circle offsets lie in (-π, π]; antipodal pairs get +π.
        """
        if self.kind == SpaceKind.INTERVAL:
            x = self.coords[:, 0]
            return x[None, :] - x[:, None]
        if self.kind == SpaceKind.CIRCLE:
            k = np.arange(self.n)
            steps = np.mod(k[None, :] - k[:, None], self.n)
            steps = np.where(2 * steps > self.n, steps - self.n, steps)
            return steps * self.spacing
        raise InvalidInput(f"signed offsets need a 1-D space, got {self.kind.value!r}")

    def neighbor(self, i: int, step: int) -> int | None:
        """Index of the grid neighbor ``step`` positions away, or None off the grid."""
        if not self.is_grid:
            raise InvalidInput("neighbors are defined only on uniform 1-D grids")
        if self.kind == SpaceKind.CIRCLE:
            return (i + step) % self.n
        j = i + step
        return j if 0 <= j < self.n else None

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "kind": self.kind.value,
            "spacing": self.spacing,
            "coords": None if self.coords is None else self.coords.tolist(),
            "metric": None if self.metric is None else self.metric.tolist(),
        }


@dataclass(frozen=True, eq=False)
class Coupling:
    """A finite real cost table c[x, y] over X×Y."""

    xspace: FiniteSpace
    yspace: FiniteSpace
    table: np.ndarray
    family: CouplingFamily = CouplingFamily.GENERIC

    def __post_init__(self):
        table = np.asarray(self.table, dtype=float)
        expected = (self.xspace.n, self.yspace.n)
        if table.shape != expected:
            raise InvalidInput(f"cost table must have shape {expected}, got {table.shape}")
        if not np.all(np.isfinite(table)):
            raise InvalidInput("cost entries must be finite reals")
        object.__setattr__(self, "table", _frozen(table))

    @property
    def n(self) -> int:
        return self.xspace.n

    @property
    def m(self) -> int:
        return self.yspace.n

    def __call__(self, i: int, j: int) -> float:
        return float(self.table[i, j])

    def check_pair(self, i: int, j: int) -> tuple[int, int]:
        return self.xspace.check_index(i), self.yspace.check_index(j)

    def shifted(self, constant: float) -> Coupling:
        return Coupling(self.xspace, self.yspace, self.table + constant, self.family)

    def grad_x_table(self) -> np.ndarray:
        """Analytic ∂₁c(x, y) for closed-form families, as a table ``[x, y]``."""
        family = self.family
        if family == CouplingFamily.INNER_PRODUCT:
            if self.yspace.coords is None or self.yspace.coords.shape[1] != 1:
                raise InvalidInput("inner-product gradient needs 1-D y coordinates")
            return np.broadcast_to(self.yspace.coords[:, 0], (self.n, self.m)).copy()

        if family == CouplingFamily.GENERIC:
            raise InvalidInput("tabulated couplings have no analytic gradient")
        if self.xspace is not self.yspace:
            raise InvalidInput(f"{family.value} gradient needs X and Y to be one space")

        offset = self.xspace.offsets()
        if family == CouplingFamily.NEG_HALF_SQDIST:
            return offset
        if family == CouplingFamily.SQDIST:
            return -2.0 * offset
        if family == CouplingFamily.NEG_SQDIST:
            return 2.0 * offset
        # arclength: derivative of |y - x| in x
        return -np.sign(offset)

    def grad_x(self, i: int, j: int) -> float:
        return float(self.grad_x_table()[i, j])

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family.value, "cost": self.table.tolist()}


def swap_xy(u: tuple[int, int]) -> tuple[int, int]:
    """R₁: X×Y → Y×X."""
    return (u[1], u[0])


def swap_yx(v: tuple[int, int]) -> tuple[int, int]:
    """R₂: Y×X → X×Y."""
    return (v[1], v[0])


@dataclass(frozen=True, eq=False)
class SymmetrizedCoupling:
    """C((x₁,y₁),(y₂,x₂)) = c(x₁,y₂) + c(x₂,y₁) on (X×Y)×(Y×X)."""

    base: Coupling

    def __call__(self, u: tuple[int, int], v: tuple[int, int]) -> float:
        return eval_C(self, u, v)

    def lifted_table(
        self, us: Sequence[tuple[int, int]], vs: Sequence[tuple[int, int]]
    ) -> np.ndarray:
        """C evaluated on every (u, v) with u from ``us`` and v from ``vs``."""
        c = self.base.table
        ux = np.array([u[0] for u in us], dtype=int)
        uy = np.array([u[1] for u in us], dtype=int)
        vy = np.array([v[0] for v in vs], dtype=int)
        vx = np.array([v[1] for v in vs], dtype=int)
        return c[np.ix_(ux, vy)] + c[np.ix_(vx, uy)].T


# ----------------------------------------------------------------------
# coupling constructors
# ----------------------------------------------------------------------


def make_coupling(
    table: Sequence[Sequence[float]] | np.ndarray,
    xspace: FiniteSpace | None = None,
    yspace: FiniteSpace | None = None,
    family: CouplingFamily = CouplingFamily.GENERIC,
) -> Coupling:
    table = np.asarray(table, dtype=float)
    if table.ndim != 2 or 0 in table.shape:
        raise InvalidInput("cost must be a nonempty 2-D table")
    xspace = xspace or FiniteSpace.discrete(table.shape[0])
    yspace = yspace or FiniteSpace.discrete(table.shape[1])
    return Coupling(xspace, yspace, table, family)


def make_inner_product_coupling(
    xgrid: Sequence[float], ygrid: Sequence[float]
) -> Coupling:
    """c(x, y) = x·y on two real grids."""
    xs = np.asarray(xgrid, dtype=float).ravel()
    ys = np.asarray(ygrid, dtype=float).ravel()
    if xs.size == 0 or ys.size == 0:
        raise InvalidInput("inner-product coupling needs nonempty grids")
    return Coupling(
        FiniteSpace.interval(xs),
        FiniteSpace.interval(ys),
        np.outer(xs, ys),
        CouplingFamily.INNER_PRODUCT,
    )


def make_neg_half_sqdist_coupling(space: FiniteSpace) -> Coupling:
    """c(x, y) = -d(x, y)²/2 with X = Y = space."""
    d = space.require_metric()
    return Coupling(space, space, -0.5 * d**2, CouplingFamily.NEG_HALF_SQDIST)


def make_sqdist_coupling(space: FiniteSpace, sign: float = 1.0) -> Coupling:
    """c(x, y) = ±d(x, y)²."""
    d = space.require_metric()
    family = CouplingFamily.SQDIST if sign > 0 else CouplingFamily.NEG_SQDIST
    return Coupling(space, space, np.copysign(1.0, sign) * d**2, family)


def make_arclength_coupling(circle: FiniteSpace) -> Coupling:
    """c(x, y) = d(x, y) on a circle discretization."""
    d = circle.require_metric()
    if circle.kind != SpaceKind.CIRCLE:
        raise InvalidInput("arclength coupling is defined on circle discretizations")
    return Coupling(circle, circle, d, CouplingFamily.ARCLENGTH)


def eval_C(sc: SymmetrizedCoupling, u: tuple[int, int], v: tuple[int, int]) -> float:
    """C(u, v) for u = (x, y) in X×Y and v = (y', x') in Y×X."""
    c = sc.base
    x, y = c.check_pair(*u)
    xp = c.xspace.check_index(v[1])
    yp = c.yspace.check_index(v[0])
    return float(c.table[x, yp] + c.table[xp, y])
