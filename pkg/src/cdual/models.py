from __future__ import annotations

import math
from enum import Enum
from typing import Annotated, Any, Optional

import pydantic
from pydantic import BaseModel, BeforeValidator, field_validator, model_validator

from cdual import __version__
from cdual.core.ctransform import ValueTable
from cdual.core.inversion import CurveFamily, SkewMap
from cdual.core.monotone import Relation
from cdual.core.selfdual import Lagrangian
from cdual.core.space import (
    Coupling,
    FiniteSpace,
    make_arclength_coupling,
    make_coupling,
    make_inner_product_coupling,
    make_neg_half_sqdist_coupling,
    make_sqdist_coupling,
)
from cdual.core.transport import DiscreteMeasure
from cdual.errors import InvalidInput


def _finite(value: Any) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError("cost entries must be finite reals")
    return value


def _extended(value: Any) -> float:
    """Values in ℝ ∪ {+inf}; null and "inf" both mean +inf."""
    if value is None or value in ("inf", "+inf", "Infinity"):
        return math.inf
    value = float(value)
    if math.isnan(value) or value == -math.inf:
        raise ValueError("values must be finite or +inf")
    return value


FiniteReal = Annotated[float, BeforeValidator(_finite)]
ExtendedReal = Annotated[float, BeforeValidator(_extended)]


# Input models
class SpaceKindModel(str, Enum):
    DISCRETE = "discrete"
    INTERVAL = "interval"
    CIRCLE = "circle"
    TORUS = "torus"
    METRIC = "metric"


class CostFamilyModel(str, Enum):
    TABLE = "table"
    INNER_PRODUCT = "inner_product"
    NEG_HALF_SQDIST = "neg_half_sqdist"
    SQDIST = "sqdist"
    NEG_SQDIST = "neg_sqdist"
    ARCLENGTH = "arclength"


class SpaceModel(BaseModel):
    """A finite space: discrete, a grid on the line, a circle, a torus or a metric table"""

    kind: SpaceKindModel = pydantic.Field(
        default=SpaceKindModel.DISCRETE, description="Kind of space"
    )
    n: Optional[int] = pydantic.Field(
        default=None, ge=1, description="Number of points (discrete and circle)"
    )
    points: Optional[list[FiniteReal]] = pydantic.Field(
        default=None, description="Grid coordinates (interval)"
    )
    shape: Optional[tuple[int, int]] = pydantic.Field(
        default=None, description="Circle sizes (torus)"
    )
    metric: Optional[list[list[FiniteReal]]] = pydantic.Field(
        default=None, description="Distance table (metric)"
    )

    @model_validator(mode="after")
    def _check_kind_fields(self) -> SpaceModel:
        required = {
            SpaceKindModel.DISCRETE: "n",
            SpaceKindModel.CIRCLE: "n",
            SpaceKindModel.INTERVAL: "points",
            SpaceKindModel.TORUS: "shape",
            SpaceKindModel.METRIC: "metric",
        }[self.kind]
        if getattr(self, required) is None:
            raise ValueError(f"a {self.kind.value} space needs '{required}'")
        return self

    def build(self) -> FiniteSpace:
        if self.kind == SpaceKindModel.DISCRETE:
            return FiniteSpace.discrete(self.n)
        if self.kind == SpaceKindModel.CIRCLE:
            return FiniteSpace.circle(self.n)
        if self.kind == SpaceKindModel.INTERVAL:
            return FiniteSpace.interval(self.points)
        if self.kind == SpaceKindModel.TORUS:
            return FiniteSpace.torus(*self.shape)
        return FiniteSpace.from_metric(self.metric)


class CostModel(BaseModel):
    """The coupling c: a closed-form family or an explicit table"""

    family: CostFamilyModel = pydantic.Field(
        default=CostFamilyModel.TABLE, description="Cost family"
    )
    table: Optional[list[list[FiniteReal]]] = pydantic.Field(
        default=None, description="Cost table c[x][y] (family 'table')"
    )

    @model_validator(mode="after")
    def _check_table(self) -> CostModel:
        if self.family == CostFamilyModel.TABLE and self.table is None:
            raise ValueError("a tabulated cost needs 'table'")
        return self


class RelationModel(BaseModel):
    pairs: list[tuple[int, int]] = pydantic.Field(
        min_length=1, description="Pairs (x, y) of the relation"
    )

    def build(self) -> Relation:
        return Relation.from_pairs(self.pairs)


class CurvesModel(BaseModel):
    """Discrete curve family: one index path and parameter list per endpoint pair"""

    pairs: list[tuple[int, int]] = pydantic.Field(description="Endpoint pairs (a, b)")
    paths: list[list[int]] = pydantic.Field(description="Index path from a to b")
    t: list[list[float]] = pydantic.Field(description="Parameters, 0 at a and 1 at b")

    def build(self, size: int) -> CurveFamily:
        return CurveFamily.from_model(size, self.pairs, self.paths, self.t)


class LagrangianModel(BaseModel):
    table: list[list[ExtendedReal]] = pydantic.Field(
        description="L[x][y]; null or \"inf\" stands for +inf"
    )


class Instance(BaseModel):
    """One problem instance; each subcommand reads the sections it needs"""

    name: Optional[str] = pydantic.Field(default=None, description="Instance label")
    space: SpaceModel = pydantic.Field(description="The space X")
    yspace: Optional[SpaceModel] = pydantic.Field(
        default=None, description="The space Y (defaults to X)"
    )
    cost: CostModel = pydantic.Field(description="The coupling c on X×Y")
    relation: Optional[RelationModel] = pydantic.Field(
        default=None, description="Relation M ⊂ X×Y"
    )
    mu: Optional[list[FiniteReal]] = pydantic.Field(
        default=None, description="Probability weights on X (uniform when omitted)"
    )
    map_T: Optional[list[int]] = pydantic.Field(
        default=None, description="Map T: one y-index per x"
    )
    lagrangian: Optional[LagrangianModel] = pydantic.Field(
        default=None, description="A Lagrangian L on X×Y"
    )
    phi: Optional[list[ExtendedReal]] = pydantic.Field(
        default=None, description="A function on X"
    )
    target_p: Optional[int] = pydantic.Field(
        default=None, description="Target y-index for p ∈ ∂̄L(x)"
    )
    skew_B: Optional[list[int]] = pydantic.Field(
        default=None, description="Map B: one y-index per x"
    )
    curves_x: Optional[CurvesModel] = pydantic.Field(default=None, description="Curves on X")
    curves_y: Optional[CurvesModel] = pydantic.Field(default=None, description="Curves on Y")

    @model_validator(mode="before")
    @classmethod
    def _from_points_format(cls, data: Any) -> Any:
        """Accept {"x_points", "y_points", "cost": [[...]], "metric"} documents.

        x_points (or metric) gives X, y_points gives Y when it differs from X,
        and a bare cost matrix becomes a tabulated cost.
        """
        if not isinstance(data, dict):
            return data
        data = dict(data)
        if isinstance(data.get("cost"), list):
            data["cost"] = {"family": CostFamilyModel.TABLE.value, "table": data["cost"]}

        has_points = "x_points" in data or "y_points" in data
        if not has_points and "metric" not in data:
            return data
        if "space" in data:
            raise ValueError("give either 'space' or 'x_points'/'metric', not both")

        x_points = data.pop("x_points", None)
        y_points = data.pop("y_points", None)
        metric = data.pop("metric", None)
        if metric is not None:
            data["space"] = {"kind": SpaceKindModel.METRIC.value, "metric": metric}
        elif x_points is not None:
            data["space"] = {"kind": SpaceKindModel.INTERVAL.value, "points": x_points}
        else:
            raise ValueError("'y_points' needs 'x_points' or 'metric' for X")

        if y_points is not None and y_points != x_points:
            if "yspace" in data:
                raise ValueError("give either 'yspace' or 'y_points', not both")
            data["yspace"] = {"kind": SpaceKindModel.INTERVAL.value, "points": y_points}
        return data

    @field_validator("mu")
    @classmethod
    def _check_mu(cls, mu):
        if mu is not None and any(w < 0 for w in mu):
            raise ValueError("mu weights must be nonnegative")
        return mu

    def require(self, *fields: str) -> None:
        missing = [f for f in fields if getattr(self, f) is None]
        if missing:
            raise InvalidInput(f"instance is missing {', '.join(missing)}")

    def build_coupling(self) -> Coupling:
        X = self.space.build()
        Y = X if self.yspace is None else self.yspace.build()
        family = self.cost.family
        if family == CostFamilyModel.TABLE:
            return make_coupling(self.cost.table, X, Y)
        if family == CostFamilyModel.INNER_PRODUCT:
            if X.coords is None or Y.coords is None:
                raise InvalidInput("inner-product costs need interval spaces")
            return make_inner_product_coupling(X.coords[:, 0], Y.coords[:, 0])
        if self.yspace is not None:
            raise InvalidInput(f"cost family {family.value!r} is defined with Y = X")
        if family == CostFamilyModel.NEG_HALF_SQDIST:
            return make_neg_half_sqdist_coupling(X)
        if family == CostFamilyModel.SQDIST:
            return make_sqdist_coupling(X, 1.0)
        if family == CostFamilyModel.NEG_SQDIST:
            return make_sqdist_coupling(X, -1.0)
        return make_arclength_coupling(X)

    def build_measure(self, space: FiniteSpace) -> DiscreteMeasure:
        if self.mu is None:
            return DiscreteMeasure.uniform(space)
        return DiscreteMeasure(space, self.mu)

    def build_lagrangian(self, c: Coupling) -> Lagrangian:
        self.require("lagrangian")
        return Lagrangian(c, self.lagrangian.table)

    def build_phi(self, c: Coupling) -> ValueTable:
        self.require("phi")
        return ValueTable(c.xspace, self.phi)

    def build_skew(self) -> SkewMap:
        self.require("skew_B")
        return SkewMap(tuple(self.skew_B))

    def build_curves(self, c: Coupling) -> tuple[CurveFamily | None, CurveFamily | None]:
        curves_x = None if self.curves_x is None else self.curves_x.build(c.n)
        curves_y = None if self.curves_y is None else self.curves_y.build(c.m)
        return curves_x, curves_y


# Output models
class CheckResult(BaseModel):
    """One check of a run; only asserted checks decide the exit status"""

    name: str = pydantic.Field(description="Check name")
    passed: bool = pydantic.Field(description="Whether the check passed")
    residual: Optional[float] = pydantic.Field(default=None, description="Worst residual")
    asserted: bool = pydantic.Field(default=True, description="Counts toward the exit status")
    detail: dict[str, Any] = pydantic.Field(default_factory=dict, description="Witnesses and extra values")


class RunReport(BaseModel):
    command: list[str] = pydantic.Field(description="Echo of the command and its options")
    version: str = pydantic.Field(default=__version__, description="cdual version")
    instance_digest: Optional[str] = pydantic.Field(default=None, description="sha256 of the canonical instance")
    seed: Optional[int] = pydantic.Field(default=None, description="Generator seed")
    checks: list[CheckResult] = pydantic.Field(default_factory=list)
    artifacts: dict[str, Any] = pydantic.Field(default_factory=dict)
    warnings: list[str] = pydantic.Field(default_factory=list)
    timings: Optional[dict[str, float]] = pydantic.Field(default=None)

    @pydantic.computed_field
    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks if check.asserted)
