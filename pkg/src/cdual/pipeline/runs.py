"""End-to-end runs shared by the command line and the HTTP surface.

Each run takes a validated `Instance`, drives the core modules and returns a
`RunReport` in which every check appears exactly once.
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Iterator

import numpy as np

from cdual.config import Config
from cdual.config import config as default_config
from cdual.constants import DEFAULT_GRAPH_TOL, DEFAULT_INTEGRAL_TOL, LIFTED_CHECK_MAX_POINTS
from cdual.core.hamiltonian import (
    check_hamiltonian_properties,
    hamiltonian_of,
)
from cdual.core.inversion import invert_via_skew, is_c_skew, minimize_Ip
from cdual.core.monotone import (
    check_enlargement_equivalence,
    is_c_cyclically_monotone,
    is_c_monotone,
    is_maximal_c_monotone,
)
from cdual.core.selfdual import (
    check_sandwich,
    fitzpatrick,
    graph_of_dbar,
    is_selfdual,
    selfdual_from_cconvex,
    synthesize_selfdual,
)
from cdual.core.space import SymmetrizedCoupling
from cdual.core.transport import (
    Involution,
    graph_plan_identity,
    monotone_rearrangement,
    solve_lifted,
)
from cdual.models import CheckResult, Instance, RunReport
from cdual.utils.logger import get_logger
from cdual.utils.serialization import instance_digest, to_jsonable

logger = get_logger(__name__)


@dataclass
class RunOptions:
    tol: float
    max_iter: int
    tie_tol: float
    duality_tol: float
    backend: str
    max_cycle_order: int
    cycle_caps: dict[int, int]
    graph_tol: float = DEFAULT_GRAPH_TOL
    timings: bool = False

    @classmethod
    def from_config(cls, cfg: Config | None = None, **overrides: Any) -> RunOptions:
        cfg = cfg or default_config
        options = cls(
            tol=cfg.solver.tol,
            max_iter=cfg.solver.max_iter,
            tie_tol=cfg.solver.tie_tol,
            duality_tol=cfg.solver.duality_tol,
            backend=cfg.solver.lp_backend,
            max_cycle_order=cfg.enumeration.max_cycle_order,
            cycle_caps=dict(cfg.enumeration.cycle_caps),
        )
        for key, value in overrides.items():
            if value is not None:
                setattr(options, key, value)
        return options


@dataclass
class ReportBuilder:
    """Collects checks, artifacts and warnings into a `RunReport`."""

    command: list[str]
    instance: Instance | None = None
    seed: int | None = None
    record_timings: bool = False
    checks: list[CheckResult] = field(default_factory=list)
    artifacts: dict[str, Any] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)

    def check(
        self,
        name: str,
        passed: bool,
        residual: float | None = None,
        asserted: bool = True,
        **detail: Any,
    ) -> bool:
        if any(existing.name == name for existing in self.checks):
            raise ValueError(f"check {name!r} recorded twice")
        result = CheckResult(
            name=name,
            passed=bool(passed),
            residual=None if residual is None else float(residual),
            asserted=asserted,
            detail=to_jsonable(detail),
        )
        self.checks.append(result)
        level = "passed" if result.passed else ("FAILED" if asserted else "not satisfied")
        logger.info("check %-40s %s", name, level)
        return result.passed

    def artifact(self, key: str, value: Any) -> None:
        self.artifacts[key] = to_jsonable(value)

    def warn(self, message: str) -> None:
        logger.warning(message)
        self.warnings.append(message)

    @contextmanager
    def timed(self, label: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = time.perf_counter() - start
            self.timings[label] = elapsed
            logger.debug("%s took %.3fs", label, elapsed)

    def build(self) -> RunReport:
        digest = None
        if self.instance is not None:
            digest = instance_digest(self.instance.model_dump(mode="json"))
        return RunReport(
            command=self.command,
            instance_digest=digest,
            seed=self.seed,
            checks=self.checks,
            artifacts=self.artifacts,
            warnings=self.warnings,
            timings=self.timings if self.record_timings else None,
        )


def run_check_monotone(
    instance: Instance,
    options: RunOptions,
    order: int = 2,
    maximal: bool = False,
    enlargement: bool = False,
    command: list[str] | None = None,
) -> RunReport:
    report = ReportBuilder(command or ["check-monotone"], instance, record_timings=options.timings)
    instance.require("relation")
    c = instance.build_coupling()
    M = instance.relation.build()

    with report.timed("monotone"):
        pairwise = is_c_monotone(M, c, options.tol)
    report.check(
        "c_monotone", pairwise.holds, pairwise.margin, witness=pairwise.witness
    )

    for k in range(3, order + 1):
        with report.timed(f"cyclic_{k}"):
            cyclic = is_c_cyclically_monotone(
                M, c, k, options.tol, options.cycle_caps, options.max_cycle_order
            )
        report.check(
            f"c_cyclically_monotone_order_{k}", cyclic.holds, cyclic.margin, witness=cyclic.witness
        )

    if maximal:
        result = is_maximal_c_monotone(M, c, options.tol)
        report.check(
            "maximal", result.holds, None, extensions=result.extensions, monotone=result.monotone
        )

    if enlargement:
        equivalence = check_enlargement_equivalence(
            M, c, max(order, 2), options.tol, options.cycle_caps, options.max_cycle_order
        )
        report.check("enlargement_equivalence", equivalence.equivalent, None)
        report.check("enlargement_identity", equivalence.identity_residual <= 1e-12, equivalence.identity_residual)

    report.artifact("relation", M)
    return report.build()


def run_represent(
    instance: Instance, options: RunOptions, command: list[str] | None = None
) -> RunReport:
    """Fitzpatrick function, selfdual synthesis and recovery of the relation."""
    report = ReportBuilder(command or ["represent"], instance, record_timings=options.timings)
    instance.require("relation")
    c = instance.build_coupling()
    M = instance.relation.build()
    M.check_bounds(c)

    with report.timed("fitzpatrick"):
        F = fitzpatrick(M, c, options.tol)
    if not F.monotone:
        report.warn("relation is not c-monotone; the recovered graph need not contain it")
    elif not F.maximal:
        report.warn("relation is c-monotone but not maximal; a maximal superset is recovered")

    with report.timed("synthesis"):
        L = synthesize_selfdual(
            F.table, F.conjugate, SymmetrizedCoupling(c), options.tol, options.max_iter
        )
    report.check("selfdual", L.selfdual_residual <= options.tol, L.selfdual_residual, iterations=L.iterations)

    graph = graph_of_dbar(L, options.graph_tol)
    recovered = set() if graph.empty else set(graph.relation.pairs)
    members = set(M.pairs)
    if F.maximal:
        report.check(
            "round_trip",
            recovered == members,
            None,
            missing=sorted(members - recovered),
            extra=sorted(recovered - members),
        )
    elif F.monotone:
        report.check("recovered_superset", members <= recovered, None, missing=sorted(members - recovered))
        report.check("recovered_extensions", True, None, asserted=False, extra=sorted(recovered - members))

    sandwich = check_sandwich(F, L, options.graph_tol)
    report.check(
        "sandwich",
        sandwich.holds,
        max(sandwich.c_le_f, sandwich.f_le_l, sandwich.l_le_fc, sandwich.spread_on_relation),
        asserted=F.maximal,
        **sandwich.to_dict(),
    )

    H = hamiltonian_of(L)
    for prop in check_hamiltonian_properties(H, options.graph_tol).checks:
        report.check(f"hamiltonian_{prop.name}", prop.passed, prop.residual, asserted=prop.asserted, witness=prop.witness)

    report.artifact("fitzpatrick_guarantee", F.guarantee)
    report.artifact("lagrangian", L)
    report.artifact("hamiltonian", H)
    report.artifact("recovered", graph)
    return report.build()


def run_rearrange(
    instance: Instance, options: RunOptions, command: list[str] | None = None
) -> RunReport:
    """Symmetric transport, its selfdual certificate and the involution S."""
    report = ReportBuilder(command or ["rearrange"], instance, record_timings=options.timings)
    instance.require("map_T")
    c = instance.build_coupling()
    mu = instance.build_measure(c.xspace)
    T = np.asarray(instance.map_T, dtype=int)

    with report.timed("rearrangement"):
        result = monotone_rearrangement(
            c, T, mu, options.tol, options.max_iter, options.backend, options.duality_tol
        )

    report.check("duality_gap", result.duality_gap <= options.duality_tol, result.duality_gap)
    support = result.support
    report.check(
        "complementary_slackness",
        support.max_residual <= options.duality_tol,
        support.max_residual,
        support_size=len(support.support),
    )
    report.check("integral_H_zero", abs(support.integral) <= DEFAULT_INTEGRAL_TOL, abs(support.integral))

    if isinstance(result.involution, Involution):
        S = result.involution
        report.check("involution", S.is_involution, None, S=S.mapping)
        report.check("measure_preserving", S.preserves_measure, None)
        report.check(
            "antisymmetry_on_orbits",
            S.antisymmetry_residual <= options.duality_tol,
            S.antisymmetry_residual,
        )
    else:
        report.check("plan_is_graph", False, None, asserted=False, rows=result.involution.rows)

    if result.monotone:
        report.check("diagonal_plan_optimal", result.diagonal_adopted, None)
        report.check("diagonal_inclusion", not result.inclusion_failures, None)
    elif result.composite_monotone is not None:
        report.check("composite_monotone", result.composite_monotone, None, asserted=False)

    if result.gradient is not None:
        g = result.gradient
        report.check(
            "gradient_consistency",
            g.max_deviation <= 2.0 * g.h,
            g.max_deviation,
            asserted=False,
            **g.to_dict(),
        )

    if mu.support.size <= LIFTED_CHECK_MAX_POINTS:
        with report.timed("lifted"):
            lifted = solve_lifted(c, T, mu, options.backend)
        lifting_gap = abs(lifted.value - 2.0 * result.value)
        report.check("lifting_identity", lifting_gap <= options.duality_tol, lifting_gap)
        identity = graph_plan_identity(lifted, T, c)
        report.check("graph_plan_identity", identity <= options.duality_tol, identity)

    report.artifact("plan", result.plan)
    report.artifact("value", result.value)
    report.artifact("certificate", result.certificate)
    report.artifact("lagrangian", result.certificate.lagrangian)
    report.artifact(
        "S", result.involution.mapping if isinstance(result.involution, Involution) else None
    )
    return report.build()


def run_invert(
    instance: Instance, options: RunOptions, command: list[str] | None = None
) -> RunReport:
    """Solve p ∈ ∂̄_c L(x) by minimizing I_p, or Bx ∈ ∂_c φ(x) for a c-skew B."""
    report = ReportBuilder(command or ["invert"], instance, record_timings=options.timings)
    c = instance.build_coupling()
    curves_x, curves_y = instance.build_curves(c)

    if instance.skew_B is not None:
        instance.require("phi")
        B = instance.build_skew()
        skew = is_c_skew(B, c, options.tol)
        report.check("c_skew", skew.holds, skew.residual)
        if not skew.holds:
            return report.build()

        phi = instance.build_phi(c)
        result = invert_via_skew(phi, B, c, options.tol, curves_x, curves_y)
        report.check("young_nonnegative", result.min_value >= -options.tol, result.min_value)
        if result.solved:
            report.check(
                "subdifferential_inclusion",
                all(result.inclusions.values()),
                None,
                inclusions=result.inclusions,
            )
        for name, hypothesis in result.hypotheses.items():
            report.check(f"hypothesis_{name}", hypothesis.holds, hypothesis.worst, asserted=False)
        report.artifact("inversion", result)
        return report.build()

    instance.require("target_p")
    if instance.lagrangian is not None:
        L = instance.build_lagrangian(c)
    else:
        instance.require("phi")
        L = selfdual_from_cconvex(instance.build_phi(c), c, options.tol)
    selfdual = is_selfdual(L, options.graph_tol)
    report.check("selfdual", selfdual.holds, selfdual.residual)

    H = hamiltonian_of(L) if curves_x is not None else None
    result = minimize_Ip(L, instance.target_p, c, options.tol, curves_x, H)
    report.check("I_p_nonnegative", result.min_value >= -options.graph_tol, result.min_value)
    if result.solved and selfdual.holds:
        graph = graph_of_dbar(L, options.graph_tol)
        pairs = set() if graph.empty else set(graph.relation.pairs)
        report.check(
            "argmin_on_graph",
            all((x, instance.target_p) in pairs for x in result.argmin),
            None,
        )
    if result.hypothesis is not None:
        report.check("hypothesis_Fp_first_variable", result.hypothesis.holds, result.hypothesis.worst, asserted=False)
    report.artifact("inversion", result)
    return report.build()
