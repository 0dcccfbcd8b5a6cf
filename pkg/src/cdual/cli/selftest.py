"""Seeded acceptance sweeps run by `cdual selftest`.

Each criterion becomes one check in the report, with the number of instances
examined and the first few failures. Runs are deterministic in the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from cdual.cli.generators import (
    random_coupling,
    random_map,
    random_maximal_relation,
    random_measure,
    random_monotone_subset,
    random_phi,
    random_relation,
    rng_for,
)
from cdual.constants import IDENTITY_TOL
from cdual.core.ctransform import ValueTable, c_conjugate
from cdual.core.hamiltonian import (
    check_hamiltonian_properties,
    first_order_ratios,
    gradient_consistency_check,
    hamiltonian_of,
    lipschitz_bound_check,
    single_valuedness_scan,
)
from cdual.core.inversion import (
    CurveFamily,
    SkewMap,
    check_arcwise_convexity,
    is_c_skew,
    minimax_gap,
    minimize_Ip,
)
from cdual.core.monotone import check_enlargement_equivalence
from cdual.core.selfdual import (
    Lagrangian,
    check_sandwich,
    fitzpatrick,
    graph_of_dbar,
    synthesize_selfdual,
)
from cdual.core.space import (
    Coupling,
    FiniteSpace,
    SymmetrizedCoupling,
    make_arclength_coupling,
    make_inner_product_coupling,
    make_neg_half_sqdist_coupling,
    make_sqdist_coupling,
)
from cdual.core.transport import (
    DiscreteMeasure,
    Involution,
    graph_plan_identity,
    monotone_rearrangement,
    solve_dk_sym,
    solve_lifted,
    solve_mk_sym,
)
from cdual.errors import CDualError
from cdual.models import RunReport
from cdual.pipeline.runs import ReportBuilder, RunOptions
from cdual.utils.logger import get_logger

logger = get_logger(__name__)

MAX_REPORTED_FAILURES = 5
SINGLE_VALUED_FRACTION = 0.98
RATIO_BAND = (1.5, 2.5)


@dataclass(frozen=True)
class Scale:
    name: str
    represent_seeds: int
    hamiltonian_seeds: int
    enlargement_seeds: int
    transport_seeds: int
    lifted_seeds: int
    phi_seeds: int
    circle_sizes: tuple[int, ...]


SCALES = {
    "quick": Scale("quick", 10, 10, 20, 8, 5, 5, (32, 64)),
    "full": Scale("full", 100, 100, 200, 50, 20, 20, (32, 64, 128)),
}


@dataclass
class Tally:
    """Pass/fail bookkeeping for one criterion over many instances."""

    instances: int = 0
    worst: float = 0.0
    failures: list[dict[str, Any]] = field(default_factory=list)
    failed: int = 0

    def record(self, ok: bool, label: str, residual: float = 0.0, **detail: Any) -> None:
        self.instances += 1
        if np.isfinite(residual):
            self.worst = max(self.worst, float(residual))
        if not ok:
            self.failed += 1
            if len(self.failures) < MAX_REPORTED_FAILURES:
                self.failures.append({"instance": label, **detail})

    def guard(self, label: str, body: Callable[[], tuple[bool, float]]) -> None:
        """Run one instance; a cdual error counts as a failure of that instance."""
        try:
            ok, residual = body()
        except CDualError as e:
            logger.warning("instance %s raised %s", label, e)
            self.record(False, label, error=e.to_dict())
            return
        self.record(ok, label, residual)

    def emit(self, report: ReportBuilder, name: str, **extra: Any) -> None:
        report.check(
            name,
            self.failed == 0 and self.instances > 0,
            self.worst,
            instances=self.instances,
            failed=self.failed,
            failures=self.failures,
            **extra,
        )


# ----------------------------------------------------------------------
# fixtures shared by several criteria
# ----------------------------------------------------------------------


def quarter_rotation_fixture() -> tuple[Coupling, SkewMap]:
    circle = FiniteSpace.circle(8)
    return make_arclength_coupling(circle), SkewMap(tuple((k + 2) % 8 for k in range(8)))


def three_point_grid() -> Coupling:
    return make_inner_product_coupling([-1.0, 0.0, 1.0], [-1.0, 0.0, 1.0])


def _synthesize_from_maximal(rng: np.random.Generator, n: int, m: int, options: RunOptions):
    c = random_coupling(rng, n, m)
    M = random_maximal_relation(rng, c)
    F = fitzpatrick(M, c, options.tol)
    L = synthesize_selfdual(F.table, F.conjugate, SymmetrizedCoupling(c), options.tol, options.max_iter)
    return M, F, L


# ----------------------------------------------------------------------
# criteria
# ----------------------------------------------------------------------


def check_rotation_constants(report: ReportBuilder) -> None:
    c, B = quarter_rotation_fixture()
    d = c.xspace.metric
    Bi = B.indices
    displacement = float(np.max(np.abs(d[np.arange(8), Bi] - np.pi / 2)))
    cross = d[:, Bi]
    pair_sum = float(np.max(np.abs(cross + cross.T - np.pi)))
    skew = is_c_skew(B, c, IDENTITY_TOL)
    residual = max(displacement, pair_sum, skew.residual)
    report.check(
        "rotation_constants",
        residual <= IDENTITY_TOL,
        residual,
        displacement=displacement,
        pair_sum=pair_sum,
        skew=skew.residual,
    )


def check_represent_sweep(report: ReportBuilder, seed: int, scale: Scale, options: RunOptions) -> None:
    round_trip, sandwich = Tally(), Tally()
    for i in range(scale.represent_seeds):
        rng = rng_for(seed, 2, i)
        n, m = (int(k) for k in rng.integers(2, 7, size=2))
        label = f"{i}:{n}x{m}"
        try:
            M, F, L = _synthesize_from_maximal(rng, n, m, options)
        except CDualError as e:
            round_trip.record(False, label, error=e.to_dict())
            sandwich.record(False, label, error=e.to_dict())
            continue
        recovered = graph_of_dbar(L, options.graph_tol)
        pairs = set() if recovered.empty else set(recovered.relation.pairs)
        round_trip.record(
            F.maximal and pairs == set(M.pairs),
            label,
            L.selfdual_residual,
            missing=sorted(set(M.pairs) - pairs),
            extra=sorted(pairs - set(M.pairs)),
        )
        s = check_sandwich(F, L, options.graph_tol)
        sandwich.record(s.holds, label, max(s.c_le_f, s.f_le_l, s.l_le_fc, s.spread_on_relation))
    round_trip.emit(report, "represent_round_trip")
    sandwich.emit(report, "fitzpatrick_sandwich")


def check_hamiltonian_sweep(report: ReportBuilder, seed: int, scale: Scale, options: RunOptions) -> None:
    tally = Tally()
    for i in range(scale.hamiltonian_seeds):
        rng = rng_for(seed, 4, i)
        n, m = (int(k) for k in rng.integers(2, 9, size=2))

        def body() -> tuple[bool, float]:
            _, _, L = _synthesize_from_maximal(rng, n, m, options)
            props = check_hamiltonian_properties(hamiltonian_of(L), options.graph_tol)
            worst = max(p.residual for p in props.checks if p.asserted)
            return props.passed, worst

        tally.guard(f"{i}:{n}x{m}", body)
    tally.emit(report, "hamiltonian_properties")


def check_enlargement_sweep(report: ReportBuilder, seed: int, scale: Scale, options: RunOptions) -> None:
    tally = Tally()
    monotone = 0
    for i in range(scale.enlargement_seeds):
        rng = rng_for(seed, 5, i)
        c = random_coupling(rng, 5, 5)
        size = int(rng.integers(2, 7))
        M = random_monotone_subset(rng, c, size) if i % 2 == 0 else random_relation(rng, 5, 5, size)

        def body() -> tuple[bool, float]:
            nonlocal monotone
            rep = check_enlargement_equivalence(
                M, c, 4, options.tol, options.cycle_caps, options.max_cycle_order
            )
            monotone += int(rep.monotone.holds)
            return rep.equivalent and rep.identity_residual <= IDENTITY_TOL, rep.identity_residual

        tally.guard(f"{i}:|M|={len(M)}", body)
    tally.emit(report, "enlargement_equivalence", monotone_instances=monotone)


def check_transport_sweep(report: ReportBuilder, seed: int, scale: Scale, options: RunOptions) -> None:
    tally = Tally()
    for i in range(scale.transport_seeds):
        rng = rng_for(seed, 6, i)
        n = int(rng.integers(2, 11))
        c = random_coupling(rng, n, n)
        T = random_map(rng, n, n)
        mu = random_measure(rng, c, uniform=i % 2 == 0)

        def body() -> tuple[bool, float]:
            result = monotone_rearrangement(
                c, T, mu, options.tol, options.max_iter, options.backend, options.duality_tol
            )
            return result.duality_gap <= options.duality_tol, result.duality_gap

        tally.guard(f"{i}:n={n}", body)

    swap_c = make_inner_product_coupling([0.0, 1.0], [0.0, 1.0])
    swap = monotone_rearrangement(
        swap_c, [1, 0], DiscreteMeasure.uniform(swap_c.xspace),
        options.tol, options.max_iter, options.backend, options.duality_tol,
    )
    swap_ok = (
        abs(swap.value - 0.5) <= IDENTITY_TOL
        and isinstance(swap.involution, Involution)
        and swap.involution.mapping == (1, 0)
        and swap.involution.is_involution
    )
    tally.record(swap_ok, "swap", abs(swap.value - 0.5))
    tally.emit(report, "transport_duality_and_support")


def check_lifted_sweep(report: ReportBuilder, seed: int, scale: Scale, options: RunOptions) -> None:
    tally = Tally()
    for i in range(scale.lifted_seeds):
        rng = rng_for(seed, 7, i)
        n = int(rng.integers(2, 11))
        c = random_coupling(rng, n, n)
        T = random_map(rng, n, n)
        mu = random_measure(rng, c, uniform=i % 2 == 0)

        def body() -> tuple[bool, float]:
            _, value = solve_mk_sym(c, T, mu, options.backend)
            lifted = solve_lifted(c, T, mu, options.backend)
            residual = max(abs(lifted.value - 2.0 * value), graph_plan_identity(lifted, T, c))
            return residual <= options.duality_tol, residual

        tally.guard(f"{i}:n={n}", body)
    tally.emit(report, "lifting_identity")


def check_monotone_maps(report: ReportBuilder, options: RunOptions) -> None:
    tally = Tally()
    grid = np.linspace(0.0, 1.0, 6)
    circle = FiniteSpace.circle(32)
    cases = {
        "interval_identity": (make_inner_product_coupling(grid, grid), np.arange(6)),
        "circle32_rotation": (make_neg_half_sqdist_coupling(circle), (np.arange(32) + 1) % 32),
    }
    for label, (c, T) in cases.items():

        def body() -> tuple[bool, float]:
            result = monotone_rearrangement(
                c, T, DiscreteMeasure.uniform(c.xspace),
                options.tol, options.max_iter, options.backend, options.duality_tol,
            )
            ok = result.monotone and result.diagonal_adopted and not result.inclusion_failures
            return ok, result.duality_gap

        tally.guard(label, body)
    tally.emit(report, "monotone_map_diagonal")


def check_circle_refinement(report: ReportBuilder, scale: Scale, options: RunOptions) -> None:
    """Gradient consistency, single-valuedness and Lipschitz bounds on refined circles."""
    gradient, single, lipschitz = Tally(), Tally(), Tally()
    deviations: list[float] = []
    for n in scale.circle_sizes:
        circle = FiniteSpace.circle(n)
        c = make_neg_half_sqdist_coupling(circle)
        T = (np.arange(n) + 1) % n
        label = f"circle{n}"
        try:
            cert = solve_dk_sym(c, T, DiscreteMeasure.uniform(circle), options.tol, options.max_iter, options.backend)
        except CDualError as e:
            for tally in (gradient, single, lipschitz):
                tally.record(False, label, error=e.to_dict())
            continue
        H = hamiltonian_of(cert.lagrangian)
        g = gradient_consistency_check(H, T)
        deviations.append(g.max_deviation)
        gradient.record(g.max_deviation <= 2.0 * g.h, label, g.scaled_deviation, deviation=g.max_deviation)
        sv = single_valuedness_scan(H, options.tie_tol)
        single.record(sv.fraction >= SINGLE_VALUED_FRACTION, label, 1.0 - sv.fraction, fraction=sv.fraction)
        for obj, part in ((cert.lagrangian, "L"), (H, "H")):
            lip = lipschitz_bound_check(obj, options.tol)
            lipschitz.record(lip.holds, f"{label}:{part}", lip.max_ratio / lip.bound, ratio=lip.max_ratio)

    interval = FiniteSpace.uniform_interval(0.0, 1.0, 11)
    c = make_neg_half_sqdist_coupling(interval)

    def interval_body() -> tuple[bool, float]:
        cert = solve_dk_sym(c, np.arange(11), DiscreteMeasure.uniform(interval), options.tol, options.max_iter, options.backend)
        reports = [lipschitz_bound_check(cert.lagrangian, options.tol), lipschitz_bound_check(hamiltonian_of(cert.lagrangian), options.tol)]
        return all(r.holds for r in reports), max(r.max_ratio / r.bound for r in reports)

    lipschitz.guard("interval11", interval_body)

    ratios = first_order_ratios(deviations)
    in_band = all(r is None or RATIO_BAND[0] <= r <= RATIO_BAND[1] for r in ratios)
    if not in_band:
        gradient.record(False, "convergence_ratios", ratios=ratios)
    gradient.emit(report, "gradient_consistency", deviations=deviations, ratios=ratios)
    single.emit(report, "single_valuedness")
    lipschitz.emit(report, "lipschitz_bound")


def check_minimax(report: ReportBuilder, seed: int, options: RunOptions) -> None:
    identity, zero_gap = Tally(), Tally()
    grid = three_point_grid()
    lines = CurveFamily.straight_lines(grid.xspace)

    for p in range(3):
        rep = minimax_gap(np.zeros((3, 3)), SkewMap.constant(3, p), grid, options.tol, lines)
        identity.record(rep.identity_residual <= IDENTITY_TOL and rep.gap >= -IDENTITY_TOL, f"zero_H:p={p}", rep.identity_residual)
        zero_gap.record(abs(rep.gap) <= IDENTITY_TOL and rep.hypothesis.holds, f"zero_H:p={p}", abs(rep.gap))

    x = grid.xspace.coords[:, 0]
    quadratic = 0.5 * (x[None, :] ** 2 - x[:, None] ** 2)
    rep = minimax_gap(quadratic, SkewMap.constant(3, 1), grid, options.tol)
    identity.record(rep.identity_residual <= IDENTITY_TOL and rep.gap >= -IDENTITY_TOL, "quadratic", rep.identity_residual)
    zero_gap.record(abs(rep.gap) <= IDENTITY_TOL, "quadratic", abs(rep.gap))

    c, B = quarter_rotation_fixture()
    rng = rng_for(seed, 12)
    upper = np.triu(rng.integers(-3, 4, size=(8, 8)).astype(float), 1)
    rep = minimax_gap(upper - upper.T, B, c, options.tol)
    identity.record(rep.identity_residual <= IDENTITY_TOL and rep.gap >= -IDENTITY_TOL, "circle8_random", rep.identity_residual)

    L = Lagrangian(grid, 0.5 * (x[:, None] ** 2 + x[None, :] ** 2))
    ip = minimize_Ip(L, 2, grid, options.tol)
    zero_gap.record(abs(ip.min_value) <= IDENTITY_TOL and ip.argmin == (2,), "quadratic_I_p", abs(ip.min_value))

    identity.emit(report, "minimax_identities")
    zero_gap.emit(report, "minimax_zero_gap")


def check_arcwise(report: ReportBuilder, seed: int, scale: Scale, options: RunOptions) -> None:
    positive = Tally()
    grid = FiniteSpace.uniform_interval(-1.0, 1.0, 9)
    # c = +(x - y)²: φ^c is then a max of functions convex in y. With
    # c = -(x - y)² the same sweep is concave and the convexity test flips sign.
    c = make_sqdist_coupling(grid, 1.0)
    lines = CurveFamily.straight_lines(grid)
    base = check_arcwise_convexity(c.table, lines, tol=options.tol)
    positive.record(base.holds, "cost_second_variable", base.worst)
    for i in range(scale.phi_seeds):
        rng = rng_for(seed, 13, i)
        phic = c_conjugate(ValueTable(grid, random_phi(rng, grid.n)), c)
        rep = check_arcwise_convexity(phic.values, lines, tol=options.tol)
        positive.record(rep.holds, f"phi{i}", rep.worst, witness=rep.witness)
    positive.emit(report, "conjugate_arcwise_convex")

    arc, _ = quarter_rotation_fixture()
    rep = check_arcwise_convexity(arc.table, CurveFamily.geodesics(arc.xspace), tol=options.tol)
    antipodal = False
    if rep.witness is not None:
        _, a, b, _ = rep.witness
        antipodal = abs(arc.xspace.metric[a, b] - np.pi) <= IDENTITY_TOL
    report.check(
        "arclength_not_arcwise_convex",
        not rep.holds and antipodal,
        rep.worst,
        witness=rep.witness,
    )


def run_selftest(
    seed: int,
    scale: str = "quick",
    options: RunOptions | None = None,
    command: list[str] | None = None,
) -> RunReport:
    if scale not in SCALES:
        raise ValueError(f"scale must be one of {sorted(SCALES)}")
    sizes = SCALES[scale]
    options = options or RunOptions.from_config()
    report = ReportBuilder(command or ["selftest", "--scale", scale], seed=seed, record_timings=options.timings)
    logger.info("selftest (%s) with seed %d", scale, seed)

    with report.timed("rotation"):
        check_rotation_constants(report)
    with report.timed("represent"):
        check_represent_sweep(report, seed, sizes, options)
    with report.timed("hamiltonian"):
        check_hamiltonian_sweep(report, seed, sizes, options)
    with report.timed("enlargement"):
        check_enlargement_sweep(report, seed, sizes, options)
    with report.timed("transport"):
        check_transport_sweep(report, seed, sizes, options)
    with report.timed("lifted"):
        check_lifted_sweep(report, seed, sizes, options)
    with report.timed("monotone_maps"):
        check_monotone_maps(report, options)
    with report.timed("circles"):
        check_circle_refinement(report, sizes, options)
    with report.timed("minimax"):
        check_minimax(report, seed, options)
    with report.timed("arcwise"):
        check_arcwise(report, seed, sizes, options)
    return report.build()
