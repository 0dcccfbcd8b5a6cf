import math

import pydantic
import pytest

from cdual.errors import InvalidInput, ResourceLimit
from cdual.models import CheckResult, Instance, RunReport
from cdual.pipeline.runs import (
    ReportBuilder,
    RunOptions,
    run_check_monotone,
    run_invert,
    run_represent,
    run_rearrange,
)
from cdual.utils.serialization import canonical_json


def _check(report: RunReport, name: str) -> CheckResult:
    for check in report.checks:
        if check.name == name:
            return check
    raise AssertionError(f"no check named {name!r} in {[c.name for c in report.checks]}")


@pytest.fixture
def options() -> RunOptions:
    return RunOptions.from_config()


@pytest.fixture
def instance(load_fixture):
    def _instance(name: str) -> Instance:
        return Instance.model_validate(load_fixture(name))

    return _instance


def test_options_take_overrides_but_skip_none():
    options = RunOptions.from_config(tol=1e-7, backend=None)
    assert options.tol == 1e-7
    assert options.backend == RunOptions.from_config().backend


def test_report_builder_rejects_duplicate_checks():
    builder = ReportBuilder(["test"])
    builder.check("a", True)
    with pytest.raises(ValueError):
        builder.check("a", False)
    report = builder.build()
    assert report.passed and report.timings is None


def test_unasserted_checks_do_not_fail_a_report():
    builder = ReportBuilder(["test"])
    builder.check("hypothesis", False, asserted=False)
    assert builder.build().passed


def test_check_monotone_on_staircase(instance, options):
    report = run_check_monotone(instance("staircase"), options, order=4, maximal=True, enlargement=True)
    assert report.passed
    assert _check(report, "maximal").passed
    assert _check(report, "c_cyclically_monotone_order_4").passed
    assert _check(report, "enlargement_equivalence").passed


def test_check_monotone_reports_witness(instance, options):
    report = run_check_monotone(instance("anti_diagonal"), options, order=3)
    assert not report.passed
    failed = _check(report, "c_monotone")
    assert failed.detail["witness"] == [[0, 1], [1, 0]]
    assert failed.residual == pytest.approx(1.0)


def test_cycle_cap_raises_resource_limit(instance, options):
    with pytest.raises(ResourceLimit):
        run_check_monotone(instance("order4_too_large"), options, order=4)


def test_represent_staircase_round_trip(instance, options):
    report = run_represent(instance("staircase"), options)
    assert report.passed
    assert _check(report, "round_trip").passed
    assert _check(report, "sandwich").asserted
    assert _check(report, "hamiltonian_sub_antisymmetry").passed
    assert report.artifacts["recovered"]["pairs"] == [[0, 0], [0, 1], [1, 1], [1, 2], [2, 2]]
    assert report.artifacts["fitzpatrick_guarantee"] == "equality_iff_membership"


def test_represent_non_maximal_relation_warns(instance, options):
    report = run_represent(instance("identity_graph"), options)
    assert _check(report, "recovered_superset").passed
    assert not _check(report, "sandwich").asserted
    assert report.warnings


def test_rearrange_swap(instance, options):
    report = run_rearrange(instance("swap"), options)
    assert report.passed
    assert report.artifacts["value"] == pytest.approx(0.5)
    assert report.artifacts["S"] == [1, 0]
    assert _check(report, "involution").passed
    assert _check(report, "lifting_identity").passed
    assert _check(report, "composite_monotone").passed


def test_rearrange_monotone_map(instance, options):
    report = run_rearrange(instance("identity_graph"), options)
    assert report.passed
    assert _check(report, "diagonal_plan_optimal").passed
    assert _check(report, "diagonal_inclusion").passed
    assert not _check(report, "gradient_consistency").asserted


def test_rearrange_nonuniform_measure(instance, options):
    report = run_rearrange(instance("nonuniform_transport"), options)
    assert report.passed
    assert _check(report, "duality_gap").residual <= 1e-6


def test_rearrange_needs_a_map(instance, options):
    with pytest.raises(InvalidInput):
        run_rearrange(instance("staircase"), options)


def test_invert_quadratic(instance, options):
    report = run_invert(instance("quadratic"), options)
    assert report.passed
    assert report.artifacts["inversion"]["argmin"] == [2]
    assert _check(report, "argmin_on_graph").passed


def test_invert_from_cconvex_phi(instance, options):
    report = run_invert(instance("cconvex_phi"), options)
    assert report.passed
    assert report.artifacts["inversion"]["argmin"] == [0]


def test_invert_without_grid_solution_still_passes(instance, options):
    report = run_invert(instance("arclength_skew"), options)
    assert report.passed
    inversion = report.artifacts["inversion"]
    assert inversion["no_solution_on_grid"] is True
    assert inversion["min"] == pytest.approx(math.pi / 2)


def test_invert_rejects_non_skew_map(load_fixture, options):
    data = load_fixture("arclength_skew")
    data["skew_B"] = list(range(8))
    report = run_invert(Instance.model_validate(data), options)
    assert not report.passed
    assert not _check(report, "c_skew").passed


def test_reports_are_byte_stable(instance, options):
    first = canonical_json(run_rearrange(instance("nonuniform_transport"), options))
    second = canonical_json(run_rearrange(instance("nonuniform_transport"), options))
    assert first == second


def test_timings_only_on_request(instance):
    report = run_represent(instance("staircase"), RunOptions.from_config(timings=True))
    assert "synthesis" in report.timings


def test_instance_validation(load_fixture):
    data = load_fixture("swap")
    data["cost"] = {"family": "table"}
    with pytest.raises(pydantic.ValidationError):
        Instance.model_validate(data)

    data = load_fixture("swap")
    data["mu"] = [1.5, -0.5]
    with pytest.raises(pydantic.ValidationError):
        Instance.model_validate(data)

    data = load_fixture("quadratic")
    data["lagrangian"]["table"][0][0] = "inf"
    parsed = Instance.model_validate(data)
    assert parsed.lagrangian.table[0][0] == math.inf


def test_inner_product_needs_intervals(load_fixture):
    data = load_fixture("order4_too_large")
    data["cost"] = {"family": "inner_product"}
    with pytest.raises(InvalidInput):
        Instance.model_validate(data).build_coupling()


def test_rearrange_circle_rotation(instance, options):
    report = run_rearrange(instance("circle_rotation"), options)
    assert _check(report, "diagonal_plan_optimal").passed
    gradient = _check(report, "gradient_consistency")
    assert gradient.passed and not gradient.asserted
    assert report.artifacts["S"] == list(range(32))


def test_points_format_maps_onto_spaces_and_table_costs(load_fixture):
    parsed = Instance.model_validate(load_fixture("points_staircase"))
    assert parsed.space.kind.value == "interval"
    assert parsed.space.points == [-1.0, 0.0, 1.0]
    assert parsed.yspace is None
    assert parsed.cost.family.value == "table"
    c = parsed.build_coupling()
    assert c.table.tolist() == [[1.0, 0.0, -1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 1.0]]

    parsed = Instance.model_validate(load_fixture("points_metric"))
    assert parsed.space.kind.value == "metric"
    assert parsed.build_coupling().xspace.diameter == 2.0

    parsed = Instance.model_validate({"x_points": [0, 1], "y_points": [0, 1, 2], "cost": [[0, 1, 2], [1, 0, 1]]})
    c = parsed.build_coupling()
    assert (c.n, c.m) == (2, 3)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_points_format_rejects_non_finite_costs(bad):
    with pytest.raises(pydantic.ValidationError):
        Instance.model_validate({"x_points": [0, 1], "cost": [[0, bad], [1, 0]]})


def test_points_format_conflicts_are_rejected(load_fixture):
    data = load_fixture("points_staircase")
    data["space"] = {"kind": "discrete", "n": 3}
    with pytest.raises(pydantic.ValidationError):
        Instance.model_validate(data)
    with pytest.raises(pydantic.ValidationError):
        Instance.model_validate({"y_points": [0, 1], "cost": [[0, 1], [1, 0]]})
    parsed = Instance.model_validate({"metric": [[0, 1, 5], [1, 0, 1], [5, 1, 0]], "cost": [[0] * 3] * 3})
    with pytest.raises(InvalidInput, match="triangle"):
        parsed.build_coupling()


def test_matrix_cost_transport_matches_table_instance(instance, options):
    from_points = run_rearrange(instance("points_transport"), options)
    from_table = run_rearrange(instance("nonuniform_transport"), options)
    assert from_points.passed
    assert from_points.artifacts["value"] == pytest.approx(from_table.artifacts["value"])
    assert from_points.artifacts["S"] == from_table.artifacts["S"]


def test_rearrange_records_measured_slackness(instance, options):
    for name in ("swap", "nonuniform_transport"):
        report = run_rearrange(instance(name), options)
        slackness = _check(report, "complementary_slackness")
        assert slackness.passed and slackness.residual is not None
        assert slackness.residual <= options.duality_tol
        assert slackness.detail["support_size"] >= 1
        integral = _check(report, "integral_H_zero")
        assert integral.passed and integral.residual <= 1e-8
