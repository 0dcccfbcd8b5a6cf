"""Command-line entry point: `cdual <subcommand> [options]`.

Reports go to stdout (or --json-out) as canonical JSON; logs go to stderr.
Exit codes: 0 all asserted checks passed, 1 an asserted check failed,
2 invalid input, 3 resource limit, 4 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

import pydantic

from cdual import __version__
from cdual.config import config
from cdual.constants import (
    EXIT_ASSERTION_FAILED,
    EXIT_INPUT_ERROR,
    EXIT_OK,
    EXIT_SOLVER_FAILURE,
    LP_BACKENDS,
)
from cdual.errors import CDualError, InvalidInput
from cdual.models import Instance, RunReport
from cdual.pipeline.runs import (
    RunOptions,
    run_check_monotone,
    run_invert,
    run_represent,
    run_rearrange,
)
from cdual.utils.logger import configure_logging, get_logger
from cdual.utils.serialization import canonical_json

logger = get_logger(__name__)


def _common_options(suppress: bool = False) -> argparse.ArgumentParser:
    """Options accepted before and after the subcommand.

    Subcommand copies default to SUPPRESS and only set values given after
    the subcommand.
    """

    def default(value: Any) -> Any:
        return argparse.SUPPRESS if suppress else value

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=default(None), help="Numerical tolerance (default from CDUAL_TOL)")
    common.add_argument("--max-iter", type=int, default=default(None), help="Iteration limit for the synthesis")
    common.add_argument("--seed", type=int, default=default(None), help="Seed for generators and sweeps")
    common.add_argument("--json-out", type=Path, default=default(None), help="Write the report here instead of stdout")
    common.add_argument("--timings", action="store_true", default=default(False), help="Include wall-clock timings in the report")
    common.add_argument("--backend", choices=LP_BACKENDS, default=default(None), help="LP backend for transport problems")
    common.add_argument("--log-level", default=default(None), help="Log level (default from LOG_LEVEL)")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options(suppress=True)
    ap = argparse.ArgumentParser(
        prog="cdual",
        description="Metric c-convex analysis on finite spaces: monotone relations, "
        "selfdual Lagrangians, symmetric transport and inversion.",
        parents=[_common_options()],
    )
    ap.add_argument("--version", action="version", version=f"cdual {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-monotone", parents=[common], help="c-monotonicity of a relation")
    p.add_argument("instance", help="Instance JSON file, or - for stdin")
    p.add_argument("--order", type=int, default=2, help="Highest cycle order to check")
    p.add_argument("--maximal", action="store_true", help="Also test maximality")
    p.add_argument("--enlargement", action="store_true", help="Also compare with the enlarged relation")

    p = sub.add_parser("represent", parents=[common], help="Selfdual Lagrangian representing a relation")
    p.add_argument("instance", help="Instance JSON file, or - for stdin")

    p = sub.add_parser("rearrange", parents=[common], help="Symmetric transport and its involution")
    p.add_argument("instance", help="Instance JSON file, or - for stdin")

    p = sub.add_parser("invert", parents=[common], help="Solve p in the subdifferential, or Bx in ∂_c φ(x)")
    p.add_argument("instance", help="Instance JSON file, or - for stdin")

    p = sub.add_parser("selftest", parents=[common], help="Seeded acceptance sweeps")
    p.add_argument("--scale", choices=("quick", "full"), default="quick")

    p = sub.add_parser("generate", parents=[common], help="Write a seeded random instance")
    p.add_argument("kind", choices=("relation", "maximal", "transport"))
    p.add_argument("--size", type=int, default=4, help="Number of points in X and Y")
    p.add_argument("--out", type=Path, default=None, help="Output file (default stdout)")
    return ap


def load_instance(source: str) -> Instance:
    try:
        if source == "-":
            text = sys.stdin.read()
        else:
            text = config.storage.resolve_instance(source).read_text(encoding="utf-8")
    except OSError as e:
        raise InvalidInput(f"cannot read instance {source!r}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidInput(f"instance {source!r} is not valid JSON: {e}") from e
    return Instance.model_validate(data)


def _emit(payload: Any, target: Path | None) -> None:
    text = canonical_json(payload)
    if target is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        target.write_text(text, encoding="utf-8")
        logger.info("report written to %s", target)


def _require_seed(args: argparse.Namespace) -> int:
    if args.seed is None:
        raise InvalidInput(f"'{args.command}' needs --seed")
    return args.seed


def _dispatch(args: argparse.Namespace, command: list[str]) -> RunReport | None:
    try:
        config.validate()
    except ValueError as e:
        raise InvalidInput(f"invalid configuration: {e}") from e
    options = RunOptions.from_config(
        config, tol=args.tol, max_iter=args.max_iter, backend=args.backend, timings=args.timings
    )
    if args.command == "generate":
        from cdual.cli.generators import generate_instance

        instance = generate_instance(args.kind, _require_seed(args), args.size)
        _emit(instance, args.out)
        return None
    if args.command == "selftest":
        from cdual.cli.selftest import run_selftest

        config.print_config()
        return run_selftest(_require_seed(args), args.scale, options, command)

    instance = load_instance(args.instance)
    if args.command == "check-monotone":
        return run_check_monotone(
            instance, options, args.order, args.maximal, args.enlargement, command
        )
    if args.command == "represent":
        return run_represent(instance, options, command)
    if args.command == "rearrange":
        return run_rearrange(instance, options, command)
    return run_invert(instance, options, command)


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)

    try:
        report = _dispatch(args, argv)
    except pydantic.ValidationError as e:
        logger.error("invalid instance: %s", e)
        _emit({"error": "InvalidInput", "message": str(e)}, args.json_out)
        return EXIT_INPUT_ERROR
    except CDualError as e:
        logger.error("%s: %s", type(e).__name__, e)
        _emit(e.to_dict(), args.json_out)
        return e.exit_code
    except Exception as e:
        logger.exception("unexpected failure")
        _emit({"error": type(e).__name__, "message": str(e)}, args.json_out)
        return EXIT_SOLVER_FAILURE

    if report is None:
        return EXIT_OK
    _emit(report, args.json_out)
    if not report.passed:
        logger.warning("%d asserted check(s) failed", sum(1 for c in report.checks if c.asserted and not c.passed))
        return EXIT_ASSERTION_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
