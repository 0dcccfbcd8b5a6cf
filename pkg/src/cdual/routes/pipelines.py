"""HTTP access to the same runs the command line performs.

CPU-bound runs are plain `def` handlers so FastAPI executes them in its
threadpool.
"""

from __future__ import annotations

from typing import Any, Callable, Optional

import pydantic
from fastapi import APIRouter, HTTPException, status
from fastapi.responses import JSONResponse

from cdual.config import config
from cdual.constants import LP_BACKENDS
from cdual.errors import CDualError, InvalidInput, ResourceLimit
from cdual.models import Instance, RunReport
from cdual.pipeline.runs import (
    RunOptions,
    run_check_monotone,
    run_invert,
    run_represent,
    run_rearrange,
)
from cdual.utils.logger import get_logger
from cdual.utils.serialization import to_jsonable

logger = get_logger(__name__)

router = APIRouter(prefix="/pipelines", tags=["pipelines"])


class PipelineRequest(pydantic.BaseModel):
    instance: Instance = pydantic.Field(description="Problem instance")
    tol: Optional[float] = pydantic.Field(default=None, gt=0, description="Numerical tolerance")
    max_iter: Optional[int] = pydantic.Field(default=None, ge=1, description="Synthesis iteration limit")
    backend: Optional[str] = pydantic.Field(default=None, description="LP backend")

    @pydantic.field_validator("backend")
    @classmethod
    def _check_backend(cls, backend):
        if backend is not None and backend not in LP_BACKENDS:
            raise ValueError(f"backend must be one of {LP_BACKENDS}")
        return backend

    def options(self) -> RunOptions:
        return RunOptions.from_config(config, tol=self.tol, max_iter=self.max_iter, backend=self.backend)


class MonotoneRequest(PipelineRequest):
    order: int = pydantic.Field(default=2, ge=2, description="Highest cycle order")
    maximal: bool = pydantic.Field(default=False, description="Also test maximality")
    enlargement: bool = pydantic.Field(default=False, description="Also test the enlarged relation")


def _status_for(error: CDualError) -> int:
    if isinstance(error, InvalidInput):
        return status.HTTP_422_UNPROCESSABLE_ENTITY
    if isinstance(error, ResourceLimit):
        return status.HTTP_507_INSUFFICIENT_STORAGE
    return status.HTTP_500_INTERNAL_SERVER_ERROR


def _respond(run: Callable[[], RunReport]) -> JSONResponse:
    try:
        report = run()
    except CDualError as e:
        logger.error("pipeline failed: %s", e)
        raise HTTPException(status_code=_status_for(e), detail=to_jsonable(e.to_dict())) from e
    return JSONResponse(content=to_jsonable(report))


@router.post("/check-monotone", summary="c-monotonicity, cyclic orders and maximality")
def check_monotone(request: MonotoneRequest) -> Any:
    return _respond(
        lambda: run_check_monotone(
            request.instance,
            request.options(),
            request.order,
            request.maximal,
            request.enlargement,
            ["check-monotone"],
        )
    )


@router.post("/represent", summary="Selfdual Lagrangian representing a relation")
def represent(request: PipelineRequest) -> Any:
    return _respond(lambda: run_represent(request.instance, request.options(), ["represent"]))


@router.post("/rearrange", summary="Symmetric transport, certificate and involution")
def rearrange(request: PipelineRequest) -> Any:
    return _respond(lambda: run_rearrange(request.instance, request.options(), ["rearrange"]))


@router.post("/invert", summary="Inversion by I_p minimization or a c-skew map")
def invert(request: PipelineRequest) -> Any:
    return _respond(lambda: run_invert(request.instance, request.options(), ["invert"]))
