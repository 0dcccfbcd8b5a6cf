from __future__ import annotations

from fastapi import APIRouter

from cdual import __version__
from cdual.config import config

router = APIRouter(prefix="/health", tags=["health"])


@router.get("", summary="Service status and active solver settings")
async def healthcheck() -> dict[str, str | float]:
    return {
        "status": "ok",
        "version": __version__,
        "lp_backend": config.solver.lp_backend,
        "tol": config.solver.tol,
    }
