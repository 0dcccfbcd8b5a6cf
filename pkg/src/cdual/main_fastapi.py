from __future__ import annotations

from fastapi import FastAPI

from cdual import __version__
from cdual.config import config
from cdual.routes import health, pipelines
from cdual.utils.logger import configure_logging, get_logger

configure_logging()

logger = get_logger(__name__)

ROUTERS = (health.router, pipelines.router)


def create_app() -> FastAPI:
    app = FastAPI(
        title="cdual",
        description="c-transforms, monotone relations, selfdual Lagrangians, "
        "symmetric transport and inversion on finite spaces.",
        version=__version__,
    )
    for router in ROUTERS:
        app.include_router(router)

    @app.get("/", tags=["meta"])
    async def read_root() -> dict[str, str]:
        return {"service": "cdual", "status": "ok"}

    logger.debug("app ready; LP backend %s", config.solver.lp_backend)
    return app


app = create_app()


def main():
    import uvicorn

    # python -m uvicorn cdual.main_fastapi:app --reload
    uvicorn.run(app, host="0.0.0.0", port=8000)


if __name__ == "__main__":
    main()
