#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Configuration management for cdual.
Loads settings from .env file.

Core functions take explicit tolerances and default to `cdual.constants`; the
CLI and the HTTP surface pass the values configured here.
"""

import os
from pathlib import Path

from dotenv import load_dotenv

from cdual.constants import (
    DEFAULT_CYCLE_CAPS,
    DEFAULT_DUALITY_TOL,
    DEFAULT_MAX_CYCLE_ORDER,
    DEFAULT_MAX_ITER,
    DEFAULT_TIE_TOL,
    DEFAULT_TOL,
    LP_BACKENDS,
    BACKEND_NETWORK_SIMPLEX,
)
from cdual.utils.logger import get_logger

logger = get_logger(__name__)

env_path = Path(__file__).parent.parent.parent / ".env"
load_dotenv(dotenv_path=env_path)


class SolverConfig:
    """Tolerances, iteration limits and LP backend selection."""

    def __init__(self):
        self.tol = float(os.getenv("CDUAL_TOL") or DEFAULT_TOL)
        self.max_iter = int(os.getenv("CDUAL_MAX_ITER") or DEFAULT_MAX_ITER)
        self.tie_tol = float(os.getenv("CDUAL_TIE_TOL") or DEFAULT_TIE_TOL)
        self.duality_tol = float(
            os.getenv("CDUAL_DUALITY_TOL") or DEFAULT_DUALITY_TOL
        )
        self.lp_backend = (
            os.getenv("CDUAL_LP_BACKEND") or BACKEND_NETWORK_SIMPLEX
        ).strip()

    def validate(self):
        """Validate configuration."""
        if self.tol <= 0 or self.tie_tol <= 0 or self.duality_tol <= 0:
            raise ValueError("Tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("CDUAL_MAX_ITER must be at least 1")
        if self.lp_backend not in LP_BACKENDS:
            raise ValueError(
                f"CDUAL_LP_BACKEND must be one of {LP_BACKENDS}, got {self.lp_backend!r}"
            )

    def __repr__(self):
        return (
            f"SolverConfig(\n"
            f"  tol={self.tol}\n"
            f"  max_iter={self.max_iter}\n"
            f"  tie_tol={self.tie_tol}\n"
            f"  duality_tol={self.duality_tol}\n"
            f"  lp_backend={self.lp_backend}\n"
            f")"
        )


class EnumerationConfig:
    """Caps for exhaustive cycle enumeration."""

    def __init__(self):
        self.max_cycle_order = int(
            os.getenv("CDUAL_MAX_CYCLE_ORDER") or DEFAULT_MAX_CYCLE_ORDER
        )
        self.cycle_caps = {
            order: int(os.getenv(f"CDUAL_CYCLE_CAP_{order}") or cap)
            for order, cap in DEFAULT_CYCLE_CAPS.items()
        }

    def validate(self):
        if self.max_cycle_order < 2:
            raise ValueError("CDUAL_MAX_CYCLE_ORDER must be at least 2")
        for order in range(3, self.max_cycle_order + 1):
            if order not in self.cycle_caps:
                raise ValueError(f"No cycle cap configured for order {order}")

    def __repr__(self):
        return (
            f"EnumerationConfig(\n"
            f"  max_cycle_order={self.max_cycle_order}\n"
            f"  cycle_caps={self.cycle_caps}\n"
            f")"
        )


class StorageConfig:
    """Where bare instance names are looked up."""

    def __init__(self):
        self.data_dir = Path(os.getenv("CDUAL_DATA_DIR", "./data"))

    @property
    def fixtures_dir(self) -> Path:
        return self.data_dir / "fixtures"

    def resolve_instance(self, source: str) -> Path:
        """`source` as given if it exists, else the fixture of that name."""
        path = Path(source)
        if path.exists() or path.is_absolute():
            return path
        for candidate in (self.fixtures_dir / path, self.fixtures_dir / f"{source}.json"):
            if candidate.exists():
                return candidate
        return path

    def __repr__(self):
        return (
            f"StorageConfig(\n"
            f"  data_dir={self.data_dir}\n"
            f"  fixtures_dir={self.fixtures_dir}\n"
            f")"
        )


class Config:
    """Main configuration object."""

    def __init__(self):
        self.solver = SolverConfig()
        self.enumeration = EnumerationConfig()
        self.storage = StorageConfig()

    def validate(self):
        """Validate all configuration."""
        self.solver.validate()
        self.enumeration.validate()

    def print_config(self):
        """Print configuration summary."""
        logger.info("=" * 70)
        logger.info("CONFIGURATION")
        logger.info("=" * 70)
        logger.info("%s", self.solver)
        logger.info("%s", self.enumeration)
        logger.info("%s", self.storage)
        logger.info("=" * 70)


config = Config()


if __name__ == "__main__":
    config.print_config()
    config.validate()
    logger.info("Configuration validated successfully")
