"""Seeded random instances for property sweeps and the `generate` subcommand.

Costs are integer-valued, so strict inequalities between table entries hold
with margin at least one and tolerance-based set comparisons are stable.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from cdual.core.monotone import Relation, extend_to_maximal
from cdual.core.space import Coupling, make_coupling
from cdual.core.transport import DiscreteMeasure
from cdual.errors import InvalidInput

COST_RANGE = (-6, 7)
WEIGHT_RANGE = (1, 6)

KIND_RELATION = "relation"
KIND_MAXIMAL = "maximal"
KIND_TRANSPORT = "transport"
KINDS = (KIND_RELATION, KIND_MAXIMAL, KIND_TRANSPORT)


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator per (seed, stream...) so sweeps do not share state."""
    return np.random.default_rng([seed, *stream])


def random_coupling(rng: np.random.Generator, n: int, m: int) -> Coupling:
    return make_coupling(rng.integers(*COST_RANGE, size=(n, m)).astype(float))


def random_relation(rng: np.random.Generator, n: int, m: int, size: int) -> Relation:
    cells = rng.choice(n * m, size=min(size, n * m), replace=False)
    return Relation(tuple((int(k // m), int(k % m)) for k in cells))


def random_maximal_relation(rng: np.random.Generator, c: Coupling) -> Relation:
    """Grow a random seed pair to a maximal c-monotone relation in random order."""
    start = Relation(((int(rng.integers(c.n)), int(rng.integers(c.m))),))
    priority = rng.permutation(c.n * c.m).reshape(c.n, c.m).astype(float)
    return extend_to_maximal(start, c, priority)


def random_monotone_subset(rng: np.random.Generator, c: Coupling, size: int) -> Relation:
    maximal = random_maximal_relation(rng, c)
    keep = rng.choice(len(maximal), size=min(size, len(maximal)), replace=False)
    return Relation(tuple(maximal.pairs[int(i)] for i in sorted(keep)))


def random_map(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    return rng.integers(0, m, size=n)


def random_measure(rng: np.random.Generator, c: Coupling, uniform: bool) -> DiscreteMeasure:
    if uniform:
        return DiscreteMeasure.uniform(c.xspace)
    weights = rng.integers(*WEIGHT_RANGE, size=c.n).astype(float)
    return DiscreteMeasure(c.xspace, weights / weights.sum())


def random_phi(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(-4, 5, size=n).astype(float)


def generate_instance(kind: str, seed: int, size: int) -> dict[str, Any]:
    """A JSON-ready instance of the given kind on size × size points."""
    if kind not in KINDS:
        raise InvalidInput(f"unknown instance kind {kind!r}; expected one of {KINDS}")
    if size < 1:
        raise InvalidInput("instance size must be positive")
    rng = rng_for(seed, KINDS.index(kind))
    c = random_coupling(rng, size, size)
    instance: dict[str, Any] = {
        "name": f"{kind}-{size}-seed{seed}",
        "space": {"kind": "discrete", "n": size},
        "cost": {"family": "table", "table": c.table.tolist()},
    }
    if kind == KIND_RELATION:
        M = random_relation(rng, size, size, int(rng.integers(2, 2 * size + 1)))
        instance["relation"] = M.to_dict()
    elif kind == KIND_MAXIMAL:
        instance["relation"] = random_maximal_relation(rng, c).to_dict()
    else:
        instance["map_T"] = random_map(rng, size, size).tolist()
        instance["mu"] = random_measure(rng, c, uniform=bool(seed % 2 == 0)).weights.tolist()
    return instance
