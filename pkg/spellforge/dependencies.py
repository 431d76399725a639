"""Shared injectables: worker pools and seed derivation."""

import logging
import os
from typing import Iterator, List, Optional, Sequence, TypeVar

import numpy as np
from joblib import Parallel

from spellforge.config import settings
from spellforge.errors import ConfigError

logger = logging.getLogger(__name__)

T = TypeVar("T")


def resolve_threads(threads: Optional[int] = None) -> int:
    """Worker count: explicit flag, then ``SPELLFORGE_THREADS``, then settings."""
    if threads is None:
        raw = os.environ.get("SPELLFORGE_THREADS")
        if raw:
            try:
                threads = int(raw)
            except ValueError:
                raise ConfigError(f"SPELLFORGE_THREADS must be an integer, got {raw!r}") from None
        else:
            threads = settings.threads
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    return threads


def get_parallel(threads: Optional[int] = None, **kwargs) -> Parallel:
    """A joblib pool sized from :func:`resolve_threads`."""
    n_jobs = resolve_threads(threads)
    return Parallel(n_jobs=n_jobs, **kwargs)


def chunked(items: Sequence[T], n_chunks: int) -> Iterator[Sequence[T]]:
    """Split into at most ``n_chunks`` contiguous, order-preserving slices."""
    if not items:
        return
    n_chunks = max(1, min(n_chunks, len(items)))
    bounds = np.linspace(0, len(items), n_chunks + 1).astype(int)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi > lo:
            yield items[lo:hi]


def seed_sequence(master: int, *key: int) -> np.random.SeedSequence:
    """Sub-seed keyed by task indices, independent of scheduling order."""
    return np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in key))


def derive_rng(master: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(master, *key))


def spawn_seeds(master: int, n: int, *key: int) -> List[np.random.SeedSequence]:
    return seed_sequence(master, *key).spawn(n)


def derive_seed(master: int, *key: int) -> int:
    """Integer seed for APIs that take one, derived like :func:`derive_rng`."""
    return int(seed_sequence(master, *key).generate_state(1)[0])
