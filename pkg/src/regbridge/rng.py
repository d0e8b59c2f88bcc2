"""Deterministic counter-based random streams.

All Monte Carlo code in the package draws from Philox generators keyed by
integer tuples, typically ``(seed, replicate_index, ...)``.  Distinct keys
give independent streams and equal keys give bit-identical draws, so any
per-replicate loop can run in any order, in chunks, or across processes
without changing its output.
"""

from __future__ import annotations

import numpy as np

__all__ = ["philox_stream", "collapse_seed", "as_seed_key"]

_WORD = 1 << 64


def as_seed_key(seed) -> tuple[int, ...]:
    """Normalize a user seed (int or tuple of ints) to a tuple of ints."""
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    if isinstance(seed, (str, bytes, float)):
        raise TypeError(f"seed must be an int or a tuple of ints, got {seed!r}")
    try:
        parts = tuple(int(s) for s in seed)
    except (TypeError, ValueError):
        raise TypeError(f"seed must be an int or a tuple of ints, got {seed!r}")
    if not parts:
        raise TypeError("seed tuple must not be empty")
    return parts


def philox_stream(*key: int) -> np.random.Generator:
    """Return the generator of the stream named by an integer tuple.

    Keys of one or two integers map directly onto the 128-bit Philox key
    (cheap, used in hot loops); longer keys are hashed through
    ``SeedSequence``.  Negative integers are reduced modulo 2**64.
    """
    parts = [int(k) % _WORD for k in as_seed_key(key if len(key) != 1 else key[0])]
    if len(parts) <= 2:
        kwords = np.zeros(2, dtype=np.uint64)
        kwords[: len(parts)] = parts
        return np.random.Generator(np.random.Philox(key=kwords))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(parts)))


def collapse_seed(seed) -> int:
    """Reduce an int-or-tuple seed to a single 64-bit stream seed.

    Single integers pass through unchanged, so documented integer seeds
    stay readable; tuples are hashed.  Used where a routine needs to spawn
    many two-word replicate keys ``(effective_seed, r)`` cheaply.
    """
    parts = [p % _WORD for p in as_seed_key(seed)]
    if len(parts) == 1:
        return parts[0]
    return int(np.random.SeedSequence(parts).generate_state(1, np.uint64)[0])
