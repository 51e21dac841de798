"""Deterministic randomness plumbing.

Two layers: named streams derived from the master seed (topology, jitter,
loss) for the simulator, and a tiny splitmix64 kept inline in node state so
protocol transitions stay pure functions of (state, event).
"""

from __future__ import annotations

import hashlib
import random

_MASK64 = (1 << 64) - 1


def derive_seed(master: int, label: str) -> int:
    """Stable 64-bit sub-seed for a named stream (process independent)."""
    digest = hashlib.sha256(f"{master}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def stream(master: int, label: str) -> random.Random:
    return random.Random(derive_seed(master, label))


def split_next(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; returns (new_state, 64-bit output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return state, z


def split_below(state: int, bound: int) -> tuple[int, int]:
    """Uniform int in [0, bound) from a splitmix64 state."""
    if bound <= 1:
        state, _ = split_next(state)
        return state, 0
    state, z = split_next(state)
    return state, z % bound
