"""Stateless per-edge randomness.

Every random number used by the algorithms is a pure function of
``(seed, instance, edge_index)``.  Deleting or reordering other edges never
changes the draw an edge sees, which is what makes the witness-set coupling
checks exact identities instead of statistical statements.

The hash is the SplitMix64 finalizer applied in a short chain.  Three
implementations are kept in lockstep and cross-checked by the tests: plain
Python integers (reference), vectorized numpy ``uint64`` and the kernel form
used inside compiled loops.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._accel import USE_NUMBA, kernel

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_UNIT = 2.0 ** -53


def mix64_int(z: int) -> int:
    z = (z + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def stream_key_int(seed: int, instance: int) -> int:
    return mix64_int((mix64_int(seed & MASK64) + (instance & MASK64)) & MASK64)


def draw_int(key: int, edge: int) -> float:
    return (mix64_int(key ^ mix64_int(edge & MASK64)) >> 11) * _UNIT


# numpy / numba forms ------------------------------------------------------

_U_GOLDEN = np.uint64(_GOLDEN)
_U_M1 = np.uint64(_M1)
_U_M2 = np.uint64(_M2)
_S11 = np.uint64(11)
_S27 = np.uint64(27)
_S30 = np.uint64(30)
_S31 = np.uint64(31)


def _mix64_u(z):
    z = z + _U_GOLDEN
    z = (z ^ (z >> _S30)) * _U_M1
    z = (z ^ (z >> _S27)) * _U_M2
    return z ^ (z >> _S31)


if USE_NUMBA:
    mix64 = kernel(_mix64_u)

    @kernel
    def stream_key(seed, instance):
        return mix64(mix64(np.uint64(seed)) + np.uint64(instance))

    @kernel
    def draw(key, edge):
        z = mix64(np.uint64(key) ^ mix64(np.uint64(edge)))
        return np.float64(z >> _S11) * _UNIT

else:
    # numpy scalar uint64 arithmetic warns on wraparound; Python ints don't.
    def mix64(z):
        return np.uint64(mix64_int(int(z)))

    def stream_key(seed, instance):
        return np.uint64(stream_key_int(int(seed), int(instance)))

    def draw(key, edge):
        return draw_int(int(key), int(edge))


def draws_array(key: int, edges) -> np.ndarray:
    """Vectorized ``draw`` over an array of edge indices."""
    e = np.asarray(edges).astype(np.uint64)
    with np.errstate(over="ignore"):
        z = _mix64_u(np.uint64(key) ^ _mix64_u(e))
    return (z >> _S11).astype(np.float64) * _UNIT


@dataclass(frozen=True)
class RandomSource:
    """Addressed uniform draws: ``draw(instance, edge)`` is a pure function."""

    seed: int

    def key(self, instance: int) -> int:
        return stream_key_int(self.seed, instance)

    def draw(self, instance: int, edge: int) -> float:
        return draw_int(self.key(instance), edge)

    def draws(self, instance: int, edges) -> np.ndarray:
        return draws_array(self.key(instance), edges)

    def child(self, *labels: int) -> "RandomSource":
        """Independent source for a sub-experiment (e.g. one trial)."""
        s = self.seed
        for lab in labels:
            s = mix64_int(s ^ mix64_int(lab & MASK64))
        return RandomSource(s)


def uniform_draw(src: RandomSource, instance: int, edge_index: int) -> float:
    return src.draw(instance, edge_index)
