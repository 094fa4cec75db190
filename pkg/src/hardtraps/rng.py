"""Counter-based random numbers.

Every random quantity in the package is a deterministic function of a
64-bit master seed and an integer key (a lattice site, a sample index).
Nothing depends on call order, so sub-boxes of an environment and subsets
of Monte Carlo samples can be regenerated independently.

The mixing function is the SplitMix64 finalizer; a per-key stream is a
Weyl sequence pushed through that finalizer.
"""
from __future__ import annotations

import numba as nb
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

MASK64 = (1 << 64) - 1


def seed_to_uint64(seed: int) -> np.uint64:
    """Reduce an arbitrary Python integer seed to 64 bits (two's complement)."""
    return np.uint64(int(seed) & MASK64)


@nb.njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(cache=True, inline="always")
def stream_start(seed, index):
    """Initial state of the substream keyed by ``(seed, index)``."""
    return mix64(seed ^ mix64(np.uint64(index) * GOLDEN + GOLDEN))


@nb.njit(cache=True, inline="always")
def next_u64(state):
    state = np.uint64(state) + GOLDEN
    return state, mix64(state)


@nb.njit(cache=True, inline="always")
def next_uniform(state):
    """Uniform double in [0, 1) with 53 random bits."""
    state, z = next_u64(state)
    return state, np.float64(z >> _S11) * _INV53


def mix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorised SplitMix64 finalizer on a uint64 array."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def keyed_uniforms(seed: int, coords: np.ndarray) -> np.ndarray:
    """Uniforms on [0, 1) keyed by ``seed`` and integer coordinate rows.

    Parameters
    ----------
    seed : int
        Master seed.
    coords : ndarray of int, shape (n, d)
        Lattice coordinates; row ``i`` yields the ``i``-th uniform.

    Returns
    -------
    ndarray of float64, shape (n,)
    """
    coords = np.asarray(coords, dtype=np.int64)
    if coords.ndim == 1:
        coords = coords[:, None]
    h = np.full(coords.shape[0], mix64_array(np.array([seed_to_uint64(seed)]))[0])
    with np.errstate(over="ignore"):
        for axis in range(coords.shape[1]):
            c = coords[:, axis].astype(np.uint64)  # two's complement wrap
            h = mix64_array(h ^ mix64_array(c * GOLDEN + np.uint64(axis + 1)))
    return (h >> _S11).astype(np.float64) * _INV53
