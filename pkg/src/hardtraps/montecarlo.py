"""Seeded Monte Carlo for the rate-1 walk, its sausage, and killed walks.

Sample ``i`` is a deterministic function of ``(seed, i)``; estimates are
reduced with ``math.fsum`` so they do not depend on evaluation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .env import Environment
from .errors import DomainError, ParameterError
from .rng import seed_to_uint64

BATCH = 1 << 16


@dataclass(frozen=True)
class WalkSample:
    """One walk: its sausage size, jump count, and exit flags per radius."""

    dim: int
    t: float
    sausage_size: int
    jumps: int
    max_displacement: int
    radii: tuple = ()
    exit_time_flags: tuple = ()


@dataclass(frozen=True)
class McEstimate:
    """Sample mean with ``std_error = sd / sqrt(n)`` (``ddof = 1``)."""

    mean: float
    std_error: float
    n: int
    seed: int
    censored: float = 0.0
    lower: Optional[float] = None
    upper: Optional[float] = None

    def z_score(self, exact: float) -> float:
        """``|mean - exact| / std_error``; with zero spread, 0 if equal up to rounding else ``inf``."""
        diff = abs(self.mean - exact)
        if self.std_error > 0:
            return diff / self.std_error
        return 0.0 if diff <= 1e-12 * max(1.0, abs(exact)) else math.inf


def _check_t(t: float) -> float:
    t = float(t)
    if not t >= 0.0:
        raise ParameterError(f"time must be >= 0, got {t}")
    return t


def _check_n(n: int) -> int:
    if int(n) < 1:
        raise ParameterError(f"sample count must be >= 1, got {n}")
    return int(n)


def _nu(density: float) -> float:
    if not 0.0 < density < 1.0:
        raise ParameterError(f"density must lie in (0, 1), got {density}")
    return -math.log1p(-density)


def estimate(values: np.ndarray, seed: int, **extra) -> McEstimate:
    """Mean and standard error of per-sample values with compensated sums."""
    values = np.asarray(values, dtype=float)
    n = values.size
    mean = math.fsum(values) / n
    if n > 1:
        var = math.fsum((values - mean) ** 2) / (n - 1)
        se = math.sqrt(var / n)
    else:
        se = 0.0
    return McEstimate(mean, se, n, int(seed), **extra)


def _batches(n: int):
    for first in range(0, n, BATCH):
        yield first, min(BATCH, n - first)


def walk_statistics(dim: int, t: float, n: int, seed: int, sausage: bool = True) -> tuple:
    """Sausage sizes, jump counts and maximal sup-norm displacements of ``n`` walks."""
    if dim < 1:
        raise ParameterError(f"dim must be >= 1, got {dim}")
    t, n = _check_t(t), _check_n(n)
    s = seed_to_uint64(seed)
    cap = K._capacity(t)
    parts = [K.sausage_batch(s, first, m, dim, t, cap, sausage) for first, m in _batches(n)]
    return tuple(np.concatenate([p[k] for p in parts]) for k in range(3))


def simulate_walk(dim: int, t: float, radii: Sequence[int] = (), seed: int = 0, index: int = 0) -> WalkSample:
    """Simulate walk number ``index`` of the stream keyed by ``seed``."""
    if dim < 1:
        raise ParameterError(f"dim must be >= 1, got {dim}")
    t = _check_t(t)
    sizes, jumps, maxd = K.sausage_batch(seed_to_uint64(seed), int(index), 1, dim, t, K._capacity(t), True)
    radii = tuple(int(r) for r in radii)
    flags = tuple(bool(maxd[0] >= r) for r in radii)
    return WalkSample(dim, t, int(sizes[0]), int(jumps[0]), int(maxd[0]), radii, flags)


def annealed_mc(dim: int, density: float, t: float, n: int, seed: int) -> McEstimate:
    """Estimate ``<p(0, t)> = E exp(-nu |W(t)|)`` from ``n`` sausages."""
    nu = _nu(density)
    sizes, _, _ = walk_statistics(dim, t, n, seed)
    return estimate(np.exp(-nu * sizes), seed)


def correlation_mc(dim: int, density: float, x, y, t: float, n: int, seed: int,
                   truncation_radius: Optional[int] = None) -> McEstimate:
    """Estimate the environment covariance of ``p(x, t)`` and ``p(y, t)``.

    Each sample runs independent walks from ``x`` and ``y`` and records
    ``exp(-nu |Wx u Wy|) - exp(-nu |Wx|) exp(-nu |Wy|)``.  With
    ``truncation_radius`` set, a walk whose sup-norm displacement exceeds it
    contributes zero survival, giving the covariance of the truncated
    survival probabilities.
    """
    nu = _nu(density)
    t, n = _check_t(t), _check_n(n)
    x = np.atleast_1d(np.asarray(x, dtype=np.int64))
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    if x.size != dim or y.size != dim:
        raise ParameterError(f"x and y must have {dim} coordinates")
    shift = (y - x).astype(np.int64)
    s = seed_to_uint64(seed)
    cap = K._capacity(t)
    parts = [K.pair_batch(s, first, m, dim, t, shift, cap) for first, m in _batches(n)]
    sx, sy, inter, mx, my = (np.concatenate([p[k] for p in parts]) for k in range(5))
    ax = np.ones(n)
    ay = np.ones(n)
    if truncation_radius is not None:
        ax = (mx <= truncation_radius).astype(float)
        ay = (my <= truncation_radius).astype(float)
    union = sx + sy - inter
    values = ax * ay * (np.exp(-nu * union) - np.exp(-nu * (sx + sy)))
    return estimate(values, seed)


def killed_walk_mc(env: Environment, x, t: float, n: int, seed: int) -> McEstimate:
    """Fraction of ``n`` walks from ``x`` that avoid obstacles up to ``t``.

    Walks leaving the box are censored; ``lower`` counts them as killed and
    ``upper`` as survivors, so ``[lower, upper]`` brackets the estimand up
    to sampling error.
    """
    t, n = _check_t(t), _check_n(n)
    x = np.atleast_1d(np.asarray(x, dtype=np.int64))
    if x.size != env.dim or not env.contains(x):
        raise DomainError(f"start site {tuple(x)} is not inside the box")
    if env.is_obstacle(x):
        return McEstimate(0.0, 0.0, n, int(seed), 0.0, 0.0, 0.0)
    occ = np.ascontiguousarray(env.occupancy.ravel()).astype(np.uint8)
    s = seed_to_uint64(seed)
    codes = np.concatenate([K.killed_batch(s, first, m, occ, env.radius, env.dim, x, t) for first, m in _batches(n)])
    survived = codes == 0
    censored = codes == 2
    est = estimate(survived.astype(float), seed)
    frac_c = float(censored.sum()) / n
    return McEstimate(est.mean, est.std_error, n, int(seed), frac_c, est.mean, est.mean + frac_c)


def exit_time_tail_mc(a: float, dim: int, t: float, n: int, seed: int) -> McEstimate:
    """Estimate ``P(T_{at} < t)``: sup-norm displacement reaches ``floor(a t)`` by time ``t``."""
    if not a > 0:
        raise ParameterError(f"a must be > 0, got {a}")
    t = _check_t(t)
    r = int(math.floor(a * t))
    _, _, maxd = walk_statistics(dim, t, n, seed, sausage=False)
    return estimate((maxd >= r).astype(float), seed)
