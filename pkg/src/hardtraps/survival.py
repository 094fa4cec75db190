"""Exact and bracketed survival probabilities among hard obstacles.

One-dimensional quantities are evaluated from the closed-form interval
spectrum; higher-dimensional ones from dense spectra of finite free
components.  Sums over eigenmodes use ``math.fsum`` because the terms span
many orders of magnitude.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from . import spectral
from .env import Environment, GapStructure, gap_structure
from .errors import DomainError, ParameterError, SizeError

DENSE_CAP = 4096


@dataclass(frozen=True)
class SurvivalValue:
    """A survival probability with its evaluation mode.

    ``value - error`` and ``value + error`` bracket the true quantity; the
    error is zero in ``exact`` mode.
    """

    value: float
    mode: str
    error: float = 0.0
    t: float = 0.0
    x: object = None

    @property
    def lower(self) -> float:
        return self.value - self.error

    @property
    def upper(self) -> float:
        return self.value + self.error

    @classmethod
    def bracket(cls, lo: float, hi: float, t: float, x=None) -> "SurvivalValue":
        return cls(0.5 * (lo + hi), "bounded", 0.5 * (hi - lo), t, x)


def _check_time(t: float) -> float:
    t = float(t)
    if not t >= 0.0:
        raise ParameterError(f"time must be >= 0, got {t}")
    return t


# -- interval formulas ------------------------------------------------------------


def site_survival(l: int, offsets, t: float) -> np.ndarray:
    """Survival from sites ``offsets`` (0-based) of an isolated interval of ``l`` sites."""
    offsets = np.atleast_1d(np.asarray(offsets, dtype=np.int64))
    lam = spectral.interval_eigenvalues(l)
    mass = spectral.interval_masses(l)
    odd = mass != 0.0
    weights = np.exp(-t * lam[odd]) * mass[odd]
    k = np.arange(1, l + 1)[odd]
    psi = math.sqrt(2.0 / (l + 1)) * np.sin(np.outer(offsets + 1, k) * math.pi / (l + 1))
    terms = psi * weights
    return np.array([min(1.0, max(0.0, math.fsum(row))) for row in terms])


def interval_sum_survival(l: int, t: float) -> float:
    """``sum_{x in I} p(x, t)`` for an interval of ``l`` sites bounded by obstacles."""
    if l < 1:
        raise ParameterError(f"interval length must be >= 1, got {l}")
    t = _check_time(t)
    lam = spectral.interval_eigenvalues(l)
    mass = spectral.interval_masses(l)
    odd = mass != 0.0
    return math.fsum(np.exp(-t * lam[odd]) * mass[odd] ** 2)


def interval_sums(lengths, t: float) -> np.ndarray:
    """``interval_sum_survival`` over an array of lengths; length 0 gives 0."""
    lengths = np.asarray(lengths, dtype=np.int64)
    out = np.zeros(lengths.shape)
    for l in np.unique(lengths):
        if l > 0:
            out[lengths == l] = interval_sum_survival(int(l), t)
    return out


def interval_sum_bounds(l: int, t: float) -> tuple:
    """Lower and upper bounds on the interval sum from the two lowest modes.

    ``e^{-t lam0} A <= sum <= e^{-t lam0} (A + e^{-t (lam1 - lam0)} (l - A))``
    with ``A = (psi_0, 1)^2``.
    """
    spec = spectral.interval_spectrum(l)
    A = spec.psi0_mass**2
    base = math.exp(-t * spec.eigenvalues[0])
    if l == 1:
        return base * A, base * A
    rest = math.exp(-t * (spec.eigenvalues[1] - spec.eigenvalues[0])) * max(l - A, 0.0)
    return base * A, base * (A + rest)


# -- quenched survival ---------------------------------------------------------------


def quenched_survival_1d(gaps: GapStructure, x: int, t: float) -> SurvivalValue:
    """Exact ``P_x(tau > t)`` in one dimension.

    Gaps cut by the box edge give a bracket between the value killed at
    the edge and 1.
    """
    t = _check_time(t)
    x = int(x)
    iv = gaps.interval_of(x)
    if iv is None:
        return SurvivalValue(0.0, "exact", 0.0, t, x)
    value = float(site_survival(iv.length, [x - iv.left], t)[0])
    if iv.truncated:
        return SurvivalValue.bracket(value, 1.0, t, x)
    return SurvivalValue(value, "exact", 0.0, t, x)


def truncated_survival(env: Environment, x, t: float, U, cap: int = DENSE_CAP) -> SurvivalValue:
    """``P_x(tau > t, T_U >= t)``: survival of the walk confined to ``U``.

    Evaluated from the dense Dirichlet spectrum of ``U`` minus obstacles.
    """
    t = _check_time(t)
    U = np.asarray(U, dtype=np.int64).reshape(-1, env.dim)
    x = np.atleast_1d(np.asarray(x, dtype=np.int64))
    if not np.any(np.all(U == x, axis=1)):
        raise DomainError(f"start site {tuple(x)} is not in U")
    if np.any(np.abs(U) > env.radius):
        raise DomainError("U extends beyond the environment box")
    if env.is_obstacle(x):
        return SurvivalValue(0.0, "exact", 0.0, t, tuple(x))
    idx = tuple((U + env.radius).T)
    free = U[~env.occupancy[idx]]
    if free.shape[0] > cap:
        raise SizeError(f"|U minus obstacles| = {free.shape[0]} exceeds the dense cap {cap}; use Monte Carlo")
    vals, vecs, ordered = spectral.dense_spectrum(free, env.dim, cap=cap)
    row = int(np.flatnonzero(np.all(ordered == x, axis=1))[0])
    terms = np.exp(-t * vals) * vecs[row] * vecs.sum(axis=0)
    value = min(1.0, max(0.0, math.fsum(terms)))
    return SurvivalValue(value, "exact", 0.0, t, tuple(int(c) for c in x))


# -- spatial sums and averages ----------------------------------------------------------


def survival_sum_1d(gaps: GapStructure, t: float, lo: int, hi: int) -> tuple:
    """Bracket ``(lower, upper)`` of ``sum_{lo <= x <= hi} p(x, t)``.

    Whole interior intervals use the interval-sum formula; intervals cut by
    ``[lo, hi]`` are summed site by site.  Intervals cut by the box edge
    contribute their edge-killed values to ``lower`` and their size to
    ``upper``.
    """
    t = _check_time(t)
    if lo < -gaps.radius or hi > gaps.radius:
        raise DomainError(f"[{lo}, {hi}] not inside box of radius {gaps.radius}")
    lower, upper = [], []
    for iv in gaps.intervals:
        if iv.length == 0 or iv.right < lo or iv.left > hi:
            continue
        a, b = max(iv.left, lo), min(iv.right, hi)
        if a == iv.left and b == iv.right:
            s = interval_sum_survival(iv.length, t)
        else:
            s = math.fsum(site_survival(iv.length, np.arange(a, b + 1) - iv.left, t))
        lower.append(s)
        upper.append(float(b - a + 1) if iv.truncated else s)
    return math.fsum(lower), math.fsum(upper)


def _component_survival_sum(env: Environment, t: float, L: int, cap: int) -> tuple:
    labels, count = ndimage.label(~env.occupancy, structure=ndimage.generate_binary_structure(env.dim, 1))
    inner = (slice(env.radius - L, env.radius + L + 1),) * env.dim
    wanted = np.unique(labels[inner])
    wanted = wanted[wanted > 0]
    lower, upper = [], []
    objects = ndimage.find_objects(labels)
    for lab in wanted:
        mask = labels == lab
        sites = np.argwhere(mask) - env.radius
        if sites.shape[0] > cap:
            raise SizeError(f"free component of {sites.shape[0]} sites exceeds the dense cap {cap}")
        touches = bool(np.any(np.abs(sites) == env.radius))
        vals, vecs, ordered = spectral.dense_spectrum(sites, env.dim, cap=cap)
        p = vecs @ (np.exp(-t * vals) * vecs.sum(axis=0))
        inside = np.all(np.abs(ordered) <= L, axis=1)
        s = math.fsum(np.clip(p[inside], 0.0, 1.0))
        lower.append(s)
        upper.append(float(inside.sum()) if touches else s)
    del objects
    return math.fsum(lower), math.fsum(upper)


def survival_sum(env: Environment, t: float, L: int, cap: int = DENSE_CAP) -> tuple:
    """Bracket of ``sum_{y in Lambda_L} p(y, t)``."""
    t = _check_time(t)
    if not 0 <= L <= env.radius:
        raise DomainError(f"L={L} must lie in [0, {env.radius}]")
    if env.dim == 1:
        return survival_sum_1d(gap_structure(env), t, -L, L)
    return _component_survival_sum(env, t, L, cap)


def averaged_survival(env: Environment, t: float, L: int, cap: int = DENSE_CAP) -> SurvivalValue:
    """Spatial average of quenched survival over ``Lambda_L``."""
    lo, hi = survival_sum(env, t, L, cap)
    size = (2 * L + 1) ** env.dim
    if hi > lo:
        return SurvivalValue.bracket(lo / size, min(1.0, hi / size), t, L)
    return SurvivalValue(lo / size, "exact", 0.0, t, L)


# -- annealed survival in one dimension --------------------------------------------------


def annealed_tail_bound(density: float, N: int) -> float:
    """Bound on the series mass from origin gaps longer than ``N``.

    Uses ``sum_{x in I} p <= l`` so the remainder is at most
    ``p^2 sum_{l > N} l (1-p)^l``.
    """
    q = 1.0 - density
    return q ** (N + 1) * ((N + 1) - N * q)


def annealed_exact_1d(density: float, t: float, tail_tol: float = 1e-300) -> SurvivalValue:
    """``<p(0, t)>`` in one dimension by summing over the origin's gap.

    The origin's gap has ``a`` free sites on its left and ``b`` on its
    right with probability ``p^2 (1-p)^{a+b+1}``; grouping by the total
    length ``l = a + b + 1`` turns the inner sum into the interval sum.
    """
    if not 0.0 < density < 1.0:
        raise ParameterError(f"density must lie in (0, 1), got {density}")
    if not tail_tol > 0.0:
        raise ParameterError(f"tail_tol must be > 0, got {tail_tol}")
    t = _check_time(t)
    q = 1.0 - density
    N = 1
    while annealed_tail_bound(density, N) >= tail_tol:
        N = max(N + 1, int(N * 1.25))
    terms = []
    for l in range(1, N + 1):
        w = density**2 * q**l
        if w == 0.0:
            break
        terms.append(w * interval_sum_survival(l, t))
    value = math.fsum(terms)
    return SurvivalValue(min(value, 1.0), "series", float(tail_tol), t, 0)


# -- truncation and spectral bounds ---------------------------------------------------------


def J(x: float) -> float:
    """Cramer rate ``x asinh(x) - sqrt(1 + x^2) + 1``."""
    return x * math.asinh(x) - math.sqrt(1.0 + x * x) + 1.0


@dataclass(frozen=True)
class TruncationBound:
    """``P(T_{at} < t) <= k1 exp(-k2 t)`` with ``k1 = 2d e^{asinh(ad)}``, ``k2 = J(ad)/d``."""

    a: float
    d: int
    t: float
    k1: float
    k2: float

    @property
    def bound(self) -> float:
        return self.k1 * math.exp(-self.k2 * self.t)


def truncation_gap_bound(a: float, dim: int, t: float) -> TruncationBound:
    """Chernoff bound on leaving the box of radius ``a t`` before time ``t``."""
    if not a > 0:
        raise ParameterError(f"a must be > 0, got {a}")
    if dim < 1:
        raise ParameterError(f"dim must be >= 1, got {dim}")
    ad = a * dim
    return TruncationBound(float(a), int(dim), float(t), 2.0 * dim * math.exp(math.asinh(ad)), J(ad) / dim)


def ball_sites(center, radius: int) -> np.ndarray:
    """Sup-norm ball ``{y : ||y - center|| <= radius}`` as an (n, d) array."""
    center = np.atleast_1d(np.asarray(center, dtype=np.int64))
    d = center.size
    side = 2 * radius + 1
    grid = np.indices((side,) * d).reshape(d, -1).T - radius
    return grid + center


class SurvivalBounds(NamedTuple):
    lower: float
    upper: float
    lambda0: float
    ball_size: int


def survival_bounds(env: Environment, x, t: float, a: float) -> SurvivalBounds:
    """Spectral bounds around ``x`` on the ball of radius ``a t``.

    ``upper`` bounds ``p(x, t)`` by the truncation term plus
    ``(2at + 1)^{d/2} e^{-lambda_0 t}``; ``lower`` bounds the average of
    ``p`` over the ball by ``e^{-lambda_0 t} / |ball|``.
    """
    t = _check_time(t)
    x = np.atleast_1d(np.asarray(x, dtype=np.int64))
    r = int(math.floor(a * t))
    if np.any(np.abs(x) + r > env.radius):
        raise DomainError(f"ball of radius {r} around {tuple(x)} leaves the box")
    ball = ball_sites(x, r)
    free = ball[~env.occupancy[tuple((ball + env.radius).T)]]
    if free.shape[0] == 0:
        lam = math.inf
        decay = 1.0 if t == 0 else 0.0
    else:
        lam = spectral.principal_eigenvalue(free, env.dim)
        decay = math.exp(-lam * t)
    tb = truncation_gap_bound(a, env.dim, t) if t > 0 else None
    head = tb.bound if tb is not None else 0.0
    upper = head + (2.0 * a * t + 1.0) ** (env.dim / 2.0) * decay
    if t == 0:
        upper = max(upper, 1.0)
    lower = decay / ball.shape[0]
    return SurvivalBounds(lower, upper, lam, int(ball.shape[0]))
