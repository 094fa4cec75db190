"""Bernoulli obstacle environments on a finite lattice box.

An environment is the restriction of an i.i.d. Bernoulli(p) field to the
box ``[-L, L]^d``.  Site occupancy is a pure function of the seed and the
site coordinates, so two boxes of different radius generated from the same
seed agree on their overlap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .errors import DimensionError, DomainError, ParameterError
from .rng import keyed_uniforms

# Binomial sampling regimes used by ``stratified_gap_histogram``.
EXACT_MAX_MEAN = 1e6
EXACT_MAX_TRIALS = 1e9
POISSON_MAX_MEAN = 10.0
MAX_TRIALS = 2**63 - 1


def _check_density(density: float, allow_zero: bool = True) -> float:
    density = float(density)
    lo_ok = density >= 0.0 if allow_zero else density > 0.0
    if not (lo_ok and density < 1.0) or math.isnan(density):
        bound = "[0, 1)" if allow_zero else "(0, 1)"
        raise ParameterError(f"density must lie in {bound}, got {density!r}")
    return density


@dataclass(frozen=True, eq=False)
class Environment:
    """Obstacle configuration on the box ``[-radius, radius]^dim``.

    ``occupancy[i_1, ..., i_d]`` is True when the site with coordinates
    ``(i_1 - radius, ..., i_d - radius)`` holds an obstacle.
    """

    dim: int
    radius: int
    density: float
    seed: int
    occupancy: np.ndarray = field(repr=False)

    def __post_init__(self):
        side = 2 * self.radius + 1
        if self.occupancy.shape != (side,) * self.dim:
            raise ParameterError(
                f"occupancy shape {self.occupancy.shape} does not match "
                f"dim={self.dim}, radius={self.radius}"
            )
        self.occupancy.flags.writeable = False

    def __eq__(self, other):
        if not isinstance(other, Environment):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.radius == other.radius
            and self.density == other.density
            and self.seed == other.seed
            and np.array_equal(self.occupancy, other.occupancy)
        )

    def __hash__(self):
        return hash((self.dim, self.radius, self.density, self.seed, self.occupancy.tobytes()))

    @property
    def side(self) -> int:
        return 2 * self.radius + 1

    @property
    def n_sites(self) -> int:
        return self.side**self.dim

    def contains(self, site) -> bool:
        site = np.atleast_1d(np.asarray(site, dtype=np.int64))
        return site.shape == (self.dim,) and bool(np.all(np.abs(site) <= self.radius))

    def index(self, site) -> tuple:
        """Array index of a lattice site."""
        site = np.atleast_1d(np.asarray(site, dtype=np.int64))
        if not self.contains(site):
            raise DomainError(f"site {tuple(site)} outside box of radius {self.radius}")
        return tuple(int(c) + self.radius for c in site)

    def is_obstacle(self, site) -> bool:
        return bool(self.occupancy[self.index(site)])

    def obstacle_fraction(self) -> float:
        return float(self.occupancy.mean())

    def sub_box(self, radius: int) -> "Environment":
        """The same environment restricted to a smaller centred box."""
        if not 0 <= radius <= self.radius:
            raise DomainError(f"sub-box radius {radius} not in [0, {self.radius}]")
        cut = slice(self.radius - radius, self.radius + radius + 1)
        occ = np.array(self.occupancy[(cut,) * self.dim])
        return Environment(self.dim, radius, self.density, self.seed, occ)

    # -- serialisation ---------------------------------------------------

    def to_text(self) -> str:
        """Header ``dim radius density seed`` then the hex occupancy bitstring."""
        bits = np.packbits(self.occupancy.ravel(order="C").astype(np.uint8))
        return f"{self.dim} {self.radius} {self.density!r} {self.seed}\n{bits.tobytes().hex()}\n"

    @classmethod
    def from_text(cls, text: str) -> "Environment":
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if len(lines) != 2:
            raise ParameterError("environment text needs a header line and a hex line")
        try:
            dim_s, radius_s, density_s, seed_s = lines[0].split()
            dim, radius, density, seed = int(dim_s), int(radius_s), float(density_s), int(seed_s)
            raw = np.frombuffer(bytes.fromhex(lines[1].strip()), dtype=np.uint8)
        except ValueError as exc:
            raise ParameterError(f"malformed environment text: {exc}") from exc
        side = 2 * radius + 1
        count = side**dim
        bits = np.unpackbits(raw)
        if bits.size < count or bits[count:].any():
            raise ParameterError("occupancy bitstring length does not match the header")
        occ = bits[:count].astype(bool).reshape((side,) * dim)
        return cls(dim, radius, density, seed, occ)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "Environment":
        return cls.from_text(Path(path).read_text())


def box_coordinates(dim: int, radius: int) -> np.ndarray:
    """All sites of ``[-radius, radius]^dim`` in row-major order, shape (n, dim)."""
    side = 2 * radius + 1
    grid = np.indices((side,) * dim).reshape(dim, -1).T
    return grid - radius


def sample_environment(dim: int, radius: int, density: float, seed: int) -> Environment:
    """Draw a Bernoulli(density) obstacle configuration on ``[-radius, radius]^dim``.

    Each site is an obstacle iff its keyed uniform falls below ``density``;
    the key is ``(seed, site coordinates)``.
    """
    density = _check_density(density)
    if dim < 1:
        raise ParameterError(f"dim must be >= 1, got {dim}")
    if radius < 0:
        raise ParameterError(f"radius must be >= 0, got {radius}")
    coords = box_coordinates(dim, radius)
    u = keyed_uniforms(seed, coords)
    occ = (u < density).reshape((2 * radius + 1,) * dim)
    return Environment(int(dim), int(radius), density, int(seed), occ)


# -- one-dimensional gap view -------------------------------------------------


@dataclass(frozen=True)
class Interval:
    """Maximal obstacle-free run ``[left, right]``; empty when ``length == 0``.

    The truncation flags mark runs cut by the box edge rather than by an
    obstacle.
    """

    left: int
    right: int
    length: int
    truncated_left: bool = False
    truncated_right: bool = False

    @property
    def truncated(self) -> bool:
        return self.truncated_left or self.truncated_right

    def contains(self, x: int) -> bool:
        return self.length > 0 and self.left <= x <= self.right


@dataclass(frozen=True)
class GapStructure:
    """Obstacle positions and obstacle-free intervals of a 1-D environment."""

    radius: int
    obstacle_positions: np.ndarray
    intervals: tuple
    origin_gap_index: Optional[int]

    @property
    def truncated(self) -> bool:
        """True when the box holds no obstacle at all."""
        return self.obstacle_positions.size == 0

    def interior_lengths(self) -> np.ndarray:
        return np.array([iv.length for iv in self.intervals if not iv.truncated], dtype=np.int64)

    def interval_of(self, x: int) -> Optional[Interval]:
        """The interval containing ``x``; None when ``x`` is an obstacle."""
        if abs(x) > self.radius:
            raise DomainError(f"site {x} outside box of radius {self.radius}")
        pos = self.obstacle_positions
        k = int(np.searchsorted(pos, x))
        if k < pos.size and pos[k] == x:
            return None
        lefts = np.array([iv.left for iv in self.intervals])
        j = int(np.searchsorted(lefts, x, side="right")) - 1
        while j >= 0:
            if self.intervals[j].contains(x):
                return self.intervals[j]
            j -= 1
        raise AssertionError("gap structure does not cover the box")

    def interval_between(self, k: int) -> Interval:
        """Interval between obstacles ``y_{k-1}`` and ``y_k``, labelled from the origin.

        ``y_0`` is the first obstacle at a nonnegative site.
        """
        pos = self.obstacle_positions
        i0 = int(np.searchsorted(pos, 0))
        lo, hi = i0 + k - 1, i0 + k
        if lo < 0 or hi >= pos.size:
            raise DomainError(f"gap I_{k} is not bounded by obstacles inside the box")
        left, right = int(pos[lo]) + 1, int(pos[hi]) - 1
        return Interval(left, right, right - left + 1)


def gap_structure(env: Environment) -> GapStructure:
    """Decompose a 1-D environment into obstacles and obstacle-free runs."""
    if env.dim != 1:
        raise DimensionError(f"gap_structure needs dim=1, got dim={env.dim}")
    L = env.radius
    pos = np.flatnonzero(env.occupancy) - L
    intervals = []
    if pos.size == 0:
        intervals.append(Interval(-L, L, 2 * L + 1, True, True))
    else:
        if pos[0] > -L:
            intervals.append(Interval(-L, int(pos[0]) - 1, int(pos[0]) + L, True, False))
        for a, b in zip(pos[:-1], pos[1:]):
            intervals.append(Interval(int(a) + 1, int(b) - 1, int(b - a - 1)))
        if pos[-1] < L:
            intervals.append(Interval(int(pos[-1]) + 1, L, L - int(pos[-1]), False, True))
    origin = None
    for i, iv in enumerate(intervals):
        if iv.contains(0):
            origin = i
            break
    return GapStructure(L, pos.astype(np.int64), tuple(intervals), origin)


# -- gap length sampling -------------------------------------------------------


def sample_gap_lengths(n: int, density: float, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. gap lengths with ``P(l = k) = p (1 - p)^k``, ``k >= 0``."""
    density = _check_density(density, allow_zero=False)
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    return rng.geometric(density, size=int(n)).astype(np.int64) - 1


def binomial_method(trials: int, prob: float) -> str:
    """Sampling regime for one Binomial(trials, prob) draw."""
    mean = trials * prob
    if mean <= EXACT_MAX_MEAN and trials <= EXACT_MAX_TRIALS:
        return "exact"
    if mean <= POISSON_MAX_MEAN and trials > EXACT_MAX_TRIALS:
        return "poisson"
    return "normal"


def draw_binomial(trials, prob: float, rng: np.random.Generator, method: str = "auto"):
    """Binomial draw(s) following the documented approximation regimes.

    ``trials`` may be an integer array; the regime is chosen per element
    unless ``method`` forces one of ``exact``, ``poisson`` or ``normal``.
    """
    trials = np.asarray(trials, dtype=np.int64)
    if prob <= 0.0:
        return np.zeros_like(trials)
    if prob >= 1.0:
        return trials.copy()
    if prob > 0.5:
        # keep approximations in their accurate small-q regime
        return trials - draw_binomial(trials, 1.0 - prob, rng, method)
    out = np.zeros_like(trials)
    flat_t = trials.ravel()
    flat_o = out.ravel()
    if method == "auto":
        mean = flat_t * prob
        methods = np.where(
            (mean <= EXACT_MAX_MEAN) & (flat_t <= EXACT_MAX_TRIALS),
            "exact",
            np.where((mean <= POISSON_MAX_MEAN) & (flat_t > EXACT_MAX_TRIALS), "poisson", "normal"),
        )
    else:
        methods = np.full(flat_t.shape, method)
    for name in ("exact", "poisson", "normal"):
        sel = methods == name
        if not sel.any():
            continue
        k = flat_t[sel]
        if name == "exact":
            draw = rng.binomial(k, prob)
        elif name == "poisson":
            draw = rng.poisson(k * prob)
        else:
            mean = k * prob
            sd = np.sqrt(mean * (1.0 - prob))
            draw = np.floor(mean + sd * rng.standard_normal(k.shape) + 0.5)
        flat_o[sel] = np.clip(draw, 0, k).astype(np.int64)
    return flat_o.reshape(trials.shape)


@dataclass(frozen=True)
class GapHistogram:
    """Counts of gap lengths ``>= l_min`` plus the aggregate count below."""

    n: int
    l_min: int
    counts: dict
    below: int

    def total(self) -> int:
        return self.below + sum(self.counts.values())


def stratified_gap_histogram(
    n: int, density: float, l_min: int, rng: np.random.Generator, method: str = "auto"
) -> GapHistogram:
    """Histogram of ``n`` i.i.d. geometric gap lengths without drawing each gap.

    The count at or above ``l_min`` is drawn first; the strata above are then
    peeled off one length at a time using memorylessness, so that
    ``count[l] ~ Binomial(remaining, p)``.  Every marginal count is
    Binomial(n, p(1-p)^l) and the counts always total ``n``.
    """
    density = _check_density(density, allow_zero=False)
    n = int(n)
    if n < 0 or n > MAX_TRIALS:
        raise ParameterError(f"n must lie in [0, 2^63), got {n}")
    if l_min < 0:
        raise ParameterError(f"l_min must be >= 0, got {l_min}")
    counts = stratified_counts(np.array([n]), density, l_min, rng, method)
    row = counts[0]
    nonzero = {l_min + i: int(c) for i, c in enumerate(row) if c}
    above = int(row.sum())
    return GapHistogram(n, l_min, nonzero, n - above)


def stratified_counts(n, density: float, l_min: int, rng, method: str = "auto") -> np.ndarray:
    """Vectorised core of ``stratified_gap_histogram``.

    Returns an int64 array of shape ``(len(n), K)`` whose column ``j`` counts
    gaps of length ``l_min + j``.
    """
    remaining = draw_binomial(np.asarray(n, dtype=np.int64), (1.0 - density) ** l_min, rng, method)
    columns = []
    while remaining.any():
        c = draw_binomial(remaining, density, rng, method)
        columns.append(c)
        remaining = remaining - c
    if not columns:
        return np.zeros((remaining.size, 1), dtype=np.int64)
    return np.stack(columns, axis=1)


# -- connected free components ---------------------------------------------------


@dataclass(frozen=True)
class FreeComponent:
    """Connected obstacle-free component of a site, clipped to the box."""

    sites: np.ndarray
    touches_boundary: bool
    is_obstacle: bool = False

    @property
    def size(self) -> int:
        return int(self.sites.shape[0])


def free_component(env: Environment, site: Sequence[int]) -> FreeComponent:
    """Nearest-neighbour connected free component containing ``site``."""
    idx = env.index(site)
    if env.occupancy[idx]:
        return FreeComponent(np.empty((0, env.dim), dtype=np.int64), False, True)
    structure = ndimage.generate_binary_structure(env.dim, 1)
    labels, _ = ndimage.label(~env.occupancy, structure=structure)
    mask = labels == labels[idx]
    sites = np.argwhere(mask) - env.radius
    touches = bool(np.any(np.abs(sites) == env.radius))
    return FreeComponent(sites.astype(np.int64), touches)
