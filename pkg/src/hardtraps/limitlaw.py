"""One-dimensional limit laws for spatial sums of survival probabilities.

On the exponential scale ``L(t) = exp(nu [gamma c2 t^(1/3) / nu]_-)`` the
sum of ``p(x, t)`` over ``[-L, L]`` is, up to boundary effects, a sum of
``n(t)`` i.i.d. gap contributions ``X_k = sum_{x in I_k} p(x, t)``.  After
normalisation these converge to an infinitely divisible law whose Levy
measure is purely atomic, with atoms at ``z_j = exp(nu j / a1)``.

Conventions
-----------
``-L(x)`` denotes the Levy tail ``lim n P(Y > x)``; it equals
``C exp(-nu floor((a1/nu) ln x))`` with ``C = 2 c p / (1 - p)`` and is
right-continuous, so the atom at ``z_j`` has mass ``m_j = C p (1-p)^(j-1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import regimes, spectral, survival
from .env import Environment, gap_structure, stratified_counts
from .errors import ConvergenceError, DivergenceError, DomainError, ParameterError, TimeTooSmallError

ELL1 = spectral.ELL1
# Relative slack used when flooring at atom locations, so that values
# computed at z_j land on the right-continuous side.
FLOOR_SLACK = 1e-9
MAX_GAPS = 2**62


def _floor(v: float) -> int:
    return math.floor(v + FLOOR_SLACK * max(1.0, abs(v)))


def bracket_minus(x: float) -> int:
    """Left limit of the integer part, ``ceil(x) - 1``."""
    return math.ceil(x) - 1


def a1_of_gamma(gamma: float) -> float:
    return (1.5 * gamma) ** 3


# -- scaling -------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingParams:
    """Scales of the one-dimensional limit theorem for given ``(gamma, p, c)``."""

    gamma: float
    p: float
    c: float
    nu: float
    c2: float
    a1: float
    s1: float

    @property
    def tail_constant(self) -> float:
        """``C = 2 c p / (1 - p)``, the Levy tail at ``x = 1``."""
        return 2.0 * self.c * self.p / (1.0 - self.p)

    def scale_argument(self, t: float) -> float:
        return self.gamma * self.c2 * t ** (1.0 / 3.0) / self.nu

    def bracket(self, t: float) -> int:
        return bracket_minus(self.scale_argument(t))

    def L(self, t: float) -> float:
        return math.exp(self.nu * self.bracket(t))

    def n(self, t: float) -> int:
        """Number of gaps ``2 floor(c L p / (1-p)) + 1``."""
        r = math.floor(self.c * self.L(t) * self.p / (1.0 - self.p))
        n = 2 * r + 1
        if n > MAX_GAPS:
            raise ParameterError(f"n(t) = {n} overflows 64-bit gap counts")
        return n

    def normalizer(self, t: float) -> float:
        b = self.bracket(t)
        if b < 1:
            raise TimeTooSmallError(f"bracket(t) = {b} < 1 at t = {t}")
        return self.s1 * t ** (1.0 / 3.0) * math.exp(-4.0 * t * ELL1 / b**2)


def scaling_params(gamma: float, p: float, c: float = 1.0) -> ScalingParams:
    if not gamma > 0:
        raise ParameterError(f"gamma must be > 0, got {gamma}")
    if not 0.0 < p < 1.0:
        raise ParameterError(f"p must lie in (0, 1), got {p}")
    if not c > 0:
        raise ParameterError(f"c must be > 0, got {c}")
    k = regimes.constants(1, p)
    s1 = gamma * k.c2 / (ELL1 * k.nu)
    return ScalingParams(float(gamma), float(p), float(c), k.nu, k.c2, a1_of_gamma(gamma), s1)


def time_for_bracket(params: ScalingParams, b: int, frac: float = 1.0) -> float:
    """Time at which ``gamma c2 t^(1/3) / nu = b + frac``; ``frac`` in (0, 1].

    Every ``frac`` in (0, 1] gives ``bracket(t) = b``; ``frac = 1`` is the
    last time of the plateau.
    """
    if b < 1:
        raise ParameterError(f"b must be >= 1, got {b}")
    if not 0.0 < frac <= 1.0:
        raise ParameterError(f"frac must lie in (0, 1], got {frac}")
    t = ((b + frac) * params.nu / (params.gamma * params.c2)) ** 3
    while params.bracket(t) > b:
        t = math.nextafter(t, 0.0)
    while params.bracket(t) < b:
        t = math.nextafter(t, math.inf)
    return t


# -- gap contributions ---------------------------------------------------------------


@dataclass(frozen=True)
class XkTerm:
    """Leading-order gap contribution with its relative envelope."""

    l: int
    t: float
    leading: float
    envelope: float

    @property
    def interval(self) -> tuple:
        return (self.leading * (1.0 - self.envelope), self.leading * (1.0 + self.envelope))

    def contains(self, value: float) -> bool:
        lo, hi = self.interval
        return lo <= value <= hi


def xk_term(l: int, t: float, corrected: bool = False) -> XkTerm:
    """``(2(l+1)/ell1) exp(-4 t ell1 / (l+1)^2)`` with the combined relative envelope.

    The exponent error enters as a factor ``exp(+-4 t ell1 |o1| / (l+1)^2)``
    and the prefactor error as ``1 +- o4``.  The exact gap sum tends to half
    the default leading term (the squared mass of the principal mode is
    ``(l+1)/ell1`` to leading order); ``corrected=True`` uses that prefactor.
    """
    if l < 0 or t < 0:
        raise ParameterError("need l >= 0 and t >= 0")
    m = l + 1.0
    pref = (1.0 if corrected else 2.0) * m / ELL1
    leading = pref * math.exp(-4.0 * t * ELL1 / m**2)
    o1 = math.pi**2 / (12.0 * m**2)
    delta = 4.0 * t * ELL1 * o1 / m**2
    expo = -t * 2.0 * math.pi**2 / m**2 * (1.0 - 10.0 / m**2)
    if expo > 700.0 or delta > 700.0:
        # tiny l: the envelope is vacuous
        return XkTerm(int(l), float(t), leading, math.inf)
    o4 = 200.0 / m + 500.0 * math.exp(expo)
    envelope = math.exp(delta) * (1.0 + o4) - 1.0
    return XkTerm(int(l), float(t), leading, envelope)


def gap_values(params: ScalingParams, t: float, l_max: int) -> np.ndarray:
    """``Y(l) = X(l) / normalizer(t)`` for ``l = 0 .. l_max`` (``Y(0) = 0``)."""
    norm = params.normalizer(t)
    y = np.zeros(l_max + 1)
    for l in range(1, l_max + 1):
        y[l] = survival.interval_sum_survival(l, t) / norm
    return y


def _geometric_sum(params: ScalingParams, t: float, f, k: int = 1, rel_tol: float = 1e-12) -> float:
    """``sum_l p (1-p)^l f(l, Y(l))`` truncated once the geometric tail bound is below ``rel_tol``.

    ``|f(l, y)|`` must be at most ``y^k`` (at most 1 for ``k = 0``); the
    tail bound uses ``Y(l) <= l / norm``.
    """
    p, q = params.p, 1.0 - params.p
    norm = params.normalizer(t)
    terms = []
    l = 0
    while True:
        y = survival.interval_sum_survival(l, t) / norm if l > 0 else 0.0
        terms.append(p * q**l * f(l, y))
        if l > 4 * (params.bracket(t) + 1):
            # the remaining terms are bounded by a geometric series in q (1 + 1/l)^k
            bound = p * q ** (l + 1) * ((l + 1) / norm) ** k
            ratio = q * (1.0 + 1.0 / l) ** k
            if ratio < 1 and bound / (1 - ratio) <= rel_tol * abs(math.fsum(terms)):
                break
            if q**l == 0.0:
                break
        l += 1
    return math.fsum(terms)


def expected_gap_value(params: ScalingParams, t: float, k: int = 1, tau: float = math.inf) -> float:
    """``E[Y^k ; Y <= tau]`` for one gap, by exact summation over the gap law."""
    return _geometric_sum(params, t, lambda l, y: y**k if y <= tau else 0.0, k)


def single_gap_tail(params: ScalingParams, t: float, x: float) -> float:
    """``P(Y > x)`` for one gap, exactly."""
    return _geometric_sum(params, t, lambda l, y: 1.0 if y > x else 0.0, 0)


def truncated_moment_finite_t(k: int, tau: float, gamma: float, p: float, c: float, t: float) -> float:
    """``n(t) E[Y^k ; Y <= tau]`` at finite ``t``."""
    params = scaling_params(gamma, p, c)
    if params.bracket(t) < 1:
        raise TimeTooSmallError(f"bracket(t) < 1 at t = {t}")
    return params.n(t) * expected_gap_value(params, t, k, tau)


# -- Levy measure -------------------------------------------------------------


def levy_tail(x: float, gamma: float, p: float, c: float = 1.0) -> float:
    """``-L(x) = C exp(-nu floor((a1/nu) ln x))`` for ``x > 0``; 0 for ``x <= 0``."""
    if x <= 0:
        return 0.0
    params = scaling_params(gamma, p, c)
    j = _floor(params.a1 / params.nu * math.log(x))
    return params.tail_constant * math.exp(-params.nu * j)


def atom_position(params: ScalingParams, j) -> np.ndarray:
    return np.exp(params.nu * np.asarray(j, dtype=float) / params.a1)


def atom_mass(params: ScalingParams, j) -> np.ndarray:
    """``m_j = C p (1-p)^(j-1)``; overflows to ``inf`` for very negative ``j``."""
    j = np.asarray(j, dtype=float)
    with np.errstate(over="ignore"):
        return np.exp(math.log(params.tail_constant * params.p) + (j - 1.0) * math.log1p(-params.p))


def atom_x2_weight(params: ScalingParams, j) -> np.ndarray:
    """``z_j^2 m_j``, finite for every ``j`` when ``a1 < 2``."""
    j = np.asarray(j, dtype=float)
    log_w = 2.0 * params.nu * j / params.a1 + math.log(params.tail_constant * params.p) + (j - 1.0) * math.log1p(-params.p)
    return np.exp(log_w)


@dataclass(frozen=True)
class LevyAtoms:
    """Atoms ``z_j``, masses ``m_j`` for ``j_min <= j <= j_max`` and the truncation bound."""

    params: ScalingParams
    j: np.ndarray
    positions: np.ndarray
    masses: np.ndarray
    u_max: float
    truncation_error: float
    x2_weights: Optional[np.ndarray] = None

    @property
    def j_min(self) -> int:
        return int(self.j[0])

    @property
    def j_max(self) -> int:
        return int(self.j[-1])

    def x2_ratio(self) -> float:
        """Geometric ratio ``(1-p)^(2/a1 - 1)`` of ``z_j^2 m_j`` from ``j`` to ``j - 1``."""
        return (1.0 - self.params.p) ** (2.0 / self.params.a1 - 1.0)


def levy_atoms(gamma: float, p: float, c: float = 1.0, u_max: float = 5.0, tol: float = 1e-12,
               max_atoms: int = 10**6) -> LevyAtoms:
    """Atoms of the Levy measure with an explicit truncation bound for ``|u| <= u_max``.

    For ``z <= 1`` the integrand satisfies
    ``|e^{iuz} - 1 - iuz/(1+z^2)| <= (u^2/2 + |u|) z^2``, and for ``z >= 1``
    it is at most ``2 + |u|``; the neglected small atoms form a geometric
    series in ``z_j^2 m_j`` and the large ones a geometric series in ``m_j``.
    More than ``max_atoms`` atoms raises ``ConvergenceError``.
    """
    params = scaling_params(gamma, p, c)
    if params.a1 >= 2.0:
        raise DivergenceError(
            f"a1 = {params.a1:.6g} >= 2: the Levy measure has infinite second moment near 0 "
            f"(requires gamma < gamma2 = {regimes.gamma2(1):.6f})"
        )
    q = 1.0 - p
    C = params.tail_constant
    u = abs(float(u_max))
    r = q ** (2.0 / params.a1 - 1.0)
    # z_j^2 m_j = C p / q * r^{-j}; neglected j < j_min sum to C p / q * r^{1 - j_min} / (1 - r)
    small_coef = (u * u / 2.0 + u) * C * p / q / (1.0 - r)
    j_min = min(0, math.floor(1.0 - math.log(tol / 2 / small_coef) / math.log(r))) if small_coef > 0 else 0
    # atoms above j_max carry total mass C q^{j_max}
    j_max = max(1, math.ceil(math.log(tol / 2 / ((2.0 + u) * C)) / math.log(q)))
    err = small_coef * r ** (1 - j_min) + (2.0 + u) * C * q**j_max
    if j_max - j_min + 1 > max_atoms:
        raise ConvergenceError(
            f"{j_max - j_min + 1} atoms needed for tolerance {tol:g} (a1 = {params.a1:.12g} is too close to 2)",
            err,
        )
    j = np.arange(j_min, j_max + 1)
    return LevyAtoms(params, j, atom_position(params, j), atom_mass(params, j), u, err, atom_x2_weight(params, j))


@dataclass(frozen=True)
class BetaResult:
    """Drift from the Levy measure, with the closed series and their discrepancy.

    ``series_value`` is NaN when the closed series diverges.
    """

    which: str
    value: float
    series_value: float
    series_alt_value: float
    discrepancy: float
    terms: int


def _bilateral_sum(term, tol: float, max_terms: int = 100_000) -> tuple:
    """Sum ``term(k)`` over all integers, stopping when terms drop below ``tol * |sum|``."""
    total = [term(0)]
    n = 1
    for direction in (1, -1):
        k = direction
        prev = abs(term(0))
        while True:
            v = term(k)
            total.append(v)
            n += 1
            s = abs(math.fsum(total))
            if abs(v) <= tol * s and abs(v) <= prev:
                break
            if n > max_terms or not math.isfinite(v):
                raise DivergenceError(f"series does not converge (term at k={k} is {v:.3g})")
            prev = abs(v)
            k += direction
    return math.fsum(total), n


def beta(gamma: float, p: float, c: float = 1.0, which: str = "beta1", tol: float = 1e-15) -> BetaResult:
    """Drift constant of the limit law.

    ``beta1`` (uncentred sums, ``a1 < 1``) is ``int x/(1+x^2) dL``;
    ``beta2`` (centred sums, ``1 < a1 < 2``) is ``-int x^3/(1+x^2) dL``.
    The closed series with prefactor ``2p/(1-p)`` and the variant with
    ``2 c p^2 / (1-p)^2`` are evaluated alongside; the latter coincides with
    the measure integral for ``beta1``.
    """
    params = scaling_params(gamma, p, c)
    a1, q = params.a1, 1.0 - p
    C = params.tail_constant

    def den(k):
        return q ** (k / a1) + q ** (-k / a1)

    if which == "beta1":
        if a1 >= 1.0:
            raise DivergenceError(f"beta1 needs a1 < 1 (gamma < gamma1), got a1 = {a1:.6g}")
        value, n = _bilateral_sum(lambda j: C * p * q ** (j - 1) / den(j), tol)
        series_num = lambda k: q**k
    elif which == "beta2":
        if not 1.0 < a1 < 2.0:
            raise DivergenceError(f"beta2 needs 1 < a1 < 2 (gamma1 < gamma < gamma2), got a1 = {a1:.6g}")
        value, n = _bilateral_sum(lambda j: -C * p * q ** (j - 1) * q ** (-2.0 * j / a1) / den(j), tol)
        series_num = lambda k: q ** (k * (1.0 + 2.0 / a1))
    else:
        raise ParameterError(f"which must be 'beta1' or 'beta2', got {which!r}")
    try:
        core, _ = _bilateral_sum(lambda k: series_num(k) / den(k), tol)
        series = 2.0 * p / q * core
        alt = 2.0 * c * p * p / (q * q) * core
    except (DivergenceError, OverflowError):
        series = alt = math.nan
    disc = abs(value - series) if math.isfinite(series) else math.inf
    return BetaResult(which, value, series, alt, disc, n)


@dataclass(frozen=True)
class LevyTriple:
    """``(beta, sigma^2, atoms)`` of an infinitely divisible law."""

    beta: float
    sigma2: float
    atoms: LevyAtoms


def limit_triple(gamma: float, p: float, c: float = 1.0, centered: bool = False,
                 u_max: float = 5.0, tol: float = 1e-12) -> LevyTriple:
    """Levy triple of the limit law for uncentred (``a1 < 1``) or centred (``1 < a1 < 2``) sums."""
    atoms = levy_atoms(gamma, p, c, u_max, tol)
    b = beta(gamma, p, c, "beta2" if centered else "beta1")
    return LevyTriple(b.value, 0.0, atoms)


def _second_order_kernel(v: np.ndarray) -> np.ndarray:
    """``(e^{iv} - 1 - iv) / v^2`` with a series near 0."""
    v = np.asarray(v, dtype=float)
    out = np.empty(v.shape, dtype=complex)
    small = np.abs(v) < 1e-4
    vs = v[small]
    out[small] = -0.5 - 1j * vs / 6.0 + vs * vs / 24.0
    vb = v[~small]
    out[~small] = (-2.0 * np.sin(vb / 2.0) ** 2 + 1j * (np.sin(vb) - vb)) / (vb * vb)
    return out


def char_fn(u, triple: LevyTriple):
    """``exp(i beta u - sigma^2 u^2 / 2 + sum_j (e^{iu z_j} - 1 - iu z_j/(1+z_j^2)) m_j)``."""
    u_arr = np.atleast_1d(np.asarray(u, dtype=float))
    z = triple.atoms.positions
    w = triple.atoms.x2_weights
    m = triple.atoms.masses
    if w is None:
        w = z * z * m
    small = z <= 1.0
    out = np.empty(u_arr.shape, dtype=complex)
    for i, uu in enumerate(u_arr):
        if uu == 0.0:
            out[i] = 1.0
            continue
        # small atoms: m (e^{iuz} - 1 - iuz/(1+z^2)) = z^2 m (u^2 K(uz) + iu z/(1+z^2)),
        # which avoids m = inf times z = 0; large atoms use the direct form
        terms = np.where(
            small,
            w * (uu * uu * _second_order_kernel(uu * z) + 1j * uu * z / (1.0 + z * z)),
            (np.exp(1j * uu * z) - 1.0 - 1j * uu * z / (1.0 + z * z)) * np.where(small, 0.0, m),
        )
        re = math.fsum(terms.real)
        im = math.fsum(terms.imag)
        out[i] = np.exp(complex(re, im + triple.beta * uu) - 0.5 * triple.sigma2 * uu * uu)
    return out[0] if np.ndim(u) == 0 else out


def empirical_cf(samples, u_grid):
    """``(1/n) sum_k exp(i u x_k)`` for each ``u``."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ParameterError("empirical_cf needs at least one sample")
    u = np.atleast_1d(np.asarray(u_grid, dtype=float))
    out = np.empty(u.shape, dtype=complex)
    for i, uu in enumerate(u):
        ph = uu * x
        out[i] = complex(math.fsum(np.cos(ph)), math.fsum(np.sin(ph))) / x.size
    return out[0] if np.ndim(u_grid) == 0 else out


def truncated_moment_limit(k: int, tau: float, gamma: float, p: float, c: float = 1.0,
                           form: str = "measure") -> float:
    """Limit of ``n(t) E[Y^k ; Y <= tau]``.

    ``form="measure"`` returns ``int_0^tau x^k dL = sum_{z_j <= tau} z_j^k m_j``,
    i.e. ``2c (p/(1-p))^2 (1-p)^(J (1 - k/a1)) / (1 - (1-p)^(k/a1 - 1))``
    with ``J = floor((a1/nu) ln tau)``.  ``form="printed"`` uses the exponent
    ``J (k/a1 - 1)`` and denominator ``1 - (1-p)^(1/a1 - 1)``; both agree
    for ``k = 1`` and ``J = 0``.
    """
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    if not tau > 0:
        raise ParameterError(f"tau must be > 0, got {tau}")
    params = scaling_params(gamma, p, c)
    a1, q = params.a1, 1.0 - p
    if params.a1 >= 2.0:
        raise DivergenceError(f"a1 = {a1:.6g} >= 2")
    J = _floor(a1 / params.nu * math.log(tau))
    pref = 2.0 * c * (p / q) ** 2
    if form == "measure":
        ratio = q ** (k / a1 - 1.0)
        if ratio >= 1.0:
            raise DivergenceError(f"(1-p)^(k/a1 - 1) = {ratio:.6g} >= 1 (need k > a1)")
        return pref * q ** (J * (1.0 - k / a1)) / (1.0 - ratio)
    if form == "printed":
        ratio = q ** (1.0 / a1 - 1.0)
        if ratio >= 1.0:
            raise DivergenceError(f"(1-p)^(1/a1 - 1) = {ratio:.6g} >= 1")
        return pref * q ** (J * (k / a1 - 1.0)) / (1.0 - ratio)
    raise ParameterError(f"form must be 'measure' or 'printed', got {form!r}")


# -- sampling ---------------------------------------------------------------------


@dataclass(frozen=True)
class NormalizedSums:
    """Draws of the normalised gap sum together with their per-draw tail counts."""

    params: ScalingParams
    t: float
    n_gaps: int
    centered: bool
    values: np.ndarray
    counts: np.ndarray
    gap_values: np.ndarray
    mean_shift: float

    def tail_counts(self, x: float) -> np.ndarray:
        """Per draw, the number of gaps with ``Y > x``."""
        sel = self.gap_values[: self.counts.shape[1]] > x
        return self.counts[:, sel].sum(axis=1)


def normalized_sum_samples(gamma: float, p: float, c: float, t: float, n_draws: int,
                           rng: np.random.Generator, centered: bool = False,
                           n_gaps: Optional[int] = None, method: str = "auto") -> NormalizedSums:
    """Draws of ``sum_{k} X_k / normalizer(t)`` over ``n(t)`` i.i.d. gaps.

    Gap counts per length come from the stratified histogram so no gap is
    materialised.  With ``centered`` the exact ``n E[Y]`` is subtracted.
    """
    params = scaling_params(gamma, p, c)
    if params.bracket(t) < 1:
        raise TimeTooSmallError(f"bracket(t) < 1 at t = {t}")
    if n_draws < 1:
        raise ParameterError(f"n_draws must be >= 1, got {n_draws}")
    n = params.n(t) if n_gaps is None else int(n_gaps)
    counts = stratified_counts(np.full(n_draws, n, dtype=np.int64), p, 0, rng, method)
    y = gap_values(params, t, counts.shape[1] - 1)
    prods = counts * y[None, :]
    sums = np.array([math.fsum(row) for row in prods])
    shift = n * expected_gap_value(params, t) if centered else 0.0
    return NormalizedSums(params, t, n, centered, sums - shift, counts, y, shift)


def normalized_sum_sample(gamma: float, p: float, c: float, t: float, rng: np.random.Generator,
                          centered: bool = False, n_gaps: Optional[int] = None) -> float:
    """One draw of the normalised gap sum."""
    return float(normalized_sum_samples(gamma, p, c, t, 1, rng, centered, n_gaps).values[0])


@dataclass(frozen=True)
class CfExperiment:
    """Normalised-sum draws at several times compared with the limit law.

    ``rows`` holds per-time diagnostics: the sup distance between the
    empirical and limiting characteristic functions on the ``u`` grid and
    the empirical and exact single-gap tail ``n(t) P(Y > 1)``.
    """

    times: tuple
    u: np.ndarray
    phi: np.ndarray
    beta: float
    tail_limit: float
    samples: tuple
    ecf: tuple
    rows: tuple

    @property
    def max_cf_diffs(self) -> list:
        return [r["max_cf_diff"] for r in self.rows]

    @property
    def cf_nonincreasing(self) -> bool:
        d = self.max_cf_diffs
        return all(b <= a for a, b in zip(d, d[1:]))


def cf_experiment(gamma: float, p: float, c: float, times, n_draws: int, seed: int,
                  centered: bool = False, u_max: float = 5.0, u_points: int = 5001) -> CfExperiment:
    """Draw ``n_draws`` normalised sums at each time and compare them with the limit law.

    Draws at time index ``k`` use ``np.random.default_rng([seed, k])``.
    """
    g2 = regimes.gamma2(1)
    if not 0.0 < gamma < g2:
        raise ParameterError(
            f"gamma = {gamma} is outside (0, gamma2) = (0, {g2:.6f}): the limit law needs "
            f"a1 = (3 gamma / 2)^3 < 2, here a1 = {a1_of_gamma(gamma):.6g}"
        )
    triple = limit_triple(gamma, p, c, centered=centered, u_max=u_max)
    u = np.linspace(0.0, u_max, u_points)
    phi = char_fn(u, triple)
    tail_limit = levy_tail(1.0, gamma, p, c)
    samples, ecfs, rows = [], [], []
    for k, t in enumerate(times):
        draws = normalized_sum_samples(gamma, p, c, t, n_draws, np.random.default_rng([seed, k]), centered=centered)
        ecf = empirical_cf(draws.values, u)
        diff = np.abs(ecf - phi)
        i = int(np.argmax(diff))
        params = draws.params
        tail_emp = float(np.mean(draws.tail_counts(1.0)))
        rows.append({
            "t": float(t), "bracket": params.bracket(t), "n_gaps": params.n(t), "normalizer": params.normalizer(t),
            "max_cf_diff": float(diff[i]), "argmax_u": float(u[i]),
            "tail_empirical": tail_emp, "tail_exact": params.n(t) * single_gap_tail(params, t, 1.0),
            "tail_rel_gap": abs(tail_emp / tail_limit - 1.0),
        })
        samples.append(draws.values)
        ecfs.append(ecf)
    return CfExperiment(tuple(float(t) for t in times), u, phi, triple.beta, tail_limit,
                        tuple(samples), tuple(ecfs), tuple(rows))


# -- finite-volume sandwich ---------------------------------------------------------


@dataclass(frozen=True)
class SandwichReport:
    t: float
    L: int
    m: int
    M: int
    lower: float
    middle: float
    upper: float
    lower_leading: float
    upper_leading: float
    count_rule: str

    @property
    def passed(self) -> bool:
        return self.lower <= self.middle <= self.upper


def gap_count(L: float, density: float, eps: float, rule: str) -> tuple:
    """``(m, M)``: gap indices bracketing ``[-L, L]``.

    ``rule="density"`` uses ``p`` gaps per site (``E[l + 1] = 1/p``);
    ``rule="odds"`` uses ``p / (1-p)`` per site.
    """
    if rule == "density":
        rate = density
    elif rule == "odds":
        rate = density / (1.0 - density)
    else:
        raise ParameterError(f"rule must be 'density' or 'odds', got {rule!r}")
    return math.floor((1.0 - eps) * L * rate), math.floor((1.0 + eps) * L * rate)


def sandwich_check(env: Environment, t: float, gamma: float, eps: float,
                   c: float = 1.0, count_rule: str = "density") -> SandwichReport:
    """Compare ``sum_{|x| <= L(t)} p(x, t)`` with whole-gap sums over ``2m+1`` and ``2M+1`` gaps.

    Gaps are labelled from the first obstacle at a nonnegative site.  The
    flanks use exact interval sums; the leading-term flanks are reported too.
    """
    if not 0.0 < eps < 1.0:
        raise ParameterError(f"eps must lie in (0, 1), got {eps}")
    gaps = gap_structure(env)
    if gaps.truncated:
        raise DomainError("environment has no obstacle in the box")
    params = scaling_params(gamma, env.density, c)
    Lt = params.L(t)
    L = int(math.floor(Lt))
    if L > env.radius:
        raise DomainError(f"L(t) = {L} exceeds the environment radius {env.radius}")
    m, M = gap_count(Lt, env.density, eps, count_rule)

    def flank(K):
        exact, lead = [], []
        for k in range(-K, K + 1):
            iv = gaps.interval_between(k)
            if iv.length > 0:
                exact.append(survival.interval_sum_survival(iv.length, t))
            lead.append(xk_term(iv.length, t).leading)
        return math.fsum(exact), math.fsum(lead)

    lower, lower_lead = flank(m)
    upper, upper_lead = flank(M)
    lo, hi = survival.survival_sum_1d(gaps, t, -L, L)
    if hi != lo:
        raise DomainError("a gap reaching [-L, L] is cut by the box edge; enlarge the environment")
    return SandwichReport(t, L, m, M, lower, lo, upper, lower_lead, upper_lead, count_rule)
