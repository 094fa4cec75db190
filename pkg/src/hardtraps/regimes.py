"""Model constants, the six averaging regimes, and the critical function a(gamma).

All rates are expressed in units of ``c2(d, p)``, so ``a(gamma)`` and the
phase-diagram curve ``abar(gamma)`` are dimensionless.
"""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from typing import Iterable, Optional, Union
from xml.sax.saxutils import escape

from scipy import special

from .errors import ParameterError

# Site-percolation threshold on Z^2 (numerical literature value, not derived here).
PC_LITERATURE = {2: 0.592746}

BESSEL_TOL = 1e-12


def bessel_first_zero(order: float, tol: float = BESSEL_TOL) -> float:
    """First positive zero of ``J_order`` (``order >= -1/2``) by scan and bisection."""
    if order < -0.5:
        raise ParameterError(f"order must be >= -1/2, got {order}")
    step = 0.05
    a = 1e-3
    fa = special.jv(order, a)
    while True:
        b = a + step
        fb = special.jv(order, b)
        if fa == 0.0:
            return a
        if fa * fb < 0:
            break
        a, fa = b, fb
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = special.jv(order, m)
        if fa * fm <= 0:
            b = m
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def ell(d: int) -> float:
    """Principal Dirichlet eigenvalue of ``-(1/2d) Laplacian`` on the unit ball."""
    j = bessel_first_zero(d / 2.0 - 1.0)
    return j * j / (2.0 * d)


def _check_dim(d: int) -> int:
    if int(d) != d or d < 1:
        raise ParameterError(f"dimension must be a positive integer, got {d}")
    return int(d)


def gamma1(d: int) -> float:
    return 2.0 / (d + 2)


def gamma2(d: int) -> float:
    return 2.0 ** (d / (d + 2.0)) * gamma1(d)


@dataclass(frozen=True)
class DomainConstants:
    d: int
    p: float
    nu: float
    w_d: float
    ell_d: float
    R0: float
    c1: float
    c2: float
    alpha: float
    alpha_prime: float
    gamma1: float
    gamma2: float
    p_c: Optional[float] = None


def constants(d: int, p: float, p_c: Optional[float] = None) -> DomainConstants:
    """All named constants for dimension ``d`` and obstacle density ``p``.

    ``p_c`` is carried along for reference only; it defaults to the
    literature table when available.
    """
    d = _check_dim(d)
    if not 0.0 < p < 1.0:
        raise ParameterError(f"p must lie in (0, 1), got {p}")
    nu = -math.log1p(-p)
    w = unit_ball_volume(d)
    l = ell(d)
    R0 = (d / (w * nu)) ** (1.0 / d)
    c1 = l / R0**2
    c2 = (w * nu) ** (2.0 / (d + 2)) * ((d + 2) / 2.0) * (2.0 * l / d) ** (d / (d + 2.0))
    if p_c is None:
        p_c = PC_LITERATURE.get(d)
    return DomainConstants(d, p, nu, w, l, R0, c1, c2, d / 2.0, d / (d + 2.0), gamma1(d), gamma2(d), p_c)


def a_of_gamma(d: int, gamma: float) -> float:
    """``a(gamma) = (d/(d+2)) ((d+2)/2 gamma)^(-2/d) + gamma``."""
    d = _check_dim(d)
    if not gamma > 0:
        raise ParameterError(f"gamma must be > 0, got {gamma}")
    return (d / (d + 2.0)) * (((d + 2) / 2.0) * gamma) ** (-2.0 / d) + gamma


def abar(d: int, gamma: float) -> float:
    """Decay rate of the averaged survival probability in units of ``c2``."""
    d = _check_dim(d)
    if gamma < 0:
        raise ParameterError(f"gamma must be >= 0, got {gamma}")
    if gamma == 0:
        return 0.0
    if gamma < gamma1(d):
        return a_of_gamma(d, gamma)
    return 1.0


def half_gamma_minimum(d: int, n_grid: int = 200_001, hi: Optional[float] = None) -> tuple:
    """Grid minimum of ``a(gamma) - gamma/2``; returns ``(value, argmin, step)``."""
    hi = 2.0 * gamma2(d) if hi is None else hi
    step = hi / (n_grid - 1)
    best = (math.inf, math.nan)
    for i in range(1, n_grid):
        g = i * step
        v = a_of_gamma(d, g) - g / 2.0
        if v < best[0]:
            best = (v, g)
    return best[0], best[1], step


class RegimeCase(enum.Enum):
    CASE1 = 1
    CASE2 = 2
    CASE3 = 3
    CASE4 = 4
    CASE5 = 5
    CASE6 = 6

    def __str__(self) -> str:
        return f"Case{self.value}"


@dataclass(frozen=True)
class Classification:
    d: int
    descriptor: object
    cases: frozenset

    def __contains__(self, case) -> bool:
        return case in self.cases

    def label(self) -> str:
        return "|".join(str(c) for c in sorted(self.cases, key=lambda c: c.value))


_POWER = re.compile(r"^\s*(?:l\(t\)\s*=\s*)?t\s*(?:\^\s*\(?\s*([0-9.]+)\s*\)?)?\s*$")
_LOG = re.compile(r"^\s*(?:l\(t\)\s*=\s*)?log\s*\(?\s*t\s*\)?\s*$")
_STRETCHED = re.compile(r"^\s*(?:l\(t\)\s*=\s*)?exp\s*\(\s*t\s*\^\s*\(?\s*([0-9./]+)\s*\)?\s*\)\s*$")
_NAMED = {
    "polynomial-below-t": {RegimeCase.CASE1},
    "between-t-and-subexponential": {RegimeCase.CASE2},
}


def _fraction(text: str) -> float:
    if "/" in text:
        a, b = text.split("/")
        return float(a) / float(b)
    return float(text)


def _classify_growth(d: int, text: str) -> set:
    key = text.strip().lower()
    if key in _NAMED:
        return set(_NAMED[key])
    if _LOG.match(key):
        return {RegimeCase.CASE1}
    m = _POWER.match(key)
    if m:
        a = float(m.group(1)) if m.group(1) else 1.0
        if a <= 0:
            raise ParameterError(f"'{text}': L(t) must grow to infinity")
        if a < 1:
            return {RegimeCase.CASE1}
        if a == 1:
            return {RegimeCase.CASE1, RegimeCase.CASE2}
        return {RegimeCase.CASE2}
    m = _STRETCHED.match(key)
    if m:
        b = _fraction(m.group(1))
        if b < d / (d + 2.0):
            return {RegimeCase.CASE2}
        if b == d / (d + 2.0):
            raise ParameterError(
                f"'{text}' is on the exponential scale; give gamma with "
                f"L(t) = exp(gamma c2 t^(d/(d+2)) / d)"
            )
        return {RegimeCase.CASE5, RegimeCase.CASE6}
    raise ParameterError(
        f"cannot classify growth descriptor '{text}'; give a float gamma or one of "
        f"'t^a', 'log t', 'exp(t^b)', {sorted(_NAMED)}"
    )


def classify(d: int, descriptor: Union[float, str]) -> Classification:
    """Table-1 cases whose conditions the scale descriptor satisfies.

    A float is the exponent ``gamma`` of ``L(t) = exp(gamma c2 t^(d/(d+2)) / d)``;
    a string describes a growth class.  Cases 5 and 6 are lower-bound
    conditions, so several cases may hold at once.  At ``gamma = gamma1``
    case 3 applies (its rate statement covers ``gamma <= gamma1``).
    """
    d = _check_dim(d)
    if isinstance(descriptor, str):
        return Classification(d, descriptor, frozenset(_classify_growth(d, descriptor)))
    g = float(descriptor)
    if not g > 0:
        raise ParameterError(f"gamma must be > 0, got {descriptor}")
    g1, g2 = gamma1(d), gamma2(d)
    cases = set()
    if g <= g1:
        cases.add(RegimeCase.CASE3)
    if g1 < g < g2:
        cases.add(RegimeCase.CASE4)
    if g > g1:
        cases.add(RegimeCase.CASE5)
    if g > g2:
        cases.add(RegimeCase.CASE6)
    return Classification(d, g, frozenset(cases))


@dataclass(frozen=True)
class Figure1Row:
    gamma: float
    abar: float
    inv_abar: float
    cases: str


def figure1_table(d: int, gamma_grid: Iterable[float]) -> list:
    """Rows ``(gamma, abar, 1/abar, cases)``; ``gamma = 0`` gives ``1/abar = inf``."""
    rows = []
    for g in gamma_grid:
        g = float(g)
        a = abar(d, g)
        inv = math.inf if a == 0 else 1.0 / a
        label = classify(d, g).label() if g > 0 else ""
        rows.append(Figure1Row(g, a, inv, label))
    return rows


def figure1_svg(rows, d: int, width: int = 640, height: int = 400) -> str:
    """Line plot of ``1/abar`` against ``gamma`` with markers at ``gamma1`` and ``gamma2``."""
    pts = [(r.gamma, r.inv_abar) for r in rows if math.isfinite(r.inv_abar)]
    if not pts:
        raise ParameterError("no finite points to plot")
    g1, g2 = gamma1(d), gamma2(d)
    xmax = max(max(p[0] for p in pts), g2) * 1.05
    ymax = 1.1
    pad = 50

    def sx(x):
        return pad + (width - 2 * pad) * x / xmax

    def sy(y):
        return height - pad - (height - 2 * pad) * y / ymax

    poly = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{sy(0):.2f}" x2="{width - pad}" y2="{sy(0):.2f}" stroke="black"/>',
        f'<line x1="{pad}" y1="{sy(0):.2f}" x2="{pad}" y2="{pad}" stroke="black"/>',
        f'<text x="{width / 2:.0f}" y="{height - 10}" text-anchor="middle">gamma</text>',
        f'<text x="15" y="{height / 2:.0f}" transform="rotate(-90 15 {height / 2:.0f})" text-anchor="middle">1/abar</text>',
    ]
    for name, g in (("gamma1", g1), ("gamma2", g2)):
        parts.append(
            f'<line class="marker" data-gamma="{g:.6f}" x1="{sx(g):.2f}" y1="{sy(0):.2f}" '
            f'x2="{sx(g):.2f}" y2="{pad}" stroke="gray" stroke-dasharray="4 4"/>'
        )
        parts.append(f'<text x="{sx(g):.2f}" y="{pad - 8}" text-anchor="middle">{escape(name)}={g:.4f}</text>')
    parts.append(f'<polyline fill="none" stroke="blue" stroke-width="2" points="{poly}"/>')
    for y in (0.0, 0.5, 1.0):
        parts.append(f'<text x="{pad - 6}" y="{sy(y) + 4:.2f}" text-anchor="end">{y:g}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
