"""Invariant checks run by the ``validate`` subcommand.

Each check is a function of a seed that raises ``AssertionError`` with
context on failure and otherwise returns a one-line summary.  Checks are
sized to finish in seconds.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import stats

from . import env as E
from . import limitlaw as LL
from . import montecarlo as MC
from . import regimes as R
from . import spectral as SP
from . import survival as S
from .errors import ConvergenceError, DivergenceError


@dataclass(frozen=True)
class Check:
    module: str
    name: str
    func: Callable[[int], str]

    @property
    def qualname(self) -> str:
        return f"{self.module}.{self.name}"


@dataclass(frozen=True)
class CheckResult:
    check: Check
    passed: bool
    seconds: float
    detail: str


REGISTRY: list = []


def check(module: str):
    def deco(func):
        REGISTRY.append(Check(module, func.__name__.removeprefix("check_"), func))
        return func
    return deco


def log_grid(lo: int, hi: int, n: int) -> np.ndarray:
    return np.unique(np.round(np.logspace(math.log10(lo), math.log10(hi), n)).astype(int))


def pooled_chisquare(observed: np.ndarray, expected: np.ndarray, min_expected: float = 5.0) -> tuple:
    """Goodness-of-fit p-value after pooling the tail bins until each expects ``min_expected``."""
    obs, exp = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            obs.append(acc_o)
            exp.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0:
        obs[-1] += acc_o
        exp[-1] += acc_e
    obs, exp = np.array(obs), np.array(exp)
    exp *= obs.sum() / exp.sum()
    return stats.chisquare(obs, exp)


# -- env -------------------------------------------------------------------------


@check("env")
def check_determinism(seed: int) -> str:
    a = E.sample_environment(2, 20, 0.3, seed)
    b = E.sample_environment(2, 20, 0.3, seed)
    assert a.to_text() == b.to_text(), "same seed produced different environments"
    return "identical serialisations"


@check("env")
def check_sub_box(seed: int) -> str:
    for d, small, big in ((1, 50, 400), (2, 8, 20), (3, 3, 6)):
        a = E.sample_environment(d, small, 0.4, seed)
        b = E.sample_environment(d, big, 0.4, seed).sub_box(small)
        assert np.array_equal(a.occupancy, b.occupancy), f"d={d}: sub-box occupancy differs"
    return "d=1,2,3 agree site by site"


@check("env")
def check_gap_law(seed: int) -> str:
    p = 0.5
    envr = E.sample_environment(1, 110_000, p, seed)
    lengths = E.gap_structure(envr).interior_lengths()
    assert lengths.size >= 100_000, f"only {lengths.size} gaps"
    k = np.arange(lengths.max() + 1)
    observed = np.bincount(lengths, minlength=k.size)
    expected = lengths.size * p * (1 - p) ** k
    res = pooled_chisquare(observed, expected)
    assert res.pvalue >= 0.01, f"geometric fit rejected, p-value {res.pvalue:.4g}"
    return f"{lengths.size} gaps, p-value {res.pvalue:.3f}"


@check("env")
def check_stratified_vs_direct(seed: int) -> str:
    p, n = 0.3, 50_000
    rng = np.random.default_rng(seed)
    direct = np.bincount(E.sample_gap_lengths(n, p, rng))
    hist = E.stratified_gap_histogram(n, p, 0, rng, method="exact")
    strat = np.zeros(max(direct.size, max(hist.counts) + 1), dtype=np.int64)
    for l, c in hist.counts.items():
        strat[l] = c
    direct = np.pad(direct, (0, strat.size - direct.size))
    keep = (direct + strat) >= 10
    table = np.vstack([np.append(direct[keep], direct[~keep].sum()), np.append(strat[keep], strat[~keep].sum())])
    table = table[:, table.sum(axis=0) > 0]
    pv = stats.chi2_contingency(table).pvalue
    assert pv >= 0.01, f"two-sample chi-square rejected, p-value {pv:.4g}"
    return f"p-value {pv:.3f}"


# -- spectral -----------------------------------------------------------------------


@check("spectral")
def check_closed_form_vs_dense(seed: int) -> str:
    worst = 0.0
    for l in range(1, 65):
        vals, _, _ = SP.dense_spectrum(np.arange(l), 1)
        worst = max(worst, float(np.max(np.abs(SP.interval_eigenvalues(l) - vals))))
    assert worst <= 1e-10, f"max deviation {worst:.3g}"
    return f"max deviation {worst:.2e}"


@check("spectral")
def check_monotonicity(seed: int) -> str:
    lam = np.array([SP.interval_eigenvalues(l)[0] for l in range(1, 200)])
    assert np.all(np.diff(lam) < 0), "lambda0 not strictly decreasing in l"
    rng = np.random.default_rng(seed)
    for _ in range(20):
        box = np.argwhere(np.ones((9, 9), dtype=bool))
        keep_b = rng.random(len(box)) < 0.8
        keep_a = keep_b & (rng.random(len(box)) < 0.8)
        if not keep_a.any():
            continue
        la = SP.principal_eigenvalue(box[keep_a], 2)
        lb = SP.principal_eigenvalue(box[keep_b], 2)
        assert la >= lb - 1e-12, f"domain monotonicity violated: {la} < {lb}"
    return "interval and nested-set monotonicity hold"


def _envelope_violations(env_fn, value_fn, ls) -> list:
    return [int(l) for l in ls if not env_fn(int(l)).contains(value_fn(int(l)))]


@check("spectral")
def check_lambda0_envelope(seed: int) -> str:
    ls = log_grid(10, 10_000, 40)
    ld = np.longdouble
    bad = _envelope_violations(lambda l: SP.lambda0_envelope(l, ld),
                               lambda l: SP.interval_eigenvalues(l, ld)[0], ls)
    assert not bad, f"violations at l={bad[:5]}"
    return f"{ls.size} lengths inside"


@check("spectral")
def check_gap_envelope(seed: int) -> str:
    ls = log_grid(10, 10_000, 40)

    ld = np.longdouble

    def gap(l):
        v = SP.interval_eigenvalues(l, ld)
        return v[1] - v[0]

    bad = _envelope_violations(lambda l: SP.gap_envelope(l, ld), gap, ls)
    assert not bad, f"violations at l={bad[:5]}"
    return f"{ls.size} lengths inside"


@check("spectral")
def check_psi0_envelope(seed: int) -> str:
    ls = log_grid(10, 10_000, 40)
    bad = _envelope_violations(SP.psi0_mass_envelope, lambda l: SP.interval_masses(l)[0], ls)
    assert not bad, (
        f"{len(bad)}/{ls.size} violations (first l={bad[0]}); the stated leading term is "
        f"sqrt(2) too large, see psi0_mass_envelope(corrected=True)"
    )
    return f"{ls.size} lengths inside"


@check("spectral")
def check_psi0_envelope_corrected(seed: int) -> str:
    ls = log_grid(10, 10_000, 40)
    bad = _envelope_violations(lambda l: SP.psi0_mass_envelope(l, corrected=True),
                               lambda l: SP.interval_masses(l)[0], ls)
    assert not bad, f"violations at l={bad[:5]}"
    return f"{ls.size} lengths inside"


# -- survival ---------------------------------------------------------------------------


@check("survival")
def check_time_monotone_and_bounded(seed: int) -> str:
    envr = E.sample_environment(1, 200, 0.3, seed)
    gaps = E.gap_structure(envr)
    ts = [0.0, 0.5, 1, 2, 5, 10, 20, 50]
    for x in range(-20, 21):
        vals = [S.quenched_survival_1d(gaps, x, t) for t in ts]
        for v in vals:
            assert 0.0 <= v.lower <= v.upper <= 1.0, f"x={x}: value outside [0, 1]"
        mids = [v.value for v in vals]
        assert all(b <= a + 1e-15 for a, b in zip(mids, mids[1:])), f"x={x}: not nonincreasing in t"
    return "41 sites, 8 times"


@check("survival")
def check_truncated_monotone(seed: int) -> str:
    envr = E.sample_environment(2, 6, 0.2, seed)
    free = np.argwhere(~envr.occupancy) - envr.radius
    x = free[np.argmin(np.abs(free).sum(axis=1))]
    t = 3.0
    full = S.truncated_survival(envr, x, t, S.ball_sites([0, 0], envr.radius)).value
    prev = 0.0
    for r in range(int(np.abs(x).max()), envr.radius + 1):
        v = S.truncated_survival(envr, x, t, S.ball_sites([0, 0], r)).value
        assert v >= prev - 1e-12, f"not nondecreasing in U at r={r}"
        assert v <= full + 1e-12, "truncated survival exceeds the largest-box value"
        prev = v
    return f"start {tuple(int(c) for c in x)}, radii up to {envr.radius}"


@check("survival")
def check_truncation_gap(seed: int) -> str:
    # exact 1-D survival minus survival confined to the ball of radius a t
    envr = E.sample_environment(1, 400, 0.05, seed)
    gaps = E.gap_structure(envr)
    n = 0
    for a in (0.5, 1.0, 2.0):
        for t in (5.0, 10.0, 20.0):
            r = int(math.floor(a * t))
            bound = S.truncation_gap_bound(a, 1, t).bound
            for x in (-3, 0, 4):
                full = S.truncated_survival(envr, [x], t, S.ball_sites([x], 150)).value
                ref = S.quenched_survival_1d(gaps, x, t)
                if ref.mode == "exact":
                    assert abs(full - ref.value) < 1e-9, "dense and closed-form survival disagree"
                trunc = S.truncated_survival(envr, [x], t, S.ball_sites([x], r)).value
                diff = full - trunc
                assert -1e-12 <= diff <= bound + 1e-12, f"a={a}, t={t}, x={x}: gap {diff:.3g} vs bound {bound:.3g}"
                n += 1
    return f"{n} instances"


@check("survival")
def check_interval_sandwich(seed: int) -> str:
    n = 0
    for l in (1, 2, 3, 5, 10, 30, 100, 300):
        for t in (0.0, 1.0, 10.0, 100.0, 1000.0):
            lo, hi = S.interval_sum_bounds(l, t)
            v = S.interval_sum_survival(l, t)
            assert lo <= v * (1 + 1e-12) and v <= hi * (1 + 1e-12), f"l={l}, t={t}: {v} not in [{lo}, {hi}]"
            n += 1
    return f"{n} (l, t) pairs"


@check("survival")
def check_series_error(seed: int) -> str:
    for t in (0.0, 5.0, 50.0):
        a = S.annealed_exact_1d(0.5, t, tail_tol=1e-12)
        b = S.annealed_exact_1d(0.5, t, tail_tol=1e-13)
        assert abs(a.value - b.value) <= a.error, f"t={t}: reported error {a.error} too small"
    return "errors bound a 10x tighter rerun"


@check("survival")
def check_averaged_is_mean(seed: int) -> str:
    envr = E.sample_environment(1, 300, 0.2, seed)
    gaps = E.gap_structure(envr)
    for L in (0, 5, 40):
        for t in (1.0, 10.0):
            avg = S.averaged_survival(envr, t, L)
            sites = math.fsum(S.quenched_survival_1d(gaps, x, t).value for x in range(-L, L + 1)) / (2 * L + 1)
            assert abs(avg.value - sites) <= 1e-12, f"L={L}, t={t}: {avg.value} vs {sites}"
    return "L in {0, 5, 40}"


# -- montecarlo ---------------------------------------------------------------------------


@check("montecarlo")
def check_reproducible(seed: int) -> str:
    a = MC.annealed_mc(2, 0.3, 5.0, 5000, seed)
    b = MC.annealed_mc(2, 0.3, 5.0, 5000, seed)
    assert a == b, "repeat run differs"
    whole = MC.walk_statistics(2, 5.0, 300, seed)
    parts = [MC.simulate_walk(2, 5.0, (), seed, i).sausage_size for i in (0, 17, 299)]
    assert parts == [int(whole[0][i]) for i in (0, 17, 299)], "per-sample stream depends on batching"
    return "identical estimates and per-index samples"


@check("montecarlo")
def check_probability_range(seed: int) -> str:
    envr = E.sample_environment(1, 100, 0.2, seed)
    ests = [MC.annealed_mc(1, 0.2, 5.0, 2000, seed), MC.exit_time_tail_mc(1.0, 2, 5.0, 2000, seed),
            MC.killed_walk_mc(envr, [0] if not envr.is_obstacle([0]) else [1], 5.0, 2000, seed)]
    for e in ests:
        assert 0.0 <= e.mean <= 1.0, f"estimate {e.mean} outside [0, 1]"
    return "annealed, exit-time and killed-walk means in [0, 1]"


@check("montecarlo")
def check_fubini(seed: int) -> str:
    p, t, n_env, n_walk = 0.3, 5.0, 200, 2000
    means = []
    for k in range(n_env):
        envr = E.sample_environment(1, 60, p, seed * 1000 + k)
        means.append(MC.killed_walk_mc(envr, [0], t, n_walk, seed + k).mean)
    outer = MC.estimate(np.array(means), seed)
    ann = MC.annealed_mc(1, p, t, 100_000, seed)
    se = math.hypot(outer.std_error, ann.std_error)
    z = abs(outer.mean - ann.mean) / se
    assert z <= 3.0, f"environment average {outer.mean:.5f} vs annealed {ann.mean:.5f}: {z:.2f} sigma"
    return f"{z:.2f} combined sigma"


# -- regimes ---------------------------------------------------------------------------------


@check("regimes")
def check_conjugacy(seed: int) -> str:
    for d in range(1, 11):
        k = R.constants(d, 0.5)
        v = 1.0 / k.alpha_prime - 1.0 / k.alpha
        assert abs(v - 1.0) <= 1e-14, f"d={d}: {v}"
    return "d = 1..10"


@check("regimes")
def check_half_gamma_minimum(seed: int) -> str:
    worst = 0.0
    for d in range(1, 11):
        v, g, step = R.half_gamma_minimum(d)
        dev = abs(v - 2.0 ** (-2.0 / (d + 2)))
        worst = max(worst, dev)
        assert dev <= 1e-6, f"d={d}: minimum off by {dev:.3g}"
        assert abs(g - R.gamma2(d)) <= step, f"d={d}: argmin {g} vs gamma2 {R.gamma2(d)}"
    return f"max deviation {worst:.2e}"


@check("regimes")
def check_a_at_gamma1(seed: int) -> str:
    for d in range(1, 11):
        v = R.a_of_gamma(d, R.gamma1(d))
        assert abs(v - 1.0) <= 1e-12, f"d={d}: a(gamma1) = {v!r}"
    return "d = 1..10"


@check("regimes")
def check_a1_at_gamma2(seed: int) -> str:
    v = LL.a1_of_gamma(R.gamma2(1))
    assert abs(v - 2.0) <= 1e-12, f"a1(gamma2) = {v!r}"
    return f"a1(gamma2) - 2 = {v - 2:.1e}"


@check("regimes")
def check_classify_consistent(seed: int) -> str:
    for d in (1, 2, 3, 5):
        g1, g2 = R.gamma1(d), R.gamma2(d)
        for g in np.linspace(0.01, 2 * g2, 400):
            c = R.classify(d, float(g))
            assert c.cases, f"d={d}, gamma={g}: no case"
            if R.RegimeCase.CASE6 in c:
                assert R.RegimeCase.CASE5 in c, f"d={d}, gamma={g}: Case6 without Case5"
            if 0 < g < g2 and g != g1:
                n34 = (R.RegimeCase.CASE3 in c) + (R.RegimeCase.CASE4 in c)
                assert n34 == 1, f"d={d}, gamma={g}: Case3/Case4 not a partition"
    return "d in {1, 2, 3, 5}, 400 gammas each"


# -- limitlaw ------------------------------------------------------------------------------------


@check("limitlaw")
def check_divergence_boundary(seed: int) -> str:
    g2 = R.gamma2(1)
    LL.levy_atoms(0.99 * g2, 0.5)
    try:
        LL.levy_atoms(math.nextafter(g2, 0.0), 0.5)
    except ConvergenceError:
        pass  # finite measure, too many atoms for the tolerance
    for g in (g2, math.nextafter(g2, 1.0), 0.9):
        try:
            LL.levy_atoms(g, 0.5)
        except DivergenceError:
            continue
        raise AssertionError(f"levy_atoms accepted gamma={g} with a1={LL.a1_of_gamma(g)}")
    return "raises exactly from gamma2"


@check("limitlaw")
def check_levy_tail_valid(seed: int) -> str:
    gamma, p = 0.5, 0.5
    xs = np.logspace(-6, 6, 2001)
    tails = np.array([LL.levy_tail(float(x), gamma, p) for x in xs])
    assert np.all(np.diff(tails) <= 0), "-L is not nonincreasing"
    assert LL.levy_tail(1e300, gamma, p) < 1e-100, "-L does not vanish at infinity"
    atoms = LL.levy_atoms(gamma, p)
    z2m = atoms.x2_weights
    ratios = z2m[:-1] / z2m[1:]
    assert np.allclose(ratios, atoms.x2_ratio(), rtol=1e-9) and atoms.x2_ratio() < 1, "x^2 dL not summable at 0"
    return f"x^2 partial-sum ratio {atoms.x2_ratio():.6f}"


@check("limitlaw")
def check_char_fn_properties(seed: int) -> str:
    for gamma, centered in ((0.5, False), (0.7, True)):
        tri = LL.limit_triple(gamma, 0.5, centered=centered)
        u = np.linspace(-5, 5, 201)
        phi = LL.char_fn(u, tri)
        assert np.all(np.abs(phi) <= 1 + 1e-12), "|phi| > 1"
        assert LL.char_fn(0.0, tri) == 1.0, "phi(0) != 1"
        assert np.allclose(phi[::-1], np.conj(phi), atol=1e-12), "phi not Hermitian"
    return "uncentred and centred triples"


@check("limitlaw")
def check_normalizer_exponent(seed: int) -> str:
    gamma, p = 0.5, 0.5
    P = LL.scaling_params(gamma, p)
    a = R.a_of_gamma(1, gamma)
    worst = 0.0
    for b in (50, 60, 80):
        t = LL.time_for_bracket(P, b, 1e-6)
        lhs = (a - gamma) * P.c2 * t ** (1 / 3)
        rhs = 4 * t * LL.ELL1 / P.bracket(t) ** 2
        worst = max(worst, abs(lhs / rhs - 1))
    assert worst <= 0.02, f"relative mismatch {worst:.3g}"
    return f"max relative mismatch {worst:.2e} at plateau starts"


@check("limitlaw")
def check_uniform_negligibility(seed: int) -> str:
    P = LL.scaling_params(0.5, 0.5)
    probs = [LL.single_gap_tail(P, LL.time_for_bracket(P, b), 0.1) for b in (10, 15, 20)]
    assert probs[0] > probs[1] > probs[2], f"P(Y > 0.1) not decreasing: {probs}"
    return "P(Y > 0.1) = " + ", ".join(f"{v:.3g}" for v in probs)


# -- runner -------------------------------------------------------------------------------------


def select(filter_text: Optional[str] = None) -> list:
    """Registered checks whose qualified name contains any comma-separated token."""
    if not filter_text:
        return list(REGISTRY)
    tokens = [t.strip() for t in filter_text.split(",") if t.strip()]
    return [c for c in REGISTRY if any(t in c.qualname for t in tokens)]


def run_checks(checks, seed: int = 0) -> list:
    results = []
    for c in checks:
        start = time.perf_counter()
        try:
            detail = c.func(seed)
            ok = True
        except AssertionError as exc:
            detail = str(exc) or "assertion failed"
            ok = False
        except Exception as exc:  # report, do not abort the suite
            detail = f"{type(exc).__name__}: {exc}"
            ok = False
        results.append(CheckResult(c, ok, time.perf_counter() - start, detail))
    return results
