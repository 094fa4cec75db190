import math

import numpy as np
import pytest
import scipy.linalg
import scipy.optimize
from hypothesis import given
from hypothesis import strategies as st

from hardtraps import env as E
from hardtraps import montecarlo as MC
from hardtraps import survival as SV
from hardtraps.errors import DomainError, ParameterError, SizeError


def make_1d(bits, density=0.5):
    occ = np.array(bits, dtype=bool)
    return E.Environment(1, (occ.size - 1) // 2, density, 0, occ)


def expm_survival(l, t):
    H = np.eye(l) - 0.5 * (np.eye(l, k=1) + np.eye(l, k=-1))
    return scipy.linalg.expm(-t * H) @ np.ones(l)


# -- single sites ---------------------------------------------------------------------


@pytest.mark.parametrize("t", [0.0, 0.3, 2.0, 17.0])
def test_single_site_gap(t):
    gaps = E.gap_structure(make_1d([1, 0, 1]))
    assert SV.quenched_survival_1d(gaps, 0, t).value == pytest.approx(math.exp(-t), rel=1e-13)


def test_two_site_gap():
    gaps = E.gap_structure(make_1d([0, 1, 0, 0, 1]))
    for x in (0, 1):
        v = SV.quenched_survival_1d(gaps, x, 1.0)
        assert v.value == pytest.approx(math.exp(-0.5), rel=1e-13) and v.mode == "exact"


def test_time_zero_and_obstacle():
    gaps = E.gap_structure(make_1d([1, 0, 0, 0, 1]))
    assert SV.quenched_survival_1d(gaps, 0, 0.0).value == pytest.approx(1.0, abs=1e-14)
    assert SV.quenched_survival_1d(gaps, 2, 3.0).value == 0.0
    with pytest.raises(DomainError):
        SV.quenched_survival_1d(gaps, 3, 1.0)


def test_truncated_gap_is_bracketed():
    gaps = E.gap_structure(make_1d([0, 0, 0, 1, 0]))
    v = SV.quenched_survival_1d(gaps, -1, 2.0)
    assert v.mode == "bounded" and v.upper == pytest.approx(1.0)
    assert 0 <= v.lower <= v.upper <= 1


@given(st.integers(1, 30), st.floats(0, 60), st.data())
def test_site_survival_matches_matrix_exponential(l, t, data):
    x = data.draw(st.integers(0, l - 1))
    oracle = expm_survival(l, t)[x]
    assert SV.site_survival(l, [x], t)[0] == pytest.approx(oracle, abs=1e-12)


# -- interval sums --------------------------------------------------------------------


def test_interval_sum_examples():
    assert SV.interval_sum_survival(1, 4.0) == pytest.approx(math.exp(-4.0), rel=1e-14)
    assert SV.interval_sum_survival(2, 1.0) == pytest.approx(2 * math.exp(-0.5), rel=1e-14)
    for l in (1, 7, 100, 1001):
        assert SV.interval_sum_survival(l, 0.0) == pytest.approx(l, rel=1e-12)


@given(st.integers(1, 200), st.floats(0, 500), st.floats(0, 500))
def test_interval_sum_monotone_and_bracketed(l, t1, t2):
    lo_t, hi_t = sorted((t1, t2))
    a, b = SV.interval_sum_survival(l, lo_t), SV.interval_sum_survival(l, hi_t)
    assert 0.0 <= b <= a * (1 + 1e-12) + 1e-300
    assert a <= l * (1 + 1e-12)
    lo, hi = SV.interval_sum_bounds(l, hi_t)
    assert lo * (1 - 1e-10) <= b <= hi * (1 + 1e-10) + 1e-300


def test_interval_sum_bad_length():
    with pytest.raises(ParameterError):
        SV.interval_sum_survival(0, 1.0)


# -- truncated survival ------------------------------------------------------------------


def test_truncated_single_site():
    env = E.sample_environment(2, 2, 0.0, 0)
    assert SV.truncated_survival(env, (0, 0), 1.5, [(0, 0)]).value == pytest.approx(math.exp(-1.5))


def test_truncated_equals_quenched_when_u_covers_gap():
    env = E.sample_environment(1, 60, 0.4, 3)
    gaps = E.gap_structure(env)
    for iv in gaps.intervals:
        if iv.truncated or iv.length == 0:
            continue
        U = np.arange(iv.left - 3, iv.right + 4)
        U = U[np.abs(U) <= env.radius]
        for x in range(iv.left, iv.right + 1):
            exact = SV.quenched_survival_1d(gaps, x, 4.0).value
            assert SV.truncated_survival(env, x, 4.0, U).value == pytest.approx(exact, abs=1e-12)


def test_truncated_obstacle_and_errors():
    env = make_1d([1, 0, 0])
    assert SV.truncated_survival(env, -1, 1.0, [-1, 0]).value == 0.0
    with pytest.raises(DomainError):
        SV.truncated_survival(env, 0, 1.0, [1])
    with pytest.raises(SizeError):
        SV.truncated_survival(E.sample_environment(2, 40, 0.0, 0), (0, 0), 1.0,
                              np.argwhere(np.ones((81, 81), dtype=bool)) - 40)


@given(st.integers(0, 10**6), st.floats(0, 30))
def test_truncated_monotone_in_u(seed, t):
    env = E.sample_environment(2, 5, 0.3, seed)
    if env.is_obstacle((0, 0)):
        return
    values = [SV.truncated_survival(env, (0, 0), t, SV.ball_sites((0, 0), r)).value for r in range(0, 6)]
    assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))
    assert all(0.0 <= v <= 1.0 for v in values)


# -- averaged survival ---------------------------------------------------------------------


def test_averaged_obstacle_free_box():
    v = SV.averaged_survival(E.sample_environment(1, 10, 0.0, 0), 3.0, 5)
    assert v.upper == pytest.approx(1.0) and v.lower < 1.0


def test_averaged_alternating():
    R = 20
    env = make_1d([i % 2 == 0 for i in range(2 * R + 1)])
    for L in (0, 1, 7, 20):
        v = SV.averaged_survival(env, 2.5, L)
        free = int((~env.sub_box(L).occupancy).sum())
        assert v.mode == "exact"
        assert v.value == pytest.approx(free / (2 * L + 1) * math.exp(-2.5), rel=1e-13)


def test_averaged_matches_killed_walks():
    env = E.sample_environment(1, 1100, 0.5, 21)
    t, L = 10.0, 1000
    v = SV.averaged_survival(env, t, L)
    assert v.mode == "exact"
    means, variances = [], []
    for i, x in enumerate(range(-L, L + 1)):
        est = MC.killed_walk_mc(env, x, t, 50, seed=i)
        means.append(est.mean)
        variances.append(est.std_error**2)
    mean = math.fsum(means) / (2 * L + 1)
    se = math.sqrt(math.fsum(variances)) / (2 * L + 1)
    assert abs(mean - v.value) <= 3 * se


def test_averaged_2d_is_site_mean():
    env = E.sample_environment(2, 6, 0.4, 8)
    t, L = 2.0, 2
    values = [SV.truncated_survival(env, s, t, E.box_coordinates(2, 6)).value for s in E.box_coordinates(2, L)]
    v = SV.averaged_survival(env, t, L)
    assert v.lower <= math.fsum(values) / 25 + 1e-12


# -- annealed ------------------------------------------------------------------------------


def test_annealed_time_zero():
    for p in (0.1, 0.5, 0.9):
        assert SV.annealed_exact_1d(p, 0.0).value == pytest.approx(1 - p, abs=1e-14)


def test_annealed_bad_tolerance():
    with pytest.raises(ParameterError):
        SV.annealed_exact_1d(0.5, 1.0, tail_tol=0.0)


def test_annealed_matches_sausage_mc():
    exact = SV.annealed_exact_1d(0.5, 10.0).value
    assert MC.annealed_mc(1, 0.5, 10.0, 10**6, seed=99).z_score(exact) <= 3.0


def test_annealed_series_decreasing():
    values = [SV.annealed_exact_1d(0.3, t).value for t in (0, 1, 5, 20, 100)]
    assert all(a > b for a, b in zip(values, values[1:]))


# -- bounds --------------------------------------------------------------------------------


def test_rate_function():
    assert SV.J(0.0) == 0.0
    assert SV.J(1.0) == pytest.approx(math.log(1 + math.sqrt(2)) - math.sqrt(2) + 1, abs=1e-15)
    assert round(SV.J(1.0), 7) == 0.46716
    res = scipy.optimize.minimize_scalar(lambda th: -(th * 1.0 - (math.cosh(th) - 1.0)), bounds=(0, 5), method="bounded")
    assert -res.fun == pytest.approx(SV.J(1.0), abs=1e-8)


@given(st.floats(0.01, 5), st.integers(1, 4), st.floats(0.1, 100), st.floats(0.1, 100))
def test_truncation_bound_decreasing(a, d, t1, t2):
    lo, hi = sorted((t1, t2))
    b1, b2 = SV.truncation_gap_bound(a, d, lo), SV.truncation_gap_bound(a, d, hi)
    assert b1.bound >= b2.bound >= 0.0
    assert b1.k2 == pytest.approx(SV.J(a * d) / d)


def test_truncation_bound_against_walks():
    est = MC.exit_time_tail_mc(1.0, 1, 50.0, 10**6, seed=3)
    assert est.mean <= SV.truncation_gap_bound(1.0, 1, 50.0).bound


def test_survival_bounds_bracket_exact():
    rng = np.random.default_rng(17)
    for seed in range(100):
        env = E.sample_environment(1, 60, float(rng.choice([0.2, 0.4, 0.6])), seed)
        gaps = E.gap_structure(env)
        t = float(rng.uniform(0.5, 15.0))
        a = float(rng.choice([0.5, 1.0, 2.0]))
        r = int(math.floor(a * t))
        x = int(rng.integers(-60 + r, 61 - r)) if r < 60 else 0
        if abs(x) + r > 60:
            continue
        b = SV.survival_bounds(env, x, t, a)
        p = SV.quenched_survival_1d(gaps, x, t)
        assert p.lower <= b.upper
        lo, _ = SV.survival_sum_1d(gaps, t, x - r, x + r)
        assert lo / b.ball_size >= b.lower * (1 - 1e-9)


def test_survival_bounds_edge_cases():
    env = E.sample_environment(1, 10, 0.3, 0)
    assert SV.survival_bounds(env, 0, 0.0, 1.0).upper >= 1.0
    with pytest.raises(DomainError):
        SV.survival_bounds(env, 5, 10.0, 1.0)
