import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hardtraps import env as E
from hardtraps import limitlaw as LL
from hardtraps import regimes as R
from hardtraps import survival as SV
from hardtraps.errors import DivergenceError, DomainError, ParameterError, TimeTooSmallError

P = LL.scaling_params(0.5, 0.5, 1.0)


# -- scaling --------------------------------------------------------------------------


def test_a1_values():
    assert LL.a1_of_gamma(R.gamma2(1)) == pytest.approx(2.0, abs=1e-12)
    assert LL.a1_of_gamma(0.7) == pytest.approx(1.157625, abs=1e-12)
    assert LL.a1_of_gamma(R.gamma1(1)) == pytest.approx(1.0, abs=1e-15)


def test_s1():
    k = R.constants(1, 0.5)
    assert P.s1 == pytest.approx(0.5 * k.c2 / (k.ell_d * k.nu), rel=1e-12)
    assert P.s1 == pytest.approx(1.4735, abs=5e-5)


def test_bracket_minus():
    assert LL.bracket_minus(3.0) == 2
    assert LL.bracket_minus(3.5) == 3
    assert LL.bracket_minus(0.2) == 0


@pytest.mark.parametrize("b", [1, 5, 10, 20])
def test_time_for_bracket_is_plateau_end(b):
    t = LL.time_for_bracket(P, b)
    assert P.bracket(t) == b
    assert P.bracket(t * (1 + 1e-12)) == b + 1
    assert P.bracket(LL.time_for_bracket(P, b, 0.3)) == b


@given(st.floats(0.2, 1e6), st.floats(0.2, 1e6))
def test_scales_monotone(t1, t2):
    lo, hi = sorted((t1, t2))
    assert P.bracket(lo) <= P.bracket(hi)
    if P.bracket(lo) >= 1:
        assert P.normalizer(lo) > 0


def test_time_too_small():
    with pytest.raises(TimeTooSmallError):
        P.normalizer(0.1)
    with pytest.raises(TimeTooSmallError):
        LL.normalized_sum_samples(0.5, 0.5, 1.0, 0.1, 10, np.random.default_rng(0))


def test_scaling_param_errors():
    for args in ((0.0, 0.5, 1.0), (0.5, 1.0, 1.0), (0.5, 0.5, 0.0)):
        with pytest.raises(ParameterError):
            LL.scaling_params(*args)


# -- gap terms ---------------------------------------------------------------------------


def test_xk_term_length_zero():
    t = 0.3
    term = LL.xk_term(0, t)
    assert term.leading == pytest.approx(2 / LL.ELL1 * math.exp(-4 * t * LL.ELL1))
    assert term.envelope > 1


def test_xk_term_example_printed_prefactor():
    term = LL.xk_term(999, 1e6)
    assert term.envelope == pytest.approx(0.2, abs=1e-3)
    assert term.contains(SV.interval_sum_survival(999, 1e6))


def test_xk_term_example_corrected_prefactor():
    term = LL.xk_term(999, 1e6, corrected=True)
    assert term.contains(SV.interval_sum_survival(999, 1e6))


@given(st.floats(1.0, 1e6), st.integers(0, 5000), st.integers(1, 5000))
def test_xk_leading_increasing_past_stationary_point(t, l1, dl):
    l2 = l1 + dl
    if l1 + 1 < math.sqrt(8 * t * LL.ELL1):
        return
    assert LL.xk_term(l2, t).leading > LL.xk_term(l1, t).leading


# -- Levy measure --------------------------------------------------------------------------


def test_levy_tail_examples():
    assert LL.levy_tail(1.0, 0.5, 0.5) == pytest.approx(2.0)
    z1 = math.exp(P.nu / P.a1)
    below = LL.levy_tail(z1 * (1 - 1e-6), 0.5, 0.5)
    at = LL.levy_tail(z1, 0.5, 0.5)
    assert at == pytest.approx(below * 0.5, rel=1e-12)
    for j in range(1, 6):
        assert LL.levy_tail(math.exp(P.nu * j / P.a1), 0.5, 0.5) == pytest.approx(2 * 0.5**j, rel=1e-12)
    assert LL.levy_tail(0.0, 0.5, 0.5) == 0.0 and LL.levy_tail(-3.0, 0.5, 0.5) == 0.0


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_levy_tail_nonincreasing(x1, x2):
    lo, hi = sorted((x1, x2))
    assert LL.levy_tail(lo, 0.6, 0.4) >= LL.levy_tail(hi, 0.6, 0.4)


def test_jump_telescoping():
    atoms = LL.levy_atoms(0.5, 0.5)
    rng = np.random.default_rng(0)
    for x in np.exp(rng.uniform(-3.0, 8.0, 100)):
        tail = math.fsum(atoms.masses[atoms.positions > x])
        assert tail == pytest.approx(LL.levy_tail(x, 0.5, 0.5), rel=1e-9)


def test_x2_ratio_at_gamma_07():
    atoms = LL.levy_atoms(0.7, 0.5)
    assert atoms.x2_ratio() == pytest.approx(2 ** -(2 / 1.157625 - 1), rel=1e-12)
    assert atoms.x2_ratio() == pytest.approx(0.6038, abs=1e-4)


def test_divergence_at_gamma2():
    with pytest.raises(DivergenceError):
        LL.levy_atoms(R.gamma2(1), 0.5)


def test_truncation_error_reported():
    atoms = LL.levy_atoms(0.5, 0.5, tol=1e-12)
    assert 0 < atoms.truncation_error <= 1e-12


# -- drift ----------------------------------------------------------------------------


def test_beta_denominator_even():
    q, a1 = 0.5, P.a1
    for k in range(1, 20):
        assert q ** (k / a1) + q ** (-k / a1) == q ** (-k / a1) + q ** (k / a1)


def test_beta1_divergent_at_gamma_07():
    with pytest.raises(DivergenceError):
        LL.beta(0.7, 0.5, which="beta1")


def test_beta1_matches_atoms_and_doubling():
    b = LL.beta(0.5, 0.5, which="beta1")

    def window(n):
        j = np.arange(-n, n + 1)
        z, m = LL.atom_position(P, j), LL.atom_mass(P, j)
        return math.fsum(z / (1 + z * z) * m)

    assert abs(window(200) - window(100)) <= 1e-8
    assert b.value == pytest.approx(window(200), abs=1e-8)
    assert b.series_alt_value == pytest.approx(b.value, rel=1e-10)


def test_beta2_tail_below_beta1_termwise():
    a1, q = LL.a1_of_gamma(0.75), 0.5
    for k in range(1, 60):
        assert q ** (k * (1 + 2 / a1)) <= q**k
    b = LL.beta(0.75, 0.5, which="beta2")
    assert math.isfinite(b.value)


def test_beta_regime_errors():
    with pytest.raises(DivergenceError):
        LL.beta(0.5, 0.5, which="beta2")
    with pytest.raises(ParameterError):
        LL.beta(0.5, 0.5, which="beta3")


# -- characteristic functions ----------------------------------------------------------


def single_atom_triple():
    atoms = LL.LevyAtoms(P, np.array([0]), np.array([1.0]), np.array([1.0]), 5.0, 0.0)
    return LL.LevyTriple(0.0, 0.0, atoms)


def test_single_atom_char_fn():
    phi = LL.char_fn(math.pi, single_atom_triple())
    assert phi == pytest.approx(complex(math.exp(-2.0) * math.cos(-math.pi / 2), math.exp(-2.0) * math.sin(-math.pi / 2)), abs=1e-14)
    assert abs(phi) == pytest.approx(math.exp(-2.0), rel=1e-14)


@given(st.floats(-20, 20), st.sampled_from([(0.4, 0.5, False), (0.55, 0.3, False), (0.75, 0.5, True)]))
def test_char_fn_properties(u, case):
    gamma, p, centered = case
    triple = LL.limit_triple(gamma, p, centered=centered, u_max=20.0)
    phi, phi_neg = LL.char_fn(u, triple), LL.char_fn(-u, triple)
    assert abs(phi) <= 1 + 1e-12
    assert phi_neg == pytest.approx(phi.conjugate(), abs=1e-12)
    assert LL.char_fn(0.0, triple) == 1.0


def test_empirical_cf_constant_and_bounded():
    u = np.linspace(-5, 5, 11)
    assert np.allclose(LL.empirical_cf(np.full(7, 1.3), u), np.exp(1j * u * 1.3), atol=1e-15)
    ecf = LL.empirical_cf(np.random.default_rng(0).normal(size=500), u)
    assert np.all(np.abs(ecf) <= 1 + 1e-15)
    with pytest.raises(ParameterError):
        LL.empirical_cf([], u)


def test_empirical_cf_compound_poisson():
    n = 10**5
    x = np.random.default_rng(1).poisson(1.0, n) - 0.5
    u = np.linspace(-5, 5, 501)
    diff = np.max(np.abs(LL.empirical_cf(x, u) - LL.char_fn(u, single_atom_triple())))
    assert diff <= 3 * 5 / math.sqrt(n)


# -- truncated moments ------------------------------------------------------------------


def test_truncated_moment_limit_example():
    a1 = 0.421875
    closed = 2 / (1 - 2 ** -(1 / a1 - 1))
    value = LL.truncated_moment_limit(1, 1.0, 0.5, 0.5)
    assert value == pytest.approx(closed, rel=1e-12)
    assert value == pytest.approx(3.2613, abs=5e-4)


def test_truncated_moment_limit_step_invariance():
    z1 = math.exp(P.nu / P.a1)
    a = LL.truncated_moment_limit(2, 1.01, 0.5, 0.5)
    b = LL.truncated_moment_limit(2, 0.99 * z1, 0.5, 0.5)
    assert a == b


def test_truncated_moment_limit_monotone_in_k():
    values = [LL.truncated_moment_limit(k, 0.5, 0.5, 0.5) for k in (1, 2, 3, 4)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_truncated_moment_limit_is_atom_sum():
    j = np.arange(-300, 60)
    z, m = LL.atom_position(P, j), LL.atom_mass(P, j)
    for k, tau in ((1, 1.0), (2, 3.0), (3, 0.2)):
        sel = z <= tau
        brute = math.fsum(z[sel] ** k * m[sel])
        assert LL.truncated_moment_limit(k, tau, 0.5, 0.5) == pytest.approx(brute, rel=1e-9)


def test_truncated_moment_finite_t_brute():
    t = LL.time_for_bracket(P, 6)
    n = P.n(t)
    y = LL.gap_values(P, t, 300)
    w = 0.5 * 0.5 ** np.arange(301)
    assert LL.truncated_moment_finite_t(1, math.inf, 0.5, 0.5, 1.0, t) == pytest.approx(n * math.fsum(w * y), rel=1e-10)
    tau = 0.5 * (y[2] + y[3]) if y[3] > y[2] else y[3] * 1.0001
    excluded = y <= tau
    brute = n * math.fsum(w[:101] * (y[:101] ** 2) * excluded[:101])
    assert LL.truncated_moment_finite_t(2, tau, 0.5, 0.5, 1.0, t) == pytest.approx(brute, rel=1e-10)


# -- sampling ---------------------------------------------------------------------------


def test_single_gap_draw_is_a_gap_value():
    t = LL.time_for_bracket(P, 5)
    draw = LL.normalized_sum_sample(0.5, 0.5, 1.0, t, np.random.default_rng(2), n_gaps=1)
    y = LL.gap_values(P, t, 200)
    assert np.min(np.abs(y - draw)) <= 1e-12 * max(1.0, draw)


def test_uncentred_mean():
    t = 1e3
    sums = LL.normalized_sum_samples(0.5, 0.5, 1.0, t, 10**4, np.random.default_rng(3))
    exact = sums.n_gaps * LL.expected_gap_value(P, t)
    se = sums.values.std(ddof=1) / math.sqrt(sums.values.size)
    assert abs(sums.values.mean() - exact) <= 3 * se


def test_centred_sums_have_zero_mean():
    params = LL.scaling_params(0.75, 0.5)
    t = LL.time_for_bracket(params, 8)
    sums = LL.normalized_sum_samples(0.75, 0.5, 1.0, t, 4000, np.random.default_rng(4), centered=True)
    se = sums.values.std(ddof=1) / math.sqrt(sums.values.size)
    assert abs(sums.values.mean()) <= 4 * se


def test_cf_experiment_rejects_gamma():
    with pytest.raises(ParameterError, match=r"a1 = \(3 gamma / 2\)\^3 < 2"):
        LL.cf_experiment(0.9, 0.5, 1.0, [100.0], 10, 0)


# -- sandwich -----------------------------------------------------------------------------


def test_gap_count_rules():
    assert LL.gap_count(100.0, 0.5, 0.2, "density") == (40, 60)
    assert LL.gap_count(100.0, 0.5, 0.2, "odds") == (80, 120)
    with pytest.raises(ParameterError):
        LL.gap_count(100.0, 0.5, 0.2, "other")


def test_sandwich_wide_epsilon_lower_flank():
    params = LL.scaling_params(0.4, 0.5)
    t = LL.time_for_bracket(params, 4)
    rep = LL.sandwich_check(E.sample_environment(1, 200, 0.5, 1), t, 0.4, 0.999)
    assert rep.m == 0 and rep.lower <= rep.middle


def test_sandwich_needs_obstacles():
    params = LL.scaling_params(0.4, 0.5)
    t = LL.time_for_bracket(params, 4)
    env = E.Environment(1, 200, 0.5, 0, np.zeros(401, dtype=bool))
    with pytest.raises(DomainError):
        LL.sandwich_check(env, t, 0.4, 0.2)


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_scale_constant_c(c):
    params = LL.scaling_params(0.5, 0.5, c)
    limit = LL.truncated_moment_limit(1, 1.0, 0.5, 0.5, c)
    gaps = []
    for b in (10, 15, 20):
        t = LL.time_for_bracket(params, b)
        tail = params.n(t) * LL.single_gap_tail(params, t, 1.0)
        assert tail == pytest.approx(LL.levy_tail(1.0, 0.5, 0.5, c), rel=0.30)
        gaps.append(abs(LL.truncated_moment_finite_t(1, 1.0, 0.5, 0.5, c, t) - limit) / limit)
    assert gaps[0] > gaps[1] > gaps[2]
