import math

import numpy as np
import pytest
import scipy.sparse.linalg
from hypothesis import given
from hypothesis import strategies as st

from hardtraps import spectral as S
from hardtraps.errors import ConvergenceError, DomainError, EmptySpectrumError


def dense_interval(l):
    return np.eye(l) - 0.5 * (np.eye(l, k=1) + np.eye(l, k=-1))


# -- interval spectra -----------------------------------------------------------------


def test_length_one():
    spec = S.interval_spectrum(1)
    assert spec.eigenvalues[0] == pytest.approx(1.0, abs=1e-15)
    assert spec.psi0_values.tolist() == pytest.approx([1.0])
    assert spec.psi0_mass == pytest.approx(1.0, abs=1e-15)


def test_length_two():
    spec = S.interval_spectrum(2)
    assert spec.eigenvalues.tolist() == pytest.approx([0.5, 1.5], abs=1e-15)
    assert spec.psi0_mass == pytest.approx(math.sqrt(2), abs=1e-15)


def test_length_nine():
    assert S.interval_spectrum(9).eigenvalues[0] == pytest.approx(1 - math.cos(math.pi / 10), abs=1e-15)
    assert S.interval_spectrum(9).eigenvalues[0] == pytest.approx(0.0489435, abs=5e-8)


def test_empty_interval():
    with pytest.raises(EmptySpectrumError):
        S.interval_spectrum(0)
    assert issubclass(EmptySpectrumError, DomainError)


@given(st.integers(1, 64))
def test_closed_form_is_the_dense_eigensystem(l):
    spec = S.interval_spectrum(l)
    H = dense_interval(l)
    vecs = spec.eigenvectors()
    assert np.allclose(H @ vecs, vecs * spec.eigenvalues, atol=1e-12)
    assert np.allclose(vecs.T @ vecs, np.eye(l), atol=1e-12)
    assert np.allclose(vecs.sum(axis=0), spec.psi_n_mass, atol=1e-11)
    assert math.fsum(spec.psi_n_mass**2) == pytest.approx(l, rel=1e-12)
    assert np.all(np.diff(spec.eigenvalues) > 0)
    assert np.all((spec.eigenvalues > 0) & (spec.eigenvalues < 2))


# -- envelopes ------------------------------------------------------------------------


def test_lambda0_envelope_examples():
    env9 = S.lambda0_envelope(9)
    assert env9.central_value == pytest.approx(math.pi**2 / 200, rel=1e-14)
    assert env9.relative_error_bound == pytest.approx(math.pi**2 / 1200, rel=1e-14)
    assert env9.contains(S.interval_eigenvalues(9)[0])
    env1 = S.lambda0_envelope(1)
    assert env1.central_value == pytest.approx(math.pi**2 / 8)
    assert env1.relative_error_bound == pytest.approx(math.pi**2 / 48)
    assert env1.contains(1.0)
    assert S.lambda0_envelope(10**6).relative_error_bound < 1e-11


def test_gap_envelope_examples():
    assert S.gap_envelope(2).contains(1.0)
    assert S.gap_envelope(2).central_value == pytest.approx(math.pi**2 / 6)
    lam = S.interval_eigenvalues(9)
    assert lam[1] - lam[0] == pytest.approx(0.1420, abs=5e-5)
    assert S.gap_envelope(9).contains(lam[1] - lam[0])
    lam = S.interval_eigenvalues(10**4, np.longdouble)
    assert S.gap_envelope(10**4, np.longdouble).relative_deviation(lam[1] - lam[0]) < 1e-7


def test_envelope_interval_invariant():
    for l in (1, 5, 50):
        for env in (S.lambda0_envelope(l), S.gap_envelope(l), S.psi0_mass_envelope(l)):
            lo, hi = env.absolute_interval
            assert lo <= env.central_value * (1 - env.relative_error_bound) + 1e-15
            assert hi >= env.central_value * (1 + env.relative_error_bound) - 1e-15


def test_psi0_mass_examples_printed_envelope():
    assert S.interval_spectrum(2).psi0_mass == pytest.approx(1.4142, abs=1e-4)
    assert S.psi0_mass_envelope(2).central_value == pytest.approx(2.2053, abs=1e-4)
    for l, tol in ((99, 0.10), (10**5, 1e-4)):
        env = S.psi0_mass_envelope(l)
        assert env.relative_deviation(S.interval_spectrum(l).psi0_mass) <= tol


def test_psi0_mass_examples_corrected_envelope():
    for l, tol in ((99, 0.10), (10**5, 1e-4)):
        env = S.psi0_mass_envelope(l, corrected=True)
        assert env.relative_deviation(S.interval_spectrum(l).psi0_mass) <= tol


# -- general site sets ----------------------------------------------------------------


def test_principal_eigenvalue_examples():
    assert S.principal_eigenvalue(np.arange(5), 1) == pytest.approx(0.1339746, abs=1e-7)
    for d in (1, 2, 3):
        assert S.principal_eigenvalue(np.zeros((1, d), dtype=int), d) == pytest.approx(1.0, abs=1e-14)
    square = np.argwhere(np.ones((3, 3), dtype=bool))
    assert S.principal_eigenvalue(square, 2) == pytest.approx(1 - math.sqrt(2) / 2, abs=1e-12)


def test_iterative_path_matches_closed_forms():
    assert S.principal_eigenvalue(np.arange(1000), 1) == pytest.approx(S.interval_eigenvalues(1000)[0], rel=1e-8)
    square = np.argwhere(np.ones((30, 30), dtype=bool))
    assert S.principal_eigenvalue(square, 2) == pytest.approx(1 - math.cos(math.pi / 31), rel=1e-8)


def test_principal_vector_is_positive():
    lam, vec, ordered = S.principal_eigenvalue(np.argwhere(np.ones((4, 5), dtype=bool)), 2, return_vector=True)
    assert np.all(vec > 0)
    H, _ = S.dirichlet_operator(ordered, 2)
    assert np.allclose(H @ vec, lam * vec, atol=1e-10)


def test_empty_site_set():
    with pytest.raises(EmptySpectrumError):
        S.principal_eigenvalue(np.empty((0, 2), dtype=int), 2)


def test_convergence_error_carries_residual(monkeypatch):
    def fail(*args, **kwargs):
        raise scipy.sparse.linalg.ArpackNoConvergence("no", np.array([]), np.empty((0, 0)))

    monkeypatch.setattr(S, "eigsh", fail)
    with pytest.raises(ConvergenceError) as info:
        S.principal_eigenvalue(np.arange(600), 1)
    assert info.value.residual == math.inf


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=2, max_size=36, unique=True), st.data())
def test_domain_monotonicity(sites, data):
    big = np.array(sites)
    keep = data.draw(st.lists(st.booleans(), min_size=len(sites), max_size=len(sites)))
    small = big[np.array(keep)]
    if small.shape[0] == 0:
        return
    assert S.principal_eigenvalue(big, 2) <= S.principal_eigenvalue(small, 2) + 1e-12
