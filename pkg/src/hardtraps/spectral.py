"""Dirichlet spectra of the normalised discrete Laplacian.

Throughout, ``lambda_n`` are the eigenvalues of the *positive* operator
``H = I - P`` where ``P f(x)`` averages ``f`` over the ``2d`` nearest
neighbours and ``f`` vanishes off the site set.  With this sign the
killed heat semigroup is literally ``exp(-t H)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .errors import ConvergenceError, EmptySpectrumError, ParameterError, SizeError

ELL1 = math.pi**2 / 8.0
DENSE_THRESHOLD = 512
DEFAULT_SITE_CAP = 100_000
ITERATIVE_TOL = 1e-9


@dataclass(frozen=True)
class IntervalSpectrum:
    """Closed-form Dirichlet eigen-data of an interval of ``length`` sites.

    Sites are indexed ``0, ..., length - 1``.
    """

    length: int
    eigenvalues: np.ndarray
    psi0_values: np.ndarray
    psi0_mass: float
    psi_n_mass: np.ndarray

    def eigenvectors(self) -> np.ndarray:
        """Matrix whose column ``n`` is the normalised eigenfunction ``psi_n``."""
        l = self.length
        x = np.arange(1, l + 1)
        k = np.arange(1, l + 1)
        return math.sqrt(2.0 / (l + 1)) * np.sin(np.outer(x, k) * math.pi / (l + 1))


def _pi(dtype):
    return 4 * np.arctan(dtype(1)) if dtype is not float else math.pi


def interval_eigenvalues(l: int, dtype=float) -> np.ndarray:
    """``1 - cos((n+1) pi / (l+1))``, evaluated as ``2 sin^2`` to avoid cancellation.

    ``dtype=np.longdouble`` gives extended precision where the platform has it.
    """
    h = _pi(dtype) / dtype(l + 1)
    n = np.arange(1, l + 1, dtype=dtype)
    return 2 * np.sin(n * h / 2) ** 2


def interval_masses(l: int) -> np.ndarray:
    """``(psi_n, 1_I)`` for every mode; the even-``n+1`` modes are antisymmetric and vanish."""
    k = np.arange(1, l + 1)
    theta = k * math.pi / (l + 1)
    mass = math.sqrt(2.0 / (l + 1)) / np.tan(theta / 2.0)
    return np.where(k % 2 == 1, mass, 0.0)


def interval_spectrum(l: int) -> IntervalSpectrum:
    """Eigenvalues ``1 - cos((n+1) pi / (l+1))`` and sine eigenfunctions of an interval."""
    if l < 1:
        raise EmptySpectrumError(f"interval length must be >= 1, got {l}")
    l = int(l)
    x = np.arange(l)
    h = math.pi / (l + 1)
    psi0 = math.sqrt(2.0 / (l + 1)) * np.sin(h * (x + 1))
    mass0 = math.sqrt(2.0 / (l + 1)) * math.sin(h) / (1.0 - math.cos(h))
    masses = interval_masses(l)
    masses[0] = mass0
    return IntervalSpectrum(l, interval_eigenvalues(l), psi0, mass0, masses)


# -- asymptotic envelopes --------------------------------------------------------


@dataclass(frozen=True)
class AsymptoticEnvelope:
    """``central * (1 + o)`` with ``|o| <= relative_error_bound``."""

    central_value: float
    relative_error_bound: float

    @property
    def absolute_interval(self) -> tuple:
        c, b = self.central_value, self.relative_error_bound
        return (c * (1.0 - b), c * (1.0 + b))

    def contains(self, value: float) -> bool:
        lo, hi = self.absolute_interval
        return lo <= value <= hi

    def relative_deviation(self, value: float) -> float:
        return abs(value / self.central_value - 1.0)


def lambda0_envelope(l: int, dtype=float) -> AsymptoticEnvelope:
    """``lambda_0 = 4 ell_1 / (l+1)^2 (1 + o)``, ``|o| <= pi^2 / (12 (1+l)^2)``.

    The bound is attained to second order, so for ``l`` beyond a few
    thousand containment is decided below double rounding; pass
    ``dtype=np.longdouble`` together with extended-precision eigenvalues.
    """
    pi = _pi(dtype)
    m = dtype(l + 1)
    return AsymptoticEnvelope(pi * pi / 2 / m**2, pi * pi / (12 * m**2))


def gap_envelope(l: int, dtype=float) -> AsymptoticEnvelope:
    """``lambda_1 - lambda_0 = 12 ell_1 / (l+1)^2 (1 + o)``, ``|o| <= 10 / (1+l)^2``."""
    pi = _pi(dtype)
    m = dtype(l + 1)
    return AsymptoticEnvelope(3 * pi * pi / 2 / m**2, 10 / m**2)


def psi0_mass_envelope(l: int, corrected: bool = False) -> AsymptoticEnvelope:
    """Envelope for ``(psi_0, 1_I)`` with relative bound ``10 / (1+l)``.

    The default central value is ``sqrt(2 (l+1) / ell_1)``.  The exact mass
    behaves like ``sqrt((l+1) / ell_1)``, a factor ``sqrt(2)`` smaller, so
    the default envelope excludes it for every ``l >= 10``; pass
    ``corrected=True`` for the envelope centred on the true leading term.
    """
    factor = 1.0 if corrected else 2.0
    return AsymptoticEnvelope(math.sqrt(factor * (l + 1) / ELL1), 10.0 / (1 + l))


# -- general finite site sets ------------------------------------------------------


def _as_sites(sites, dim: int) -> np.ndarray:
    arr = np.asarray(sites, dtype=np.int64)
    if arr.size == 0:
        raise EmptySpectrumError("site set is empty")
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim == 1 else arr.reshape(1, -1)
    if arr.shape[1] != dim:
        raise ParameterError(f"sites have {arr.shape[1]} coordinates, expected {dim}")
    return np.unique(arr, axis=0)


def dirichlet_operator(sites, dim: int) -> tuple:
    """Sparse ``H = I - P`` restricted to ``sites``.

    Returns
    -------
    H : scipy.sparse.csr_matrix
    ordered : ndarray, shape (n, dim)
        Row ``i`` of ``H`` corresponds to site ``ordered[i]`` (lexicographic).
    """
    ordered = _as_sites(sites, dim)
    n = ordered.shape[0]
    lo = ordered.min(axis=0) - 1
    span = ordered.max(axis=0) - lo + 2
    strides = np.cumprod(np.concatenate(([1], span[:0:-1])))[::-1]
    keys = (ordered - lo) @ strides
    rows, cols = [], []
    for axis in range(dim):
        for step in (-1, 1):
            nb = ordered.copy()
            nb[:, axis] += step
            nkeys = (nb - lo) @ strides
            pos = np.searchsorted(keys, nkeys)
            pos = np.minimum(pos, n - 1)
            hit = keys[pos] == nkeys
            rows.append(np.flatnonzero(hit))
            cols.append(pos[hit])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.full(rows.size, -1.0 / (2 * dim))
    H = sparse.identity(n, format="csr") + sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return H.tocsr(), ordered


def _fix_sign(v: np.ndarray) -> np.ndarray:
    j = int(np.argmax(np.abs(v)))
    return v if v[j] >= 0 else -v


def dense_spectrum(sites, dim: int, cap: int = 4096) -> tuple:
    """Full eigen-decomposition ``(eigenvalues, eigenvectors, ordered_sites)``."""
    ordered = _as_sites(sites, dim)
    if ordered.shape[0] > cap:
        raise SizeError(
            f"{ordered.shape[0]} sites exceed the dense cap of {cap}; use Monte Carlo instead"
        )
    H, ordered = dirichlet_operator(ordered, dim)
    vals, vecs = scipy.linalg.eigh(H.toarray())
    return vals, vecs, ordered


def principal_eigenvalue(sites, dim: int, cap: int = DEFAULT_SITE_CAP, return_vector: bool = False):
    """Smallest Dirichlet eigenvalue of ``I - P`` on a finite site set.

    Dense solve up to ``DENSE_THRESHOLD`` sites, shift-invert Lanczos above.
    """
    ordered = _as_sites(sites, dim)
    n = ordered.shape[0]
    if n > cap:
        raise SizeError(f"{n} sites exceed the cap of {cap}")
    H, ordered = dirichlet_operator(ordered, dim)
    if n <= DENSE_THRESHOLD:
        vals, vecs = scipy.linalg.eigh(H.toarray(), subset_by_index=[0, 0])
        lam, vec = float(vals[0]), vecs[:, 0]
    else:
        try:
            vals, vecs = eigsh(H.tocsc(), k=1, sigma=0.0, which="LM", tol=ITERATIVE_TOL, maxiter=10_000)
        except ArpackNoConvergence as exc:
            if exc.eigenvalues.size:
                v = exc.eigenvectors[:, 0]
                residual = float(np.linalg.norm(H @ v - exc.eigenvalues[0] * v))
            else:
                residual = float("inf")
            raise ConvergenceError("shift-invert Lanczos did not converge", residual) from exc
        lam, vec = float(vals[0]), vecs[:, 0]
        residual = float(np.linalg.norm(H @ vec - lam * vec))
        if residual > 1e-6:
            raise ConvergenceError("eigenpair residual above tolerance", residual)
    if return_vector:
        return lam, _fix_sign(vec), ordered
    return lam
