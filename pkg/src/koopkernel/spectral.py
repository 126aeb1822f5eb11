"""Data-driven eigenbases, Nystrom extension, shift-operator matrices, POD.

Inner products are taken with respect to the sampling measure, i.e.
``<f, g> = sum_n conj(f_n) g_n / N``. Basis functions are stored by their
sample values, one column per mode.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import (
    ConfigurationError,
    DegenerateDataError,
    NumericalError,
    RankDeficiencyWarning,
)
from .kernels import KernelMatrix, out_of_sample_rows

RANK_TOL = 1e-14
TIE_TOL = 1e-12
LANCZOS_MIN_N = 3000


@dataclass(frozen=True)
class EigenBasis:
    """Leading eigenpairs of a normalized kernel operator.

    ``phi`` has unit norm columns; ``phi_dual`` satisfies
    ``<phi_dual_i, phi_j> = delta_ij`` and equals ``phi`` for a symmetric
    kernel. For a Markov kernel ``phi[:, 0]`` is the constant function 1 and
    ``phi_dual[:, 0]`` the stationary density.
    """

    eigenvalues: np.ndarray
    phi: np.ndarray
    phi_dual: np.ndarray
    kernel: KernelMatrix
    N: int

    @property
    def L(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def normalization(self) -> str:
        return self.kernel.normalization

    def truncate(self, L: int) -> "EigenBasis":
        if not 1 <= L <= self.L:
            raise ConfigurationError(f"cannot truncate a basis of size {self.L} to {L}")
        return EigenBasis(self.eigenvalues[:L], self.phi[:, :L], self.phi_dual[:, :L], self.kernel, self.N)


@dataclass(frozen=True)
class KoopmanMatrix:
    """Shift-operator matrix ``U_ij(q) = <phi_dual_i, U^q phi_j>``."""

    q: int
    dt: float
    entries: np.ndarray

    @property
    def lead_time(self) -> float:
        return self.q * self.dt


@dataclass(frozen=True)
class PODResult:
    singular_values: np.ndarray
    eofs: np.ndarray
    pcs: np.ndarray


def symmetric_conjugate(kernel: KernelMatrix) -> np.ndarray:
    """Symmetric matrix sharing the kernel's spectrum.

    For a Markov matrix this is ``D^{1/2} P D^{-1/2}`` with ``D`` the
    stationary weights; the result is symmetrized to remove round-off.
    """
    if kernel.normalization == "symmetric":
        return kernel.values
    if kernel.normalization != "markov":
        raise ConfigurationError("eigenbasis needs a symmetric or markov normalized kernel")
    sd = np.sqrt(kernel.degree_d)
    s = kernel.values * sd[:, None]
    s /= sd[None, :]
    return 0.5 * (s + s.T)


def eigenbasis(kernel: KernelMatrix, L: int) -> EigenBasis:
    """Top-``L`` eigenpairs, ordered by decreasing eigenvalue.

    Eigenvectors come from a symmetric eigensolver (dense LAPACK, or ARPACK
    Lanczos when only a few modes of a large matrix are needed) on the conjugate matrix and
    are mapped back by diagonal scaling, which makes biorthogonality exact up
    to round-off. Ties (within 1e-12) are ordered by the position of the
    largest-magnitude sample, and each vector's first significant entry is
    made positive so that repeated runs agree.
    """
    n = kernel.n
    if not 1 <= L <= n:
        raise ConfigurationError(f"basis size L must satisfy 1 <= L <= N={n}, got {L}")
    s = symmetric_conjugate(kernel)
    try:
        if n >= LANCZOS_MIN_N and L <= min(n // 10, 64):
            # fixed start vector keeps ARPACK deterministic
            v0 = np.random.default_rng(0).standard_normal(n)
            lam, v = scipy.sparse.linalg.eigsh(s, k=L, which="LA", v0=v0, tol=0.0)
        elif L < n:
            lam, v = scipy.linalg.eigh(s, subset_by_index=[n - L, n - 1], driver="evr")
        else:
            lam, v = scipy.linalg.eigh(s)
    except (np.linalg.LinAlgError, ValueError, scipy.sparse.linalg.ArpackError) as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    lam, v = _order_eigenpairs(lam, v)

    n_ok = int(np.sum(lam > RANK_TOL * lam[0]))
    if n_ok < L:
        warnings.warn(
            f"only {n_ok} eigenvalues above {RANK_TOL:g} x lambda_0; truncating L from {L}",
            RankDeficiencyWarning,
            stacklevel=2,
        )
        lam, v = lam[:n_ok], v[:, :n_ok]

    if kernel.normalization == "markov":
        pi = kernel.degree_d / kernel.degree_d.sum()
        sp = np.sqrt(pi)
        phi = v / sp[:, None]
        scale = np.sqrt(np.mean(phi**2, axis=0))
        phi /= scale
        phi_dual = v * (sp[:, None] * (n * scale))
    else:
        phi = v * np.sqrt(n)
        phi_dual = phi
    return EigenBasis(eigenvalues=lam, phi=phi, phi_dual=phi_dual, kernel=kernel, N=n)


def _order_eigenpairs(lam, v):
    order = np.argsort(-lam, kind="stable")
    lam, v = lam[order], v[:, order]
    dominant = np.argmax(np.abs(v), axis=0)
    start = 0
    while start < len(lam):
        stop = start + 1
        while stop < len(lam) and abs(lam[stop - 1] - lam[stop]) < TIE_TOL:
            stop += 1
        if stop - start > 1:
            sub = start + np.argsort(dominant[start:stop], kind="stable")
            lam[start:stop], v[:, start:stop] = lam[sub], v[:, sub]
            dominant[start:stop] = dominant[sub]
        start = stop
    for j in range(v.shape[1]):
        col = v[:, j]
        significant = np.flatnonzero(np.abs(col) > 1e-8 * np.abs(col).max())
        if col[significant[0]] < 0:
            v[:, j] = -col
    return lam, v


def nystrom_numerators(basis: EigenBasis, x_new):
    """``(1/N) sum_n k(x, x_n) phi_j(x_n)`` for each new point and mode.

    Uses the out-of-sample row matching the basis normalization. Returns the
    M x L array and the out-of-domain fallback mask.
    """
    kernel = basis.kernel
    rows, d_new, fallback = out_of_sample_rows(kernel, x_new)
    if kernel.normalization == "symmetric":
        # density row -> symmetric row: multiply by sqrt(d(x) / d_n)
        with np.errstate(invalid="ignore"):
            rows = rows * np.sqrt(d_new[:, None] / kernel.degree_d[None, :])
        rows[fallback] = 1.0
    return rows @ basis.phi / basis.N, fallback


def nystrom(basis: EigenBasis, x_new) -> np.ndarray:
    """Continuous extension ``phi_j(x) = (K phi_j)(x) / lambda_j`` at new points.

    Returns a length-L vector for a single point, M x L for a batch. At a
    training point this reproduces the stored sample values.
    """
    x = np.asarray(x_new, dtype=float)
    single = x.ndim == 1
    numer, _ = nystrom_numerators(basis, x.reshape(1, -1) if single else x)
    lam = basis.eigenvalues
    keep = lam > RANK_TOL * lam[0]
    if not np.all(keep):
        warnings.warn("omitting Nystrom components with vanishing eigenvalue", RankDeficiencyWarning, stacklevel=2)
    out = numer[:, keep] / lam[keep]
    return out[0] if single else out


def shift_matrix(basis: EigenBasis, q: int, dt: float = 1.0) -> KoopmanMatrix:
    """Matrix of the ``q``-step shift operator in the basis.

    ``U_ij(q) = 1/(N-q) sum_{n<N-q} phi_dual_i(n) phi_j(n+q)``; the
    ``1/(N-q)`` factor makes each entry an unbiased time average.
    """
    n = basis.N
    if not 0 <= q < n:
        raise ConfigurationError(f"shift q must satisfy 0 <= q < N={n}, got {q}")
    entries = basis.phi_dual[: n - q].T @ basis.phi[q:] / (n - q)
    return KoopmanMatrix(q=q, dt=dt, entries=entries)


def pod(data, L: int) -> PODResult:
    """Proper orthogonal decomposition of the samples (rows of ``data``).

    Accepts an N x m array or a TrajectoryDataset (its covariates). EOF signs
    are fixed by making each EOF's largest-magnitude entry positive.
    """
    if hasattr(data, "covariates"):
        data = data.covariates
    y = np.asarray(data, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    n, m = y.shape
    if not 1 <= L <= min(n, m):
        raise ConfigurationError(f"POD rank L must satisfy 1 <= L <= {min(n, m)}, got {L}")
    try:
        u, s, _ = np.linalg.svd(y.T, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed: {exc}") from exc
    u = u[:, :L]
    flip = u[np.argmax(np.abs(u), axis=0), np.arange(L)] < 0
    u[:, flip] *= -1
    return PODResult(singular_values=s[:L], eofs=u, pcs=y @ u)


def autocorrelation(series, q_max: int, center: bool = False) -> np.ndarray:
    """Normalized lagged correlation ``C(q) / C(0)`` for ``q = 0..q_max``.

    ``C(q) = 1/(N-q) sum_n conj(f_n) f_{n+q}``, computed with an FFT.
    """
    f = np.asarray(series).ravel().astype(complex)
    n = f.size
    if not 0 <= q_max < n:
        raise ConfigurationError(f"q_max must satisfy 0 <= q_max < N={n}")
    if center:
        f = f - f.mean()
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.fft(f, nfft)
    raw = np.fft.ifft(np.conj(spec) * spec)[: q_max + 1]
    c = raw / (n - np.arange(q_max + 1))
    if not abs(c[0]) > 0:
        raise DegenerateDataError("series has zero variance")
    return c / c[0]


def time_averaged_correlation(c) -> np.ndarray:
    """Running mean of ``|C|`` over lags ``0..q`` (discrete time average)."""
    a = np.abs(np.asarray(c))
    return np.cumsum(a) / np.arange(1, a.size + 1)
