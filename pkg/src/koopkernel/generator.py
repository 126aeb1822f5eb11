"""Coherent patterns from a compactified, skew-symmetric generator.

The generator is approximated by a central difference of the one-step shift
matrix, then conjugated by the square roots of the kernel eigenvalues so that
it stays skew-symmetric while acquiring the kernel's smoothing. Eigenvectors
are ranked by a Dirichlet energy (RKHS norm over L2 norm).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, RankError
from .spectral import EigenBasis, KoopmanMatrix, shift_matrix

ZERO_TOL = 1e-10


@dataclass(frozen=True)
class GeneratorModel:
    """Compactified generator and its eigendecomposition.

    Mode ``j`` is column ``j`` of ``eigvec_coeffs`` (expansion coefficients in
    the kernel eigenbasis) with ``V_compact w = i * eigenfrequencies[j] * w``.
    Modes are sorted by ``|frequency|``, positive member of each pair first.
    ``frequencies`` holds the generator Rayleigh quotient
    ``Im(w^H V_raw w)`` of each mode, i.e. the frequency before compactification.
    """

    V_raw: np.ndarray
    V_compact: np.ndarray
    eigenfrequencies: np.ndarray
    eigvec_coeffs: np.ndarray
    dirichlet_energies: np.ndarray
    frequencies: np.ndarray
    kernel_eigenvalues: np.ndarray
    dt: float

    @property
    def L(self) -> int:
        return self.V_raw.shape[0]

    def by_dirichlet(self, nonzero_only=False, zero_tol=ZERO_TOL):
        """Mode indices ordered by increasing Dirichlet energy."""
        idx = np.argsort(self.dirichlet_energies, kind="stable")
        if nonzero_only:
            idx = idx[np.abs(self.eigenfrequencies[idx]) > zero_tol]
        return idx


def generator_fd(basis: EigenBasis, dt: float) -> np.ndarray:
    """Central-difference generator ``(U(1) - U(1)^T) / (2 dt)`` in the basis."""
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    a = shift_matrix(basis, 1, dt).entries
    return (a - a.T) / (2.0 * dt)


def dirichlet(coeffs, eigenvalues) -> float:
    """``sum |c_j|^2 / lambda_j`` divided by ``sum |c_j|^2``."""
    c = np.asarray(coeffs)
    lam = np.asarray(eigenvalues, dtype=float)[: c.shape[0]]
    w = np.abs(c) ** 2
    total = w.sum()
    if not total > 0:
        raise ConfigurationError("Dirichlet energy undefined for the zero vector")
    if np.any(lam <= 0):
        raise RankError("Dirichlet energy needs strictly positive eigenvalues")
    return float(np.sum(w / lam) / total)


def compactify(V_raw, eigenvalues, dt: float = 1.0) -> GeneratorModel:
    """Smooth ``V_raw`` to ``Lambda^{1/2} V_raw Lambda^{1/2}`` and diagonalize it.

    Eigenpairs come from the Hermitian matrix ``i V``; the negative-frequency
    partner of each pair is the complex conjugate of the positive one, so
    pairs are exact. Null vectors are taken real. Each eigenvector's
    largest-magnitude entry is rotated to be real and positive.
    """
    v = np.asarray(V_raw, dtype=float)
    L = v.shape[0]
    lam = np.asarray(eigenvalues, dtype=float)[:L]
    if lam.shape[0] < L:
        raise ConfigurationError("fewer eigenvalues than generator size")
    if np.any(lam <= 0):
        raise RankError(
            f"compactification needs positive kernel eigenvalues; "
            f"{int(np.sum(lam <= 0))} nonpositive among {L} retained, use a smaller L"
        )
    v = 0.5 * (v - v.T)
    s = np.sqrt(lam)
    vc = v * np.outer(s, s)
    vc = 0.5 * (vc - vc.T)

    mu, w = np.linalg.eigh(1j * vc)
    # i V w = mu w  =>  V w = -i mu w, frequency -mu
    alpha = -mu
    scale = max(np.abs(alpha).max(), 1e-300)
    pos = np.flatnonzero(alpha > ZERO_TOL * scale)
    n_null = L - 2 * pos.size
    if n_null < 0:
        raise RankError("unpaired generator spectrum")

    freqs, vecs = [], []
    for k in pos:
        vec = _fix_phase(w[:, k])
        freqs += [alpha[k], -alpha[k]]
        vecs += [vec, vec.conj()]
    if n_null:
        null_cols = np.flatnonzero(np.abs(alpha) <= ZERO_TOL * scale)
        cand = np.hstack([w[:, null_cols].real, w[:, null_cols].imag])
        u, sv, _ = np.linalg.svd(cand, full_matrices=False)
        for k in range(n_null):
            col = u[:, k]
            if col[np.argmax(np.abs(col))] < 0:
                col = -col
            freqs.append(0.0)
            vecs.append(col.astype(complex))
    freqs = np.array(freqs)
    vecs = np.column_stack(vecs)

    order = np.lexsort((-np.sign(freqs), np.abs(freqs)))
    freqs, vecs = freqs[order], vecs[:, order]
    energies = np.array([dirichlet(vecs[:, j], lam) for j in range(L)])
    rayleigh = np.einsum("ij,ik,kj->j", vecs.conj(), v, vecs).imag
    return GeneratorModel(
        V_raw=v,
        V_compact=vc,
        eigenfrequencies=freqs,
        eigvec_coeffs=vecs,
        dirichlet_energies=energies,
        frequencies=rayleigh,
        kernel_eigenvalues=lam,
        dt=dt,
    )


def _fix_phase(vec):
    k = np.argmax(np.abs(vec))
    vec = vec * (abs(vec[k]) / vec[k])
    vec[k] = abs(vec[k])
    return vec / np.linalg.norm(vec)


def generator_model(basis: EigenBasis, dt: float, L: int | None = None) -> GeneratorModel:
    """Finite-difference generator in the top-``L`` modes, compactified."""
    if L is not None:
        basis = basis.truncate(L)
    return compactify(generator_fd(basis, dt), basis.eigenvalues, dt)


def approx_eigen_residual(basis_or_shift, z_coeffs, alpha: float, q: int = 1, dt: float | None = None) -> float:
    """Relative residual ``||U(q) z - exp(i alpha q dt) z|| / ||z||``.

    ``basis_or_shift`` is an EigenBasis (the shift matrix is computed) or a
    precomputed KoopmanMatrix, in which case ``q`` and ``dt`` come from it.
    Norms are Euclidean on coefficients, which matches the L2 norm for an
    orthonormal basis.
    """
    if isinstance(basis_or_shift, KoopmanMatrix):
        shift = basis_or_shift
    else:
        if dt is None:
            raise ConfigurationError("dt required when passing a basis")
        shift = shift_matrix(basis_or_shift, q, dt)
    z = np.asarray(z_coeffs, dtype=complex)
    nz = np.linalg.norm(z)
    if not nz > 0:
        raise ConfigurationError("residual undefined for the zero vector")
    u = shift.entries[: z.size, : z.size]
    eig = np.exp(1j * alpha * shift.q * shift.dt)
    return float(np.linalg.norm(u @ z - eig * z) / nz)


def eigenfunction_timeseries(model: GeneratorModel, basis: EigenBasis, j: int) -> np.ndarray:
    """Samples ``z_n = sum_l w_l phi_l(omega_n)`` of mode ``j``, unit L2 norm."""
    if not 0 <= j < model.L:
        raise ConfigurationError(f"mode index {j} out of range")
    z = basis.phi[:, : model.L] @ model.eigvec_coeffs[:, j]
    return z / np.sqrt(np.mean(np.abs(z) ** 2))
