import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import koopkernel.spectral as spectral
from koopkernel.errors import ConfigurationError, DegenerateDataError, RankDeficiencyWarning
from koopkernel.kernels import KernelSpec, build_kernel
from koopkernel.spectral import (
    autocorrelation,
    eigenbasis,
    nystrom,
    pod,
    shift_matrix,
    time_averaged_correlation,
)


def _gram(basis, a, b):
    return a.T @ b / basis.N


def test_markov_basis_structure(markov_basis_200):
    b = markov_basis_200
    assert b.eigenvalues[0] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(b.eigenvalues) <= 0)
    np.testing.assert_allclose(b.phi[:, 0], 1.0, atol=1e-10)
    np.testing.assert_allclose(_gram(b, b.phi_dual, b.phi), np.eye(b.L), atol=1e-12)
    np.testing.assert_allclose(np.mean(b.phi**2, axis=0), 1.0, atol=1e-12)
    # dual of the constant is the stationary density (mean one)
    assert b.phi_dual[:, 0].mean() == pytest.approx(1.0, abs=1e-12)


def test_eigen_equation(markov_basis_200):
    b = markov_basis_200
    p = b.kernel.values
    np.testing.assert_allclose(p @ b.phi, b.phi * b.eigenvalues, atol=1e-12)
    np.testing.assert_allclose(b.phi_dual.T @ p, (b.phi_dual * b.eigenvalues).T, atol=1e-12)


def test_symmetric_basis_orthonormal(symmetric_basis_200):
    b = symmetric_basis_200
    np.testing.assert_allclose(_gram(b, b.phi, b.phi), np.eye(b.L), atol=1e-12)
    assert b.phi is b.phi_dual


def test_markov_and_symmetric_share_spectrum(markov_basis_200, symmetric_basis_200):
    np.testing.assert_allclose(markov_basis_200.eigenvalues, symmetric_basis_200.eigenvalues, atol=1e-12)


def test_lanczos_path_matches_dense(l63_small, monkeypatch):
    k = build_kernel(KernelSpec(normalization="markov"), l63_small.covariates)
    dense = eigenbasis(k, 10)
    monkeypatch.setattr(spectral, "LANCZOS_MIN_N", 100)
    sparse = eigenbasis(k, 10)
    np.testing.assert_allclose(sparse.eigenvalues, dense.eigenvalues, atol=1e-12)
    np.testing.assert_allclose(sparse.phi, dense.phi, atol=1e-8)


def test_basis_size_validated(markov_basis_200):
    with pytest.raises(ConfigurationError):
        eigenbasis(markov_basis_200.kernel, 0)
    with pytest.raises(ConfigurationError):
        eigenbasis(markov_basis_200.kernel, 201)


def test_rank_deficient_kernel_truncates():
    # three distinct points repeated: kernel rank three
    x = np.repeat(np.array([[0.0], [1.0], [2.5]]), 10, axis=0)
    k = build_kernel(KernelSpec(normalization="symmetric"), x)
    with pytest.warns(RankDeficiencyWarning):
        b = eigenbasis(k, 8)
    assert b.L == 3


def test_nystrom_reproduces_training_samples(symmetric_basis_200, markov_basis_200, l63_200):
    for b in (symmetric_basis_200.truncate(10), markov_basis_200.truncate(10)):
        got = nystrom(b, l63_200.covariates[[3, 50, 177]])
        np.testing.assert_allclose(got, b.phi[[3, 50, 177]], atol=1e-12)


def _shift_oracle(basis, q):
    n, L = basis.phi.shape
    out = np.zeros((L, L))
    for i in range(L):
        for j in range(L):
            acc = 0.0
            for t in range(n - q):
                acc += basis.phi_dual[t, i] * basis.phi[t + q, j]
            out[i, j] = acc / (n - q)
    return out


@pytest.mark.parametrize("q", [0, 1, 7])
def test_shift_matrix_matches_double_loop(markov_basis_200, q):
    b = markov_basis_200.truncate(8)
    np.testing.assert_allclose(shift_matrix(b, q).entries, _shift_oracle(b, q), atol=1e-12)


def test_shift_zero_is_identity(markov_basis_200):
    np.testing.assert_allclose(shift_matrix(markov_basis_200, 0).entries, np.eye(30), atol=1e-12)


def test_shift_matrix_rejects_long_shift(markov_basis_200):
    with pytest.raises(ConfigurationError):
        shift_matrix(markov_basis_200, 200)


def test_shift_lead_time(markov_basis_200):
    assert shift_matrix(markov_basis_200, 4, dt=0.05).lead_time == pytest.approx(0.2)


def test_pod_matches_covariance_eigendecomposition(l63_small):
    x = l63_small.covariates
    res = pod(x, 3)
    w, v = np.linalg.eigh(x.T @ x)
    np.testing.assert_allclose(res.singular_values**2, w[::-1], rtol=1e-10)
    for j in range(3):
        assert abs(abs(res.eofs[:, j] @ v[:, 2 - j]) - 1.0) < 1e-10
    np.testing.assert_allclose(res.pcs, x @ res.eofs)


def test_pod_rank_validated(l63_small):
    with pytest.raises(ConfigurationError):
        pod(l63_small.covariates, 4)


@settings(max_examples=25, deadline=None)
@given(st.integers(5, 60), st.integers(0, 4), st.booleans(), st.integers(0, 2**31))
def test_autocorrelation_matches_direct_sum(n, q_max, center, seed):
    f = np.random.default_rng(seed).standard_normal(n) + 0.3
    q_max = min(q_max, n - 1)
    got = autocorrelation(f, q_max, center=center)
    g = f - f.mean() if center else f
    direct = np.array([np.sum(g[: n - q] * g[q:]) / (n - q) for q in range(q_max + 1)])
    np.testing.assert_allclose(got, direct / direct[0], atol=1e-10)


def test_autocorrelation_of_pure_rotation():
    t = 0.05 * np.arange(2000)
    c = autocorrelation(np.exp(1j * t), 400)
    np.testing.assert_allclose(np.abs(c), 1.0, atol=1e-12)
    np.testing.assert_allclose(c, np.exp(1j * t[:401]), atol=1e-12)


def test_autocorrelation_rejects_constant():
    with pytest.raises(DegenerateDataError):
        autocorrelation(np.ones(10), 3, center=True)


def test_time_average_is_running_mean():
    np.testing.assert_allclose(time_averaged_correlation([1.0, -0.5, 0.0, 0.5]), [1.0, 0.75, 0.5, 0.5])
