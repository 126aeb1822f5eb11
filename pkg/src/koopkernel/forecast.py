"""Forecasting: diffusion forecasts, kernel analog forecasts, k-NN analogs.

Shifted time averages use the unbiased ``1/(N-q)`` normalization throughout,
matching ``spectral.shift_matrix``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigurationError, OutOfDomainWarning, RankError
from .kernels import out_of_sample_rows
from .spectral import EigenBasis, nystrom_numerators, shift_matrix


@dataclass(frozen=True)
class KAFModel:
    """Kernel analog forecast coefficients for leads ``0..q_max``.

    ``coeffs[q, j]`` is the time-shifted projection of the responses onto
    basis function ``j``; ``coeffs_sq`` is the same for the squared responses
    and drives the conditional standard deviation.
    """

    basis: EigenBasis
    L: int
    q_max: int
    coeffs: np.ndarray
    coeffs_sq: np.ndarray
    response_mean: float
    response_std: float


@dataclass
class ForecastSeries:
    lead_times: np.ndarray
    predictions: np.ndarray
    sigma: np.ndarray | None = None
    truth: np.ndarray | None = None
    rmse: np.ndarray | None = None
    mean_sigma: np.ndarray | None = None
    climatology: float | None = None
    fallback: np.ndarray | None = None


def density_coefficients(basis: EigenBasis, density) -> np.ndarray:
    """``<phi_j, rho>`` for a density sampled on the training points.

    Taken against the primal functions, so that pairing with dual-basis
    response coefficients in ``df_forecast`` reproduces the expectation.
    """
    rho = np.asarray(density, dtype=float)
    return basis.phi.T @ rho / basis.N


def response_coefficients(basis: EigenBasis, responses) -> np.ndarray:
    """``<phi_dual_j, Y>`` for responses sampled on the training points."""
    y = np.asarray(responses, dtype=float).ravel()
    return basis.phi_dual.T @ y / basis.N


def df_forecast(basis: EigenBasis, density_coeffs, response_coeffs, q: int) -> float:
    """Expected L-projected response after ``q`` steps: ``rho^T U(q) Y``."""
    u = shift_matrix(basis, q).entries
    return float(np.asarray(density_coeffs) @ u @ np.asarray(response_coeffs))


def df_predict(basis: EigenBasis, responses, x_new, q: int) -> float:
    """Diffusion forecast initialized with the kernel density at ``x_new``."""
    rows, _, _ = out_of_sample_rows(basis.kernel, np.asarray(x_new, dtype=float).reshape(1, -1))
    return df_forecast(basis, density_coefficients(basis, rows[0]), response_coefficients(basis, responses), q)


def kaf_fit(basis: EigenBasis, responses, q_max: int, L: int | None = None) -> KAFModel:
    """Coefficients ``c_j(q) = 1/(N-q) sum_n phi_j(n) y_{n+q}`` for ``q <= q_max``."""
    n = basis.N
    if L is None:
        L = basis.L
    if not 1 <= L <= basis.L:
        raise ConfigurationError(f"L must satisfy 1 <= L <= {basis.L}")
    if not 0 <= q_max < n:
        raise ConfigurationError(f"q_max must satisfy 0 <= q_max < N={n}, got {q_max}")
    if basis.normalization != "symmetric":
        raise ConfigurationError("kernel analog forecasting needs a symmetric-normalized basis")
    lam = basis.eigenvalues[:L]
    if np.any(lam <= 0):
        raise RankError("KAF needs positive eigenvalues for every retained mode")
    y = np.asarray(responses, dtype=float).ravel()
    if y.size != n:
        raise ConfigurationError(f"responses have length {y.size}, basis has N={n}")
    phi = basis.phi[:, :L]
    coeffs = np.empty((q_max + 1, L))
    coeffs_sq = np.empty((q_max + 1, L))
    y2 = y * y
    for q in range(q_max + 1):
        head = phi[: n - q]
        coeffs[q] = y[q:] @ head / (n - q)
        coeffs_sq[q] = y2[q:] @ head / (n - q)
    return KAFModel(
        basis=basis,
        L=L,
        q_max=q_max,
        coeffs=coeffs,
        coeffs_sq=coeffs_sq,
        response_mean=float(y.mean()),
        response_std=float(y.std()),
    )


def kaf_predict_batch(model: KAFModel, x_new, q: int):
    """Predictions, conditional standard deviations and fallback mask for M points.

    Points whose kernel row underflows everywhere get the climatological
    mean and standard deviation.
    """
    if not 0 <= q <= model.q_max:
        raise ConfigurationError(f"lead q must satisfy 0 <= q <= {model.q_max}")
    x = np.atleast_2d(np.asarray(x_new, dtype=float))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OutOfDomainWarning)
        numer, fallback = nystrom_numerators(model.basis.truncate(model.L), x)
    ext = numer / model.basis.eigenvalues[: model.L]
    pred = ext @ model.coeffs[q]
    m2 = ext @ model.coeffs_sq[q]
    sigma = np.sqrt(np.maximum(0.0, m2 - pred**2))
    if np.any(fallback):
        warnings.warn(
            f"{int(fallback.sum())} forecast(s) fell back to climatology", OutOfDomainWarning, stacklevel=2
        )
        pred[fallback] = model.response_mean
        sigma[fallback] = model.response_std
    return pred, sigma, fallback


def kaf_predict(model: KAFModel, x_new, q: int):
    """Single-point forecast ``(prediction, sigma)`` at lead ``q``."""
    pred, sigma, _ = kaf_predict_batch(model, np.asarray(x_new, dtype=float).reshape(1, -1), q)
    return float(pred[0]), float(sigma[0])


def analog_ensemble(covariates, responses, x_new, q: int, k_neighbors: int = 1) -> np.ndarray:
    """Responses ``y_{n+q}`` of the ``k`` training covariates nearest ``x_new``.

    Only indices with ``n + q < N`` are admissible. Ties in distance resolve
    to the earliest index.
    """
    x = np.asarray(covariates, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(responses, dtype=float).ravel()
    n = x.shape[0]
    if k_neighbors < 1:
        raise ConfigurationError("k_neighbors must be at least 1")
    if not 0 <= q < n:
        raise ConfigurationError(f"no admissible analogs for lead q={q} with N={n}")
    admissible = n - q
    dist = cdist(np.asarray(x_new, dtype=float).reshape(1, -1), x[:admissible], "sqeuclidean")[0]
    k = min(k_neighbors, admissible)
    nearest = np.argsort(dist, kind="stable")[:k]
    return y[nearest + q]


def analog_forecast(covariates, responses, x_new, q: int, k_neighbors: int = 1) -> float:
    """Mean of the analog ensemble (see ``analog_ensemble``)."""
    return float(analog_ensemble(covariates, responses, x_new, q, k_neighbors).mean())


def rmse_curve(forecaster, test_points, truth, leads, dt: float = 1.0, climatology=None) -> ForecastSeries:
    """Per-lead RMSE of a forecaster over a test set.

    ``forecaster(x_batch, q)`` returns predictions, or ``(predictions, sigma)``.
    ``truth[i, k]`` is the verifying response for test point ``i`` at
    ``leads[k]``.
    """
    x = np.atleast_2d(np.asarray(test_points, dtype=float))
    truth = np.asarray(truth, dtype=float)
    leads = np.asarray(leads, dtype=int)
    if x.shape[0] == 0:
        raise ConfigurationError("empty test set")
    if truth.shape != (x.shape[0], leads.size):
        raise ConfigurationError(f"truth must have shape {(x.shape[0], leads.size)}, got {truth.shape}")
    preds = np.empty_like(truth)
    sigmas = None
    for k, q in enumerate(leads):
        out = forecaster(x, int(q))
        if isinstance(out, tuple):
            preds[:, k] = out[0]
            if sigmas is None:
                sigmas = np.full_like(truth, np.nan)
            sigmas[:, k] = out[1]
        else:
            preds[:, k] = out
    rmse = np.sqrt(np.mean((preds - truth) ** 2, axis=0))
    return ForecastSeries(
        lead_times=leads * dt,
        predictions=preds,
        sigma=sigmas,
        truth=truth,
        rmse=rmse,
        mean_sigma=None if sigmas is None else sigmas.mean(axis=0),
        climatology=climatology,
    )


def kaf_forecaster(model: KAFModel):
    def forecaster(x, q):
        pred, sigma, _ = kaf_predict_batch(model, x, q)
        return pred, sigma

    return forecaster


def analog_forecaster(covariates, responses, k_neighbors: int = 1):
    def forecaster(x, q):
        return np.array([analog_forecast(covariates, responses, xi, q, k_neighbors) for xi in x])

    return forecaster


def climatology_forecaster(mean: float):
    def forecaster(x, q):
        return np.full(x.shape[0], mean)

    return forecaster
