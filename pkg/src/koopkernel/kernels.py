"""Kernel matrices on (delay-embedded) covariates and their normalizations.

Operator convention used throughout the package: a kernel matrix ``A`` acts on
sampled functions as ``(G f)_i = sum_j A_ij f_j``, i.e. ``A = k(x_i, x_j) / N``
for the underlying kernel function ``k`` under the sampling measure. Markov
rows therefore sum to one, and the corresponding kernel function values,
``N * A_ij``, average to one against the sampling measure.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from .dynamics import DelayEmbedding
from .errors import (
    ConfigurationError,
    DegenerateDataError,
    DegenerateKernelError,
    OutOfDomainWarning,
)

FAMILIES = ("gaussian", "covariance")
NORMALIZATIONS = ("none", "symmetric", "markov")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family, bandwidth and normalization.

    ``epsilon=None`` means "pick the median squared distance" when the kernel
    is built. ``alpha`` is the density exponent of the first normalization
    stage (1 removes sampling-density bias).
    """

    family: str = "gaussian"
    epsilon: float | None = None
    delay_Q: int = 1
    normalization: str = "markov"
    alpha: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown kernel family {self.family!r}")
        if self.normalization not in NORMALIZATIONS:
            raise ConfigurationError(f"unknown normalization {self.normalization!r}")
        if self.family == "gaussian" and self.epsilon is not None and not self.epsilon > 0:
            raise ConfigurationError(f"gaussian bandwidth epsilon must be positive, got {self.epsilon}")
        if self.family == "covariance" and self.normalization != "none":
            raise ConfigurationError("covariance kernel supports normalization='none' only")
        if self.delay_Q < 1:
            raise ConfigurationError("delay_Q must be at least 1")


@dataclass(frozen=True)
class KernelMatrix:
    """Kernel values on the training samples plus what out-of-sample rows need.

    ``degree_d`` is the detailed-balance weight ``d`` (empty when unnormalized),
    ``degree_q`` the first-stage row sums of the raw kernel, ``epsilon`` the
    resolved bandwidth and ``points`` the training rows the kernel was built on.
    """

    values: np.ndarray
    normalization: str
    spec: KernelSpec
    degree_d: np.ndarray = field(default_factory=lambda: np.empty(0))
    degree_q: np.ndarray = field(default_factory=lambda: np.empty(0))
    epsilon: float | None = None
    points: np.ndarray | None = None
    base_offset: int = 0

    @property
    def n(self) -> int:
        return self.values.shape[0]


def pairwise_sqdist(embedding) -> np.ndarray:
    """Delay distance: squared Euclidean distance between rows divided by Q.

    Each entry is evaluated independently (no Gram-matrix shortcut), so the
    result is exactly symmetric with an exactly zero diagonal.
    """
    rows, Q = _rows_and_q(embedding)
    if rows.shape[0] == 0:
        raise ConfigurationError("embedding is empty")
    return squareform(pdist(rows, "sqeuclidean")) / Q


def _rows_and_q(embedding):
    if isinstance(embedding, DelayEmbedding):
        return embedding.rows, embedding.Q
    rows = np.asarray(embedding, dtype=float)
    if rows.ndim == 1:
        rows = rows[:, None]
    return rows, 1


def median_bandwidth(sqdist) -> float:
    """Median of the strictly positive off-diagonal squared distances."""
    sqdist = np.asarray(sqdist, dtype=float)
    if sqdist.shape[0] < 2:
        raise ConfigurationError("median bandwidth needs at least 2 points")
    upper = sqdist[np.triu_indices(sqdist.shape[0], k=1)]
    positive = upper[upper > 0]
    if positive.size == 0:
        raise DegenerateDataError("all pairwise distances are zero")
    return float(np.median(positive))


def kernel_eval(spec: KernelSpec, sqdist=None, covariates=None, epsilon=None) -> KernelMatrix:
    """Unnormalized kernel matrix.

    Gaussian kernels take a squared-distance matrix; the covariance kernel
    takes raw covariate rows and returns their Gram matrix. ``epsilon``
    overrides ``spec.epsilon``; if both are None the median heuristic is used.
    """
    if spec.family == "gaussian":
        if sqdist is None:
            raise ConfigurationError("gaussian kernel requires a squared-distance matrix")
        eps = spec.epsilon if epsilon is None else epsilon
        if eps is None:
            eps = median_bandwidth(sqdist)
        if not eps > 0:
            raise ConfigurationError(f"gaussian bandwidth epsilon must be positive, got {eps}")
        values = np.exp(-np.asarray(sqdist, dtype=float) / eps)
        return KernelMatrix(values=values, normalization="none", spec=spec, epsilon=float(eps))
    if covariates is None:
        raise ConfigurationError("covariance kernel requires raw covariates")
    x = np.asarray(covariates, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return KernelMatrix(values=x @ x.T, normalization="none", spec=spec, points=x)


def normalize(raw: KernelMatrix, mode: str, alpha: float | None = None) -> KernelMatrix:
    """Two-stage diffusion-maps normalization of a symmetric positive kernel.

    Stage one divides by ``q_i^alpha q_j^alpha`` with ``q`` the row sums;
    stage two uses the new row sums ``d`` either as a Markov normalization
    (``P = K1 / d_i``, detailed balance with weights ``d``) or a symmetric one
    (``S = K1 / sqrt(d_i d_j)``, conjugate to ``P``).
    """
    if mode not in ("symmetric", "markov"):
        raise ConfigurationError(f"normalization mode must be symmetric or markov, got {mode!r}")
    if alpha is None:
        alpha = raw.spec.alpha
    k = raw.values
    q = k.sum(axis=1)
    if not np.all(q > 0):
        raise DegenerateKernelError("kernel row sum vanished; bandwidth too narrow")
    qa = q ** alpha
    k1 = k / np.outer(qa, qa)
    d = k1.sum(axis=1)
    if not np.all(d > 0):
        raise DegenerateKernelError("normalized degree vanished; bandwidth too narrow")
    if mode == "markov":
        k1 /= d[:, None]
        values = k1
    else:
        sd = np.sqrt(d)
        k1 /= np.outer(sd, sd)
        values = 0.5 * (k1 + k1.T)
    spec = KernelSpec(
        family=raw.spec.family,
        epsilon=raw.spec.epsilon,
        delay_Q=raw.spec.delay_Q,
        normalization=mode,
        alpha=alpha,
    )
    return KernelMatrix(
        values=values,
        normalization=mode,
        spec=spec,
        degree_d=d,
        degree_q=q,
        epsilon=raw.epsilon,
        points=raw.points,
        base_offset=raw.base_offset,
    )


def build_kernel(spec: KernelSpec, embedding, normalization=None) -> KernelMatrix:
    """Distance, evaluation and normalization in one call.

    ``embedding`` is a DelayEmbedding (whose Q must match ``spec.delay_Q``) or
    a plain array of covariate rows. ``normalization`` overrides ``spec.normalization``.
    """
    mode = spec.normalization if normalization is None else normalization
    if isinstance(embedding, DelayEmbedding):
        if embedding.Q != spec.delay_Q:
            raise ConfigurationError(f"embedding Q={embedding.Q} but spec delay_Q={spec.delay_Q}")
        rows, offset = embedding.rows, embedding.base_index_offset
    else:
        rows, _ = _rows_and_q(embedding)
        offset = 0
        if spec.delay_Q != 1:
            raise ConfigurationError("plain covariate rows imply delay_Q=1; pass a DelayEmbedding")
    if spec.family == "covariance":
        raw = kernel_eval(spec, covariates=rows)
    else:
        raw = kernel_eval(spec, sqdist=pairwise_sqdist(embedding))
    raw = KernelMatrix(
        values=raw.values,
        normalization="none",
        spec=spec,
        epsilon=raw.epsilon,
        points=rows,
        base_offset=offset,
    )
    if mode == "none":
        return raw
    return normalize(raw, mode)


def out_of_sample_rows(kernel: KernelMatrix, x_new, warn=True):
    """Normalized kernel rows at new points, consistent with the training kernel.

    Returns ``(rows, d_new, fallback)``: ``rows`` is M x N with each row a
    probability density with respect to the sampling measure (mean one),
    ``d_new`` the second-stage degrees of the new points and ``fallback`` a
    boolean mask of points whose raw weights all underflowed. Those get a
    uniform row of ones.
    """
    if kernel.normalization == "none" or kernel.points is None or kernel.epsilon is None:
        raise ConfigurationError("out-of-sample rows need a normalized gaussian kernel")
    x_new = np.atleast_2d(np.asarray(x_new, dtype=float))
    n = kernel.n
    raw = np.exp(-cross_sqdist_rows(kernel, x_new) / kernel.epsilon)
    q_new = raw.sum(axis=1)
    fallback = ~(q_new > np.finfo(float).tiny)
    alpha = kernel.spec.alpha
    with np.errstate(divide="ignore", invalid="ignore"):
        k1 = raw / np.outer(q_new ** alpha, kernel.degree_q ** alpha)
        d_new = k1.sum(axis=1)
        rows = n * k1 / d_new[:, None]
    if np.any(fallback):
        if warn:
            warnings.warn(
                f"{int(fallback.sum())} point(s) far from all training data; using uniform rows",
                OutOfDomainWarning,
                stacklevel=2,
            )
        rows[fallback] = 1.0
        d_new[fallback] = np.nan
    return rows, d_new, fallback


def cross_sqdist_rows(kernel: KernelMatrix, x_new) -> np.ndarray:
    if x_new.shape[1] != kernel.points.shape[1]:
        raise ConfigurationError(
            f"new point has width {x_new.shape[1]}, training rows have width {kernel.points.shape[1]}"
        )
    return cdist(x_new, kernel.points, "sqeuclidean") / kernel.spec.delay_Q


def out_of_sample_row(kernel: KernelMatrix, x_new) -> np.ndarray:
    """Density row ``kappa_N(x_new, x_n)``, ``n < N``, for a single new point."""
    rows, _, _ = out_of_sample_rows(kernel, np.asarray(x_new, dtype=float).reshape(1, -1))
    return rows[0]
