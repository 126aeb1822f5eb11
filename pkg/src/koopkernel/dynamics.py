"""Reference trajectories (Lorenz 63, torus rotation) and delay-coordinate maps.

Lorenz 63 is integrated with a fixed-step classical Runge-Kutta scheme; the
torus rotation is advanced with its closed-form flow so that samples are exact
up to floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, IntegrationDivergenceError

TWO_PI = 2.0 * np.pi

LORENZ63_PARAMETERS = (10.0, 28.0, 8.0 / 3.0)
TORUS_FREQUENCIES = (1.0, np.sqrt(2.0))

_DEFAULT_INITIAL_STATE = {
    "lorenz63": (1.0, 1.0, 1.0),
    "torus_rotation": (0.0, 0.0),
}
_PARAMETER_COUNT = {"lorenz63": 3, "torus_rotation": 2}


@dataclass(frozen=True)
class SystemSpec:
    """Which reference system to sample, and how.

    ``parameters`` and ``initial_state`` default per model: the classical
    chaotic coefficients for Lorenz 63 and frequencies ``(1, sqrt 2)`` for the
    torus. Integration uses ``dt / integrator_substeps`` as the RK4 step.
    """

    model_id: str = "lorenz63"
    parameters: tuple | None = None
    dt: float = 0.05
    n_samples: int = 2000
    spinup_steps: int = 2000
    initial_state: tuple | None = None
    integrator_substeps: int = 5

    def __post_init__(self):
        if self.model_id not in _PARAMETER_COUNT:
            raise ConfigurationError(f"unknown model_id {self.model_id!r}")
        if self.parameters is None:
            default = LORENZ63_PARAMETERS if self.model_id == "lorenz63" else TORUS_FREQUENCIES
            object.__setattr__(self, "parameters", tuple(default))
        else:
            object.__setattr__(self, "parameters", tuple(float(p) for p in self.parameters))
        if self.initial_state is None:
            object.__setattr__(self, "initial_state", _DEFAULT_INITIAL_STATE[self.model_id])
        else:
            object.__setattr__(self, "initial_state", tuple(float(s) for s in self.initial_state))

        if len(self.parameters) != _PARAMETER_COUNT[self.model_id]:
            raise ConfigurationError(
                f"{self.model_id} needs {_PARAMETER_COUNT[self.model_id]} parameters, "
                f"got {len(self.parameters)}"
            )
        if len(self.initial_state) != self.state_dim:
            raise ConfigurationError(
                f"initial_state must have length {self.state_dim}, got {len(self.initial_state)}"
            )
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if self.n_samples < 2:
            raise ConfigurationError(f"n_samples must be at least 2, got {self.n_samples}")
        if self.spinup_steps < 0:
            raise ConfigurationError("spinup_steps must be nonnegative")
        if self.integrator_substeps < 1:
            raise ConfigurationError("integrator_substeps must be at least 1")

    @property
    def state_dim(self) -> int:
        return 3 if self.model_id == "lorenz63" else 2


@dataclass(frozen=True)
class TrajectoryDataset:
    """Samples ``omega_n`` at spacing ``dt`` with covariates and responses.

    All arrays share the leading length ``N``; they are treated as read-only.
    """

    dt: float
    states: np.ndarray
    covariates: np.ndarray
    responses: np.ndarray
    covariate_map_id: str = "identity"

    def __post_init__(self):
        n = self.states.shape[0]
        if self.covariates.shape[0] != n or self.responses.shape[0] != n:
            raise ConfigurationError("states, covariates and responses must share length N")
        for name in ("states", "covariates", "responses"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)):
                raise ConfigurationError(f"{name} contains non-finite entries")
            arr.flags.writeable = False

    @property
    def n_samples(self) -> int:
        return self.states.shape[0]

    def slice(self, start, stop) -> "TrajectoryDataset":
        """Contiguous sub-trajectory (copies the arrays)."""
        return TrajectoryDataset(
            dt=self.dt,
            states=self.states[start:stop].copy(),
            covariates=self.covariates[start:stop].copy(),
            responses=self.responses[start:stop].copy(),
            covariate_map_id=self.covariate_map_id,
        )


@dataclass(frozen=True)
class DelayEmbedding:
    """Delay-coordinate rows; row ``r`` belongs to sample ``r + base_index_offset``.

    Row ``r`` holds ``(x_n, x_{n-1}, ..., x_{n-Q+1})`` with ``n = r + Q - 1``.
    """

    Q: int
    rows: np.ndarray
    base_index_offset: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "base_index_offset", self.Q - 1)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]


def lorenz63_vector_field(state, sigma=10.0, rho=28.0, beta=8.0 / 3.0):
    x, y, z = state
    return np.array([sigma * (y - x), x * (rho - z) - y, x * y - beta * z])


def rk4_step(f, state, h):
    """One classical fourth-order Runge-Kutta step of size ``h``."""
    k1 = f(state)
    k2 = f(state + 0.5 * h * k1)
    k3 = f(state + 0.5 * h * k2)
    k4 = f(state + h * k3)
    return state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_lorenz63(initial_state, parameters, dt, n_steps, substeps=1):
    """Return the ``n_steps + 1`` states sampled every ``dt`` (including the start).

    Raises IntegrationDivergenceError naming the first sample index whose
    state is non-finite.
    """
    if parameters is None:
        parameters = LORENZ63_PARAMETERS
    sigma, rho, beta = (float(p) for p in parameters)
    h = dt / substeps
    h2, h6 = 0.5 * h, h / 6.0
    out = np.empty((n_steps + 1, 3))
    x, y, z = (float(s) for s in initial_state)
    out[0] = (x, y, z)
    # scalar arithmetic: ~10x faster than 3-element numpy arrays per step
    for n in range(1, n_steps + 1):
        for _ in range(substeps):
            a1, b1, c1 = sigma * (y - x), x * (rho - z) - y, x * y - beta * z
            xa, ya, za = x + h2 * a1, y + h2 * b1, z + h2 * c1
            a2, b2, c2 = sigma * (ya - xa), xa * (rho - za) - ya, xa * ya - beta * za
            xb, yb, zb = x + h2 * a2, y + h2 * b2, z + h2 * c2
            a3, b3, c3 = sigma * (yb - xb), xb * (rho - zb) - yb, xb * yb - beta * zb
            xc, yc, zc = x + h * a3, y + h * b3, z + h * c3
            a4, b4, c4 = sigma * (yc - xc), xc * (rho - zc) - yc, xc * yc - beta * zc
            x += h6 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            y += h6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
            z += h6 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
            raise IntegrationDivergenceError(n)
        out[n] = (x, y, z)
    return out


def exact_torus_flow(omega0, nu, t):
    """Rotate angles ``omega0`` by ``nu * t``, reduced into ``[0, 2 pi)``.

    Broadcasts over ``t``: a vector of times gives one row per time.
    """
    omega0 = np.asarray(omega0, dtype=float)
    nu = np.asarray(nu, dtype=float)
    t = np.asarray(t, dtype=float)
    angles = np.mod(omega0 + np.multiply.outer(t, nu), TWO_PI)
    # np.mod can round tiny negative inputs up to exactly 2 pi
    angles[angles >= TWO_PI] = 0.0
    return angles


def apply_covariate(states, map_id="identity"):
    """Covariate map X applied row-wise.

    ``map_id`` is ``"identity"``, ``"projection:<i>"`` (also accepts the tuple
    ``("coordinate_projection", i)``) or ``"torus_embedding"``, which sends
    angle pairs to ``(cos w1, sin w1, cos w2, sin w2)`` so that Euclidean
    distances are continuous on the torus.
    """
    states = np.asarray(states, dtype=float)
    if states.ndim == 1:
        states = states[:, None]
    kind, index = _parse_map_id(map_id)
    if kind == "identity":
        return states.copy()
    if kind == "projection":
        if not 0 <= index < states.shape[1]:
            raise ConfigurationError(
                f"projection index {index} out of range for state dimension {states.shape[1]}"
            )
        return states[:, index : index + 1].copy()
    return np.column_stack([f(states[:, k]) for k in range(states.shape[1]) for f in (np.cos, np.sin)])


def _parse_map_id(map_id):
    if isinstance(map_id, tuple):
        kind, index = map_id
        if kind in ("coordinate_projection", "projection"):
            return "projection", int(index)
        raise ConfigurationError(f"unknown covariate map {map_id!r}")
    if map_id in ("identity", "torus_embedding"):
        return map_id, None
    for prefix in ("projection:", "coordinate_projection:"):
        if isinstance(map_id, str) and map_id.startswith(prefix):
            try:
                return "projection", int(map_id[len(prefix):])
            except ValueError:
                break
    raise ConfigurationError(f"unknown covariate map {map_id!r}")


def simulate(spec: SystemSpec, covariate=None, response_index=0) -> TrajectoryDataset:
    """Sample ``spec.n_samples`` states after discarding ``spec.spinup_steps``.

    The covariate map defaults to the identity for Lorenz 63 and the flat
    torus embedding for the rotation. Responses are state coordinate
    ``response_index``.
    """
    if covariate is None:
        covariate = "identity" if spec.model_id == "lorenz63" else "torus_embedding"
    n_total = spec.spinup_steps + spec.n_samples
    if spec.model_id == "lorenz63":
        traj = integrate_lorenz63(
            spec.initial_state, spec.parameters, spec.dt, n_total - 1, spec.integrator_substeps
        )
        states = traj[spec.spinup_steps :]
    else:
        times = spec.dt * np.arange(spec.spinup_steps, n_total)
        states = exact_torus_flow(spec.initial_state, spec.parameters, times)
    if not 0 <= response_index < spec.state_dim:
        raise ConfigurationError(f"response_index {response_index} out of range")
    covariate_map_id = covariate if isinstance(covariate, str) else f"projection:{covariate[1]}"
    return TrajectoryDataset(
        dt=spec.dt,
        states=states,
        covariates=apply_covariate(states, covariate),
        responses=states[:, response_index : response_index + 1].copy(),
        covariate_map_id=covariate_map_id,
    )


def delay_embed(covariates, Q: int) -> DelayEmbedding:
    """Stack ``Q`` lagged copies of the covariates, most recent first.

    Accepts a TrajectoryDataset or an ``N x m`` array.
    """
    if isinstance(covariates, TrajectoryDataset):
        covariates = covariates.covariates
    covariates = np.asarray(covariates, dtype=float)
    if covariates.ndim == 1:
        covariates = covariates[:, None]
    n = covariates.shape[0]
    if not 1 <= Q <= n:
        raise ConfigurationError(f"delay count Q must satisfy 1 <= Q <= N={n}, got {Q}")
    rows = np.hstack([covariates[Q - 1 - k : n - k] for k in range(Q)])
    return DelayEmbedding(Q=Q, rows=rows)
