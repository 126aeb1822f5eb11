"""Experiment configuration: ``section.key = value`` files.

Blank lines and ``#`` comments are ignored. Unknown keys are rejected and
missing keys take the defaults below; some defaults depend on the model (the
torus has no spin-up and uses the flat torus embedding as covariate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from pathlib import Path

from .dynamics import SystemSpec
from .errors import ConfigurationError
from .kernels import KernelSpec

MODES = ("eigen", "df", "kaf", "analog", "patterns", "autocorr", "pod")


class ConfigValueError(ConfigurationError):
    def __init__(self, key, line, message):
        self.key, self.line = key, line
        where = f"line {line}" if line else "default"
        super().__init__(f"{key} ({where}): {message}")


@dataclass
class ExperimentConfig:
    # system
    model: str = "lorenz63"
    parameters: tuple | None = None
    dt: float = 0.05
    n_samples: int = 2000
    spinup_steps: int | None = None
    initial_state: tuple | None = None
    substeps: int = 5
    covariate: str | None = None
    response_index: int = 0
    # kernel
    family: str = "gaussian"
    epsilon: float | None = None
    epsilon_scale: float = 1.0
    normalization: str = "markov"
    alpha: float = 1.0
    delay_Q: int = 1
    # basis / workflows
    basis_size: int = 100
    leads: tuple = (0, 10, 20, 40, 80)
    test_fraction: float = 0.2
    k_neighbors: int = 15
    pattern_q: int = 1
    pattern_series: int = 4
    null_vectors: int = 100
    autocorr_q_max: int = 200
    autocorr_observable: str = "response"
    autocorr_center: bool | None = None
    pod_size: int | None = None
    mode: str = "eigen"
    output_dir: str = "results"
    seed: int = 0
    # line number of each explicitly set key, for error messages
    lines: dict = field(default_factory=dict, repr=False, compare=False)

    def system_spec(self) -> SystemSpec:
        spinup = self.spinup_steps
        if spinup is None:
            spinup = 2000 if self.model == "lorenz63" else 0
        return SystemSpec(
            model_id=self.model,
            parameters=self.parameters,
            dt=self.dt,
            n_samples=self.n_samples,
            spinup_steps=spinup,
            initial_state=self.initial_state,
            integrator_substeps=self.substeps,
        )

    def kernel_spec(self, normalization=None) -> KernelSpec:
        return KernelSpec(
            family=self.family,
            epsilon=self.epsilon,
            delay_Q=self.delay_Q,
            normalization=self.normalization if normalization is None else normalization,
            alpha=self.alpha,
        )

    @property
    def n_test(self) -> int:
        return int(math.floor(self.n_samples * self.test_fraction))

    def validate(self):
        """Check cross-field invariants; raises ConfigValueError naming the key."""
        checks = [
            ("system.model", lambda: self.system_spec()),
            ("kernel.family", lambda: self.kernel_spec()),
        ]
        for key, build in checks:
            try:
                build()
            except ConfigurationError as exc:
                raise ConfigValueError(key, self.lines.get(key), str(exc)) from None
        if self.epsilon_scale <= 0:
            self._fail("kernel.epsilon_scale", "must be positive")
        if self.basis_size < 1:
            self._fail("basis.size", "must be at least 1")
        if not 0 <= self.test_fraction <= 0.5:
            self._fail("forecast.test_fraction", "must lie in [0, 0.5]")
        if self.mode in ("df", "kaf", "analog"):
            if self.n_test < 1:
                self._fail("forecast.test_fraction", "forecast modes need a nonempty test segment")
            if not self.leads or min(self.leads) < 0 or max(self.leads) >= self.n_test:
                self._fail("forecast.leads", f"leads must lie in [0, {self.n_test})")
        if self.delay_Q > self.n_samples - self.n_test:
            self._fail("kernel.delay_q", "delay count exceeds training length")
        if self.mode not in MODES:
            self._fail("mode", f"unknown mode {self.mode!r}")
        if self.autocorr_observable not in ("response", "exp_first_angle"):
            self._fail("autocorr.observable", "must be response or exp_first_angle")
        return self

    def _fail(self, key, message):
        raise ConfigValueError(key, self.lines.get(key), message)

    def resolved_items(self):
        """(key, value) pairs echoing the configuration, for the manifest.

        The output directory is left out so that a run's artifacts do not
        depend on where they are written.
        """
        out = []
        for f in fields(self):
            if f.name in ("lines", "output_dir"):
                continue
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ";".join(_fmt(v) for v in value)
            out.append((f.name, _fmt(value)))
        return out


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    if v is None:
        return "auto"
    return str(v)


def _float(s):
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int(s):
    return int(s)


def _floats(s):
    return tuple(_float(p) for p in s.split(","))


def _ints(s):
    return tuple(_int(p) for p in s.split(","))


def _bool(s):
    low = s.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError("expected true/false")


def _choice(*options):
    def parse(s):
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s

    return parse


def _epsilon(s):
    if s.lower() == "median":
        return None
    v = _float(s)
    if v <= 0:
        raise ValueError("must be positive (or 'median')")
    return v


def _positive_float(s):
    v = _float(s)
    if v <= 0:
        raise ValueError("must be positive")
    return v


def _covariate(s):
    if s in ("identity", "torus_embedding"):
        return s
    if s.startswith("projection:") and s[len("projection:"):].isdigit():
        return s
    raise ValueError("expected identity, torus_embedding or projection:<index>")


# config key -> (attribute, parser)
KEYS = {
    "system.model": ("model", _choice("lorenz63", "torus_rotation")),
    "system.parameters": ("parameters", _floats),
    "system.dt": ("dt", _positive_float),
    "system.n_samples": ("n_samples", _int),
    "system.spinup_steps": ("spinup_steps", _int),
    "system.initial_state": ("initial_state", _floats),
    "system.substeps": ("substeps", _int),
    "system.covariate": ("covariate", _covariate),
    "system.response_index": ("response_index", _int),
    "kernel.family": ("family", _choice("gaussian", "covariance")),
    "kernel.epsilon": ("epsilon", _epsilon),
    "kernel.epsilon_scale": ("epsilon_scale", _positive_float),
    "kernel.normalization": ("normalization", _choice("none", "symmetric", "markov")),
    "kernel.alpha": ("alpha", _float),
    "kernel.delay_q": ("delay_Q", _int),
    "basis.size": ("basis_size", _int),
    "forecast.leads": ("leads", _ints),
    "forecast.test_fraction": ("test_fraction", _float),
    "forecast.k_neighbors": ("k_neighbors", _int),
    "patterns.q": ("pattern_q", _int),
    "patterns.n_series": ("pattern_series", _int),
    "patterns.null_vectors": ("null_vectors", _int),
    "autocorr.q_max": ("autocorr_q_max", _int),
    "autocorr.observable": ("autocorr_observable", _choice("response", "exp_first_angle")),
    "autocorr.center": ("autocorr_center", _bool),
    "pod.size": ("pod_size", _int),
    "output.dir": ("output_dir", str),
    "run.seed": ("seed", _int),
}


def parse_config_text(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigValueError(line, lineno, "expected 'section.key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigValueError(key, lineno, "unknown key")
        attr, parser = KEYS[key]
        try:
            setattr(cfg, attr, parser(value))
        except ValueError as exc:
            raise ConfigValueError(key, lineno, f"invalid value {value!r}: {exc}") from None
        cfg.lines[key] = lineno
    return cfg


def parse_config(path) -> ExperimentConfig:
    """Read a config file; raises ConfigurationError on any problem."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config_text(text)
