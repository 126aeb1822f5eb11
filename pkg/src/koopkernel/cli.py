"""Command-line experiment driver.

Usage::

    koopkernel <mode> --config <path> [--out <dir>] [--seed <n>]

Each mode runs simulate -> kernel -> eigenbasis -> workflow and writes CSV
tables plus ``manifest.csv`` to the output directory. Exit codes: 0 success,
1 configuration error, 2 numerical failure (the failing stage is reported).
"""

from __future__ import annotations

import argparse
import sys
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import MODES, ExperimentConfig, parse_config
from .dynamics import TrajectoryDataset, delay_embed, simulate
from .errors import ConfigurationError, NumericalError
from .forecast import (
    analog_ensemble,
    density_coefficients,
    kaf_fit,
    kaf_predict_batch,
    response_coefficients,
)
from .generator import approx_eigen_residual, eigenfunction_timeseries, generator_model
from .kernels import build_kernel, median_bandwidth, out_of_sample_rows, pairwise_sqdist
from .spectral import autocorrelation, eigenbasis, pod, shift_matrix, time_averaged_correlation


class StageError(Exception):
    """Numerical failure tagged with the pipeline stage it happened in."""

    def __init__(self, stage, cause):
        self.stage, self.cause = stage, cause
        super().__init__(f"{stage}: {cause}")


@contextmanager
def stage(name):
    try:
        yield
    except ConfigurationError:
        raise
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        raise StageError(name, exc) from exc


@dataclass
class ResultTable:
    """Named columns of equal length, written as CSV with a header row."""

    columns: list
    data: list

    def __post_init__(self):
        self.data = [np.asarray(c).ravel() for c in self.data]
        if len(self.columns) != len(self.data):
            raise ValueError("column names and data disagree")
        lengths = {c.size for c in self.data}
        if len(lengths) > 1:
            raise ValueError(f"ragged table: column lengths {sorted(lengths)}")

    @property
    def n_rows(self) -> int:
        return self.data[0].size if self.data else 0

    def write(self, path) -> Path:
        cols = [[_cell(v) for v in c.tolist()] for c in self.data]
        lines = [",".join(self.columns)]
        lines += [",".join(row) for row in zip(*cols)]
        path = Path(path)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        return path


def _cell(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


# ---------------------------------------------------------------- pipeline pieces


def _fit_basis(cfg: ExperimentConfig, covariates, normalization, extras):
    emb = delay_embed(covariates, cfg.delay_Q)
    with stage("kernel"):
        eps = cfg.epsilon
        if eps is None:
            eps = median_bandwidth(pairwise_sqdist(emb)) * cfg.epsilon_scale
        spec = replace(cfg.kernel_spec(normalization), epsilon=eps)
        kernel = build_kernel(spec, emb)
    with stage("eigenbasis"):
        basis = eigenbasis(kernel, min(cfg.basis_size, kernel.n))
    extras.update(
        epsilon_resolved=eps,
        normalization_used=kernel.normalization,
        basis_size_used=basis.L,
    )
    return basis, emb


def _split(cfg: ExperimentConfig, ds: TrajectoryDataset):
    n = ds.n_samples
    n_test = cfg.n_test
    n_train = n - n_test
    max_lead = max(cfg.leads)
    starts = np.arange(n_train, n - max_lead)
    if starts.size == 0:
        raise ConfigurationError(f"forecast.leads: no test point has a verifying sample at lead {max_lead}")
    return n_train, starts


def _test_rows(cfg, covariates, starts):
    full = delay_embed(covariates, cfg.delay_Q).rows
    return full[starts - (cfg.delay_Q - 1)]


def _forecast_tables(cfg, ds, starts, preds, sigmas, fallback, clim_mean):
    y = ds.responses[:, 0]
    leads = np.asarray(cfg.leads)
    truth = y[starts[:, None] + leads[None, :]]
    rmse = np.sqrt(np.mean((preds - truth) ** 2, axis=0))
    clim = np.sqrt(np.mean((clim_mean - truth) ** 2, axis=0))
    mean_sigma = sigmas.mean(axis=0)
    forecast = ResultTable(
        ["lead", "lead_time", "rmse", "mean_sigma", "climatology"],
        [leads, leads * ds.dt, rmse, mean_sigma, clim],
    )
    m, k = preds.shape
    traj = ResultTable(
        ["test_index", "lead", "lead_time", "prediction", "sigma", "truth", "fallback"],
        [
            np.repeat(starts, k),
            np.tile(leads, m),
            np.tile(leads * ds.dt, m),
            preds,
            sigmas,
            truth,
            np.repeat(fallback, k).astype(int),
        ],
    )
    return {"forecast.csv": forecast, "trajectories.csv": traj}


def _eigenvalue_table(basis):
    return ResultTable(["j", "lambda"], [np.arange(basis.L), basis.eigenvalues])


# ---------------------------------------------------------------- modes


def _mode_eigen(cfg, ds, extras):
    basis, emb = _fit_basis(cfg, ds.covariates, None, extras)
    n_idx = np.arange(basis.N) + emb.base_index_offset
    eig = ResultTable(
        ["n", "t"] + [f"phi_{j}" for j in range(basis.L)],
        [n_idx, n_idx * ds.dt] + [basis.phi[:, j] for j in range(basis.L)],
    )
    return {"eigenvalues.csv": _eigenvalue_table(basis), "eigenfunctions.csv": eig}


def _mode_df(cfg, ds, extras):
    n_train, starts = _split(cfg, ds)
    extras.update(n_train=n_train, n_test_points=starts.size)
    cov, y = ds.covariates, ds.responses[:, 0]
    basis, emb = _fit_basis(cfg, cov[:n_train], None, extras)
    y_train = y[emb.base_index_offset : n_train]
    with stage("forecast"):
        rows, _, fallback = out_of_sample_rows(basis.kernel, _test_rows(cfg, cov, starts))
        rho = density_coefficients(basis, rows.T)
        yc = response_coefficients(basis, y_train)
        y2c = response_coefficients(basis, y_train**2)
        preds = np.empty((starts.size, len(cfg.leads)))
        sigmas = np.empty_like(preds)
        for k, q in enumerate(cfg.leads):
            u = shift_matrix(basis, q, ds.dt).entries
            pr = rho.T @ u
            preds[:, k] = pr @ yc
            sigmas[:, k] = np.sqrt(np.maximum(0.0, pr @ y2c - preds[:, k] ** 2))
    coeffs = ResultTable(["j", "response", "response_sq"], [np.arange(basis.L), yc, y2c])
    tables = {"eigenvalues.csv": _eigenvalue_table(basis), "df_coefficients.csv": coeffs}
    tables.update(_forecast_tables(cfg, ds, starts, preds, sigmas, fallback, y_train.mean()))
    return tables


def _mode_kaf(cfg, ds, extras):
    n_train, starts = _split(cfg, ds)
    extras.update(n_train=n_train, n_test_points=starts.size)
    cov, y = ds.covariates, ds.responses[:, 0]
    basis, emb = _fit_basis(cfg, cov[:n_train], "symmetric", extras)
    y_train = y[emb.base_index_offset : n_train]
    with stage("forecast"):
        model = kaf_fit(basis, y_train, max(cfg.leads))
        x_test = _test_rows(cfg, cov, starts)
        preds = np.empty((starts.size, len(cfg.leads)))
        sigmas = np.empty_like(preds)
        fallback = np.zeros(starts.size, dtype=bool)
        for k, q in enumerate(cfg.leads):
            preds[:, k], sigmas[:, k], fb = kaf_predict_batch(model, x_test, q)
            fallback |= fb
    leads = np.asarray(cfg.leads)
    coeffs = ResultTable(
        ["lead", "j", "c", "c_sq"],
        [
            np.repeat(leads, model.L),
            np.tile(np.arange(model.L), leads.size),
            model.coeffs[leads],
            model.coeffs_sq[leads],
        ],
    )
    tables = {"eigenvalues.csv": _eigenvalue_table(basis), "kaf_coefficients.csv": coeffs}
    tables.update(_forecast_tables(cfg, ds, starts, preds, sigmas, fallback, model.response_mean))
    return tables


def _mode_analog(cfg, ds, extras):
    n_train, starts = _split(cfg, ds)
    extras.update(n_train=n_train, n_test_points=starts.size)
    cov, y = ds.covariates, ds.responses[:, 0]
    emb = delay_embed(cov[:n_train], cfg.delay_Q)
    y_train = y[emb.base_index_offset : n_train]
    x_test = _test_rows(cfg, cov, starts)
    preds = np.empty((starts.size, len(cfg.leads)))
    sigmas = np.empty_like(preds)
    with stage("forecast"):
        for k, q in enumerate(cfg.leads):
            for i, x in enumerate(x_test):
                ens = analog_ensemble(emb.rows, y_train, x, q, cfg.k_neighbors)
                preds[i, k] = ens.mean()
                sigmas[i, k] = ens.std()
    fallback = np.zeros(starts.size, dtype=bool)
    return _forecast_tables(cfg, ds, starts, preds, sigmas, fallback, y_train.mean())


def _mode_patterns(cfg, ds, extras):
    basis, emb = _fit_basis(cfg, ds.covariates, "symmetric", extras)
    with stage("generator"):
        model = generator_model(basis, ds.dt)
        shift = shift_matrix(basis, cfg.pattern_q, ds.dt)
        order = model.by_dirichlet()
        residuals = np.array(
            [approx_eigen_residual(shift, model.eigvec_coeffs[:, j], model.frequencies[j]) for j in order]
        )
        rng = np.random.default_rng(cfg.seed)
        null = []
        for _ in range(cfg.null_vectors):
            w = rng.standard_normal(model.L) + 1j * rng.standard_normal(model.L)
            w /= np.linalg.norm(w)
            freq = float(np.imag(w.conj() @ model.V_raw @ w))
            null.append(approx_eigen_residual(shift, w, freq))
    if null:
        extras["null_median_residual"] = float(np.median(null))
    gen = ResultTable(
        ["j", "mode", "alpha", "dirichlet", "residual", "frequency"],
        [
            np.arange(order.size),
            order,
            model.eigenfrequencies[order],
            model.dirichlet_energies[order],
            residuals,
            model.frequencies[order],
        ],
    )
    picks = model.by_dirichlet(nonzero_only=True)[: cfg.pattern_series]
    n_idx = np.arange(basis.N) + emb.base_index_offset
    names, cols = ["n", "t"], [n_idx, n_idx * ds.dt]
    for rank, j in enumerate(picks):
        z = eigenfunction_timeseries(model, basis, int(j))
        names += [f"re_{rank}", f"im_{rank}"]
        cols += [z.real, z.imag]
    return {
        "eigenvalues.csv": _eigenvalue_table(basis),
        "generator.csv": gen,
        "pattern_timeseries.csv": ResultTable(names, cols),
    }


def _mode_autocorr(cfg, ds, extras):
    if cfg.autocorr_observable == "exp_first_angle":
        if ds.states.shape[1] != 2:
            raise ConfigurationError("autocorr.observable: exp_first_angle needs the torus rotation")
        series = np.exp(1j * ds.states[:, 0])
        center = bool(cfg.autocorr_center)
    else:
        series = ds.responses[:, 0]
        center = True if cfg.autocorr_center is None else cfg.autocorr_center
    extras["autocorr_center_used"] = center
    with stage("autocorrelation"):
        c = autocorrelation(series, cfg.autocorr_q_max, center=center)
    lags = np.arange(c.size)
    table = ResultTable(
        ["lag", "t", "re", "im", "abs", "time_avg_abs"],
        [lags, lags * ds.dt, c.real, c.imag, np.abs(c), time_averaged_correlation(c)],
    )
    return {"correlation.csv": table}


def _mode_pod(cfg, ds, extras):
    x = ds.covariates
    size = cfg.pod_size if cfg.pod_size is not None else min(x.shape)
    with stage("pod"):
        res = pod(x, size)
    total = float(np.sum(x * x))
    names = ["j", "singular_value", "variance_fraction"] + [f"eof_{i}" for i in range(x.shape[1])]
    cols = [np.arange(size), res.singular_values, res.singular_values**2 / total]
    cols += [res.eofs[i] for i in range(x.shape[1])]
    return {"pod.csv": ResultTable(names, cols)}


MODE_HANDLERS = {
    "eigen": _mode_eigen,
    "df": _mode_df,
    "kaf": _mode_kaf,
    "analog": _mode_analog,
    "patterns": _mode_patterns,
    "autocorr": _mode_autocorr,
    "pod": _mode_pod,
}


def run(config: ExperimentConfig, dataset: TrajectoryDataset | None = None) -> list:
    """Execute ``config.mode`` and return the written artifact paths.

    ``dataset`` replaces the simulated trajectory (used to inject perturbed
    data in leakage checks). Forecast modes train on the leading
    ``1 - test_fraction`` of the samples and evaluate on the rest.
    """
    config.validate()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if dataset is None:
        with stage("simulate"):
            dataset = simulate(config.system_spec(), config.covariate, config.response_index)
    extras = {"version": __version__, "n_samples_used": dataset.n_samples}
    tables = MODE_HANDLERS[config.mode](config, dataset, extras)
    paths = [table.write(out / name) for name, table in tables.items()]
    paths.append(_write_manifest(out / "manifest.csv", config, extras))
    return paths


def _write_manifest(path, config, extras):
    items = config.resolved_items() + [(k, _cell(v)) for k, v in extras.items()]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("key,value\n")
        for k, v in items:
            fh.write(f"{k},{v}\n")
    return Path(path)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage problems are configuration errors (exit 1), not numerical ones
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="koopkernel", description="Kernel Koopman experiments")
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", required=True, help="path to a section.key = value file")
    parser.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    parser.add_argument("--seed", type=int, default=None, help="random seed (overrides run.seed)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        cfg.mode = args.mode
        if args.out is not None:
            cfg.output_dir = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            paths = run(cfg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except StageError as exc:
        print(f"numerical failure in stage {exc.stage}: {exc.cause}", file=sys.stderr)
        return 2
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
