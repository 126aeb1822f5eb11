"""End-to-end acceptance checks, one test per criterion.

Thresholds marked "measured" were fixed by the oracle runs in ``scripts/``.
"""

import time
import warnings

import numpy as np
import pytest

from koopkernel.cli import main, run
from koopkernel.config import parse_config_text
from koopkernel.dynamics import SystemSpec, TrajectoryDataset, delay_embed, simulate
from koopkernel.errors import RankDeficiencyWarning
from koopkernel.forecast import density_coefficients, df_forecast, kaf_fit, kaf_predict_batch, response_coefficients
from koopkernel.generator import approx_eigen_residual, generator_model
from koopkernel.kernels import KernelSpec, build_kernel, median_bandwidth, out_of_sample_row, pairwise_sqdist
from koopkernel.spectral import autocorrelation, eigenbasis, shift_matrix, time_averaged_correlation

NU = (1.0, np.sqrt(2.0))


@pytest.fixture(scope="module")
def l63_2000():
    return simulate(SystemSpec(n_samples=2000))


@pytest.fixture(scope="module")
def l63_markov(l63_2000):
    kernel = build_kernel(KernelSpec(normalization="markov"), l63_2000.covariates)
    return eigenbasis(kernel, 100)


# ---------------------------------------------------------------- spectral structure


def test_criterion_01_markov_normalization(l63_markov, report):
    b = l63_markov
    rows = np.max(np.abs(b.kernel.values.sum(axis=1) - 1.0))
    lam0 = abs(b.eigenvalues[0] - 1.0)
    phi0 = np.max(np.abs(b.phi[:, 0] / b.phi[:, 0].mean() - 1.0))
    ok = rows <= 1e-12 and lam0 <= 1e-10 and phi0 <= 1e-8
    report(1, ok, f"row-sum err {rows:.1e}, |lambda0-1| {lam0:.1e}, phi0 rel dev {phi0:.1e}")


def test_criterion_02_biorthogonality(l63_markov, report):
    b = l63_markov
    err = np.max(np.abs(b.phi_dual.T @ b.phi / b.N - np.eye(b.L)))
    report(2, err <= 1e-8, f"max |<dual_i, phi_j> - delta_ij| = {err:.1e} (L={b.L})")


def test_criterion_03_oracle_equivalence(report):
    ds = simulate(SystemSpec(n_samples=200, spinup_steps=500))
    x, y = ds.covariates, ds.responses[:, 0]
    mb = eigenbasis(build_kernel(KernelSpec(normalization="markov"), x), 6)
    sb = eigenbasis(build_kernel(KernelSpec(normalization="symmetric"), x), 6)
    n, L, q = 200, 6, 3

    u_loop = np.zeros((L, L))
    for i in range(L):
        for j in range(L):
            u_loop[i, j] = sum(mb.phi_dual[t, i] * mb.phi[t + q, j] for t in range(n - q)) / (n - q)
    err_u = np.max(np.abs(shift_matrix(mb, q).entries - u_loop))

    c_loop = np.zeros((q + 1, L))
    for s in range(q + 1):
        for j in range(L):
            c_loop[s, j] = sum(sb.phi[t, j] * y[t + s] for t in range(n - s)) / (n - s)
    err_c = np.max(np.abs(kaf_fit(sb, y, q).coeffs - c_loop))

    rho = out_of_sample_row(mb.kernel, x[17] + 0.05)
    rc = [sum(mb.phi[t, i] * rho[t] for t in range(n)) / n for i in range(L)]
    yc = [sum(mb.phi_dual[t, j] * y[t] for t in range(n)) / n for j in range(L)]
    df_loop = sum(rc[i] * u_loop[i, j] * yc[j] for i in range(L) for j in range(L))
    df = df_forecast(mb, density_coefficients(mb, rho), response_coefficients(mb, y), q)
    err_df = abs(df - df_loop)
    ok = max(err_u, err_c, err_df) <= 1e-12
    report(3, ok, f"shift {err_u:.1e}, kaf coeffs {err_c:.1e}, df {err_df:.1e} vs loops (N=200)")


def test_criterion_04_shift_identity(l63_markov, report):
    b = l63_markov
    err0 = np.max(np.abs(shift_matrix(b, 0).entries - np.eye(b.L)))
    e0 = np.zeros(b.L)
    e0[0] = 1.0
    worst = 0.0
    for q in range(1, 51):
        drift = np.linalg.norm(shift_matrix(b, q).entries @ e0 - e0)
        worst = max(worst, drift / (5 * q / b.N))
    ok = err0 <= 1e-12 and worst <= 1.0
    report(4, ok, f"|U(0)-I| {err0:.1e}, worst drift / (5q/N) = {worst:.3f} over q<=50")


# ---------------------------------------------------------------- generator


def test_criterion_05_generator_structure(l63_2000, report):
    kernel = build_kernel(KernelSpec(normalization="symmetric"), l63_2000.covariates)
    model = generator_model(eigenbasis(kernel, 100), l63_2000.dt)
    skew_raw = np.array_equal(model.V_raw, -model.V_raw.T)
    skew_c = np.array_equal(model.V_compact, -model.V_compact.T)
    re = np.max(np.abs(np.linalg.eigvals(model.V_compact).real))
    ok = skew_raw and skew_c and re <= 1e-10
    report(5, ok, f"V_raw skew {skew_raw}, V_compact skew {skew_c}, max |Re eig| {re:.1e}")


def _torus_model(dt, n, eps=0.05, L=15):
    ds = simulate(SystemSpec(model_id="torus_rotation", dt=dt, n_samples=n, spinup_steps=0, initial_state=(0.3, 0.9)))
    kernel = build_kernel(KernelSpec(epsilon=eps, normalization="symmetric"), ds.covariates)
    return generator_model(eigenbasis(kernel, L), dt)


def test_criterion_06_torus_frequencies(report):
    start = time.perf_counter()
    model = _torus_model(0.05, 8000)
    elapsed = time.perf_counter() - start
    combos = np.array([j * NU[0] + k * NU[1] for j in range(-2, 3) for k in range(-2, 3)])
    combos = combos[np.abs(combos) > 1e-12]
    picks = model.by_dirichlet(nonzero_only=True)[:4]
    alphas = model.eigenfrequencies[picks]
    rel = [np.min(np.abs(a - combos) / np.abs(combos)) for a in alphas]
    ok = max(rel) <= 0.05 and elapsed < 180
    report(6, ok, f"alphas {np.round(alphas, 4).tolist()}, worst rel err {max(rel):.4f}, {elapsed:.1f}s")


def _frequency_errors(model):
    idx = model.by_dirichlet(nonzero_only=True)
    f = np.abs(model.frequencies[idx])
    return np.array([np.min(np.abs(f - nu)) for nu in NU])


def test_criterion_07_second_order_convergence(report):
    # same continuous trajectory, T = 200
    coarse = _frequency_errors(_torus_model(0.05, 4000))
    fine = _frequency_errors(_torus_model(0.025, 8000))
    ratio = coarse / fine
    ok = bool(np.all((ratio >= 2.5) & (ratio <= 6.0)))
    report(7, ok, f"errors dt=0.05 {coarse}, dt=0.025 {fine}, ratios {np.round(ratio, 2).tolist()}")


# ---------------------------------------------------------------- forecasting

LEAD_TIMES = np.array([0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 8.0, 10.0])
N_TRAIN, N_TEST = 4000, 800


@pytest.fixture(scope="module")
def l63_forecast_data():
    return simulate(SystemSpec(n_samples=N_TRAIN + N_TEST))


def _kaf_skill(ds, covariate_cols, eps_scale, L):
    dt = ds.dt
    leads = np.rint(LEAD_TIMES / dt).astype(int)
    x = ds.states[:, covariate_cols]
    y = ds.responses[:, 0]
    x_train, y_train = x[:N_TRAIN], y[:N_TRAIN]
    eps = eps_scale * median_bandwidth(pairwise_sqdist(x_train))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankDeficiencyWarning)
        basis = eigenbasis(build_kernel(KernelSpec(epsilon=eps, normalization="symmetric"), x_train), L)
    model = kaf_fit(basis, y_train, leads.max())
    starts = np.arange(N_TRAIN, ds.n_samples - leads.max())
    rmse, sigma = [], []
    for q in leads:
        pred, sig, _ = kaf_predict_batch(model, x[starts], q)
        rmse.append(np.sqrt(np.mean((pred - y[starts + q]) ** 2)))
        sigma.append(sig.mean())
    return np.array(rmse), np.array(sigma), y_train.std(), basis.L


@pytest.fixture(scope="module")
def full_skill(l63_forecast_data):
    start = time.perf_counter()
    out = _kaf_skill(l63_forecast_data, [0, 1, 2], 0.01, 400)
    return out + (time.perf_counter() - start,)


def test_criterion_08_kaf_skill(full_skill, report):
    rmse, sigma, std, L, elapsed = full_skill
    r = rmse / std
    lead0 = r[0] <= 0.05
    half = r[1] <= 0.6
    late = bool(np.all(np.abs(r[LEAD_TIMES >= 8] - 1.0) <= 0.25))
    window = (LEAD_TIMES >= 0.5) & (LEAD_TIMES <= 5)
    agree = sigma[window].mean() / rmse[window].mean()
    ok = lead0 and half and late and 0.5 <= agree <= 2.0 and elapsed < 300
    report(
        8,
        ok,
        f"rmse/std {np.round(r, 3).tolist()}, sigma/rmse on [0.5,5] {agree:.3f}, L={L}, {elapsed:.1f}s",
    )


def test_criterion_09_partial_observations(l63_forecast_data, full_skill, report):
    partial, _, std, L = _kaf_skill(l63_forecast_data, [0], 1.0, 400)
    k = int(np.flatnonzero(LEAD_TIMES == 1.0)[0])
    full = full_skill[0][k]
    ok = partial[k] > full
    report(9, ok, f"lead-1 rmse/std partial {partial[k] / std:.3f} (L={L}) vs full {full / std:.3f}")


# ---------------------------------------------------------------- diagnostics


def test_criterion_10_mixing_vs_quasiperiodic(report):
    torus = simulate(SystemSpec(model_id="torus_rotation", n_samples=2000, spinup_steps=0))
    q_max = int(round(20 / torus.dt))
    c_torus = np.abs(autocorrelation(np.exp(1j * torus.states[:, 0]), q_max))
    l63 = simulate(SystemSpec(n_samples=20000))
    lag = int(round(10 / l63.dt))
    tavg = time_averaged_correlation(autocorrelation(l63.states[:, 0], lag, center=True))
    ok = c_torus.min() >= 0.95 and tavg[lag] < 0.2
    report(10, ok, f"torus min |C| {c_torus.min():.6f}; L63 time-avg |C| at t=10: {tavg[lag]:.4f}")


def test_criterion_11_approximate_eigenfunction(l63_2000, report):
    Q = 30
    emb = delay_embed(l63_2000.covariates, Q)
    basis = eigenbasis(build_kernel(KernelSpec(delay_Q=Q, normalization="symmetric"), emb), 50)
    model = generator_model(basis, l63_2000.dt)
    j = model.by_dirichlet(nonzero_only=True)[0]
    z, freq = model.eigvec_coeffs[:, j], model.frequencies[j]
    rng = np.random.default_rng(0)
    null = rng.standard_normal((100, model.L)) + 1j * rng.standard_normal((100, model.L))
    null /= np.linalg.norm(null, axis=1, keepdims=True)
    null_freq = np.imag(np.einsum("ni,ij,nj->n", null.conj(), model.V_raw, null))
    worst = 0.0
    for q in range(1, int(round(1 / l63_2000.dt)) + 1):
        shift = shift_matrix(basis, q, l63_2000.dt)
        mode = approx_eigen_residual(shift, z, freq)
        med = np.median([approx_eigen_residual(shift, w, f) for w, f in zip(null, null_freq)])
        worst = max(worst, mode / med)
    report(11, worst < 1.0, f"mode freq {freq:.3f}, worst residual ratio mode/null-median {worst:.3f} over q*dt<=1")


def test_criterion_12_determinism_and_leakage(tmp_path, report):
    text = "system.n_samples = 600\nsystem.spinup_steps = 500\nbasis.size = 40\nforecast.leads = 0, 10, 40\n"
    cfg_path = tmp_path / "c.cfg"
    cfg_path.write_text(text)
    identical = True
    for mode in ("eigen", "kaf", "patterns"):
        for d in ("a", "b"):
            assert main([mode, "--config", str(cfg_path), "--out", str(tmp_path / mode / d), "--seed", "3"]) == 0
        for f in (tmp_path / mode / "a").iterdir():
            identical &= f.read_bytes() == (tmp_path / mode / "b" / f.name).read_bytes()

    cfg = parse_config_text(text)
    cfg.mode = "kaf"
    ds = simulate(cfg.system_spec())
    resp = ds.responses.copy()
    resp[ds.n_samples - cfg.n_test :] *= -3.0
    canary = TrajectoryDataset(ds.dt, ds.states, ds.covariates, resp, ds.covariate_map_id)
    cfg.output_dir = str(tmp_path / "clean")
    run(cfg, ds)
    cfg.output_dir = str(tmp_path / "canary")
    run(cfg, canary)
    unchanged = all(
        (tmp_path / "clean" / n).read_bytes() == (tmp_path / "canary" / n).read_bytes()
        for n in ("eigenvalues.csv", "kaf_coefficients.csv")
    )
    report(12, identical and unchanged, f"byte-identical reruns {identical}, model artifacts unchanged by canary {unchanged}")
