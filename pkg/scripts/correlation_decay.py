"""Time-averaged autocorrelation of the centered first Lorenz 63 coordinate."""

import argparse

import numpy as np

from koopkernel import SystemSpec, simulate
from koopkernel.spectral import autocorrelation, time_averaged_correlation


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[20000, 100000])
    args = ap.parse_args()
    for n in args.n:
        ds = simulate(SystemSpec(n_samples=n))
        lag = int(round(10 / ds.dt))
        tavg = time_averaged_correlation(autocorrelation(ds.states[:, 0], lag, center=True))
        first = np.flatnonzero(tavg < 0.2)[0] * ds.dt
        print(f"N={n}: time-averaged |C| at t=10 {tavg[lag]:.4f}, first below 0.2 at t={first:.2f}")


if __name__ == "__main__":
    main()
