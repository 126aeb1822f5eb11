"""Largest state norm along a long Lorenz 63 run (oracle for the dynamics tests)."""

import argparse

import numpy as np

from koopkernel.dynamics import integrate_lorenz63


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=1_000_000)
    ap.add_argument("--dt", type=float, default=0.05)
    ap.add_argument("--substeps", type=int, default=5)
    args = ap.parse_args()
    traj = integrate_lorenz63((1.0, 1.0, 1.0), None, args.dt, args.steps, args.substeps)
    norms = np.linalg.norm(traj, axis=1)
    print(f"max norm over {args.steps} steps: {norms.max():.13g}")
    print(f"max norm after first 1000 steps: {norms[1000:].max():.13g}")


if __name__ == "__main__":
    main()
