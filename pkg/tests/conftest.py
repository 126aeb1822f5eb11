import numpy as np
import pytest

from koopkernel import KernelSpec, SystemSpec, build_kernel, eigenbasis, simulate


@pytest.fixture(scope="session")
def l63_small():
    """300 samples on the Lorenz 63 attractor."""
    return simulate(SystemSpec(n_samples=300, spinup_steps=500))


@pytest.fixture(scope="session")
def l63_200():
    return simulate(SystemSpec(n_samples=200, spinup_steps=500))


@pytest.fixture(scope="session")
def markov_basis_200(l63_200):
    k = build_kernel(KernelSpec(normalization="markov"), l63_200.covariates)
    return eigenbasis(k, 30)


@pytest.fixture(scope="session")
def symmetric_basis_200(l63_200):
    k = build_kernel(KernelSpec(normalization="symmetric"), l63_200.covariates)
    return eigenbasis(k, 30)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion, then assert it."""

    def _report(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
