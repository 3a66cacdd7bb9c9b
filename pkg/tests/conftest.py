import numpy as np
import pytest

from fdfisher.grids import Field, Grid
from fdfisher.profiles import QuantumParams, fd_equilibrium


def perturbed_equilibrium(grid, epsilon, beta=1.0, seed=0, amplitude=0.3, modes=4):
    """Equilibrium times a smooth random Fourier factor in [1 - amplitude, 1 + amplitude]."""
    rng = np.random.default_rng(seed)
    mu = fd_equilibrium(QuantumParams(epsilon, beta), grid).values
    coeffs = rng.uniform(-1, 1, modes)
    coeffs /= np.abs(coeffs).sum()
    wave = np.zeros(grid.shape)
    for c in coeffs:
        k = rng.uniform(-1.2, 1.2, grid.d)
        phase = rng.uniform(0, 2 * np.pi)
        wave += c * np.cos(sum(kc * vc for kc, vc in zip(k, grid.coords)) + phase)
    values = mu * (1 + amplitude * wave)
    if epsilon > 0:
        values = np.minimum(values, 0.99 / epsilon)
    return Field(grid, values)


def smooth_bump(grid, epsilon):
    """A non-equilibrium field whose entropy variable is not a quadratic."""
    v = grid.coords
    mod = 1 + 0.3 * np.cos(v[0]) * (np.sin(v[1]) if grid.d == 2 else 1)
    return Field(grid, mod * np.exp(-0.5 * grid.speed2) / (epsilon + 1.0))


@pytest.fixture(scope="session")
def tensor96():
    return Grid("tensor-2d", 8.0, 96)


@pytest.fixture(scope="session")
def line256():
    return Grid("line-1d", 8.0, 256)


@pytest.fixture(scope="session")
def polar96():
    return Grid("polar-2d", 8.0, 96, 64)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """List of (number, verdict, text) lines shown in the terminal summary."""
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, verdict, text in sorted(lines):
        terminalreporter.write_line(f"criterion {number:>2}: {verdict}  {text}")
