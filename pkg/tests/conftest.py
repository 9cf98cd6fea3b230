import numpy as np
import pytest

from anls import GridSpec, ProblemParams, SolverConfig, petviashvili_solve

# periodic problem on a small box; the tails are not resolved, the discrete
# equation is still solved exactly
TINY_CFG = SolverConfig(auto_grow=False, x_tail_tol=1.0, tail_tol=1.0, tol=1e-11)
TINY_GRID = GridSpec(32, 64, 16.0, 32.0)


@pytest.fixture(scope="session")
def gs_05_3():
    """(s, p, omega) = (0.5, 3, 1) on a desk-scale box."""
    return petviashvili_solve(ProblemParams(0.5, 3.0, 1.0), GridSpec(256, 512, 48.0, 128.0))


@pytest.fixture(scope="session")
def tiny_3():
    return petviashvili_solve(ProblemParams(0.5, 3.0, 1.0), TINY_GRID, cfg=TINY_CFG)


@pytest.fixture(scope="session")
def tiny_4():
    return petviashvili_solve(ProblemParams(0.5, 4.0, 1.0), TINY_GRID, cfg=TINY_CFG)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def smooth_field(grid, rng, width=0.15, positive=False):
    """Random band-limited field (Gaussian spectrum)."""
    c = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    kx = np.fft.fftfreq(grid.nx)[:, None]
    ky = np.fft.fftfreq(grid.ny)[None, :]
    c *= np.exp(-(kx**2 + ky**2) / (2 * width**2))
    v = np.fft.ifft2(c).real
    v /= np.abs(v).max()
    if positive:
        X, Y = grid.mesh()
        env = np.exp(-(X / (0.2 * grid.lx)) ** 2 - (Y / (0.2 * grid.ly)) ** 2)
        v = (np.abs(v) + 0.1) * env
    return v
