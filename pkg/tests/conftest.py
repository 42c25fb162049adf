import numpy as np
import pytest

from ergocert.kernels import KernelMatrix
from ergocert.measures import DiscreteMeasure, Grid, build_grid, open_interval


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


@pytest.fixture
def rng() -> np.random.Generator:
    return make_rng(20260814)


def unit_grid(n: int) -> Grid:
    return build_grid(open_interval(0.0, 1.0), n)


def random_measure(grid: Grid, rng: np.random.Generator,
                   sparsity: float = 0.0) -> DiscreteMeasure:
    w = rng.gamma(1.0, 1.0, size=grid.n)
    if sparsity > 0.0:
        mask = rng.random(grid.n) < sparsity
        if mask.all():
            mask[rng.integers(grid.n)] = False
        w[mask] = 0.0
    return DiscreteMeasure.from_unnormalized(grid, w)


def random_kernel(grid: Grid, rng: np.random.Generator) -> KernelMatrix:
    rows = rng.gamma(1.0, 1.0, size=(grid.n, grid.n)) + 1e-9
    rows /= rows.sum(axis=1, keepdims=True)
    return KernelMatrix(grid, rows, model_tag="random")


def two_state_kernel() -> KernelMatrix:
    grid = unit_grid(2)
    return KernelMatrix(grid, np.array([[0.9, 0.1], [0.2, 0.8]]),
                        model_tag="two_state")
