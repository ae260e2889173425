"""The numba kernels and their numpy fallbacks must agree exactly."""

import numpy as np
import pytest

from segqa import _kernels as K
from segqa.errors import ContractViolation

from oracles import flood_components


def _label_pair(grid, connectivity):
    nb = K._label_numba(np.ascontiguousarray(grid), connectivity == 8)
    np_ = K._label_numpy(grid, connectivity == 8)
    return nb, np_


@pytest.mark.parametrize("connectivity", [4, 8])
def test_label_paths_agree_on_random_grids(connectivity):
    rng = np.random.default_rng(11)
    for _ in range(60):
        h, w = rng.integers(1, 48, 2)
        grid = rng.random((h, w)) < rng.uniform(0.1, 0.9)
        (lab_nb, n_nb), (lab_np, n_np) = _label_pair(grid, connectivity)
        assert n_nb == n_np
        assert np.array_equal(lab_nb, lab_np)


@pytest.mark.parametrize("connectivity", [4, 8])
def test_label_matches_flood_fill_oracle(connectivity):
    rng = np.random.default_rng(5)
    for _ in range(40):
        h, w = rng.integers(1, 40, 2)
        grid = rng.random((h, w)) < 0.45
        labels, count = K.label_components(grid, connectivity)
        got = set()
        for lab in range(1, count + 1):
            ys, xs = np.nonzero(labels == lab)
            got.add(frozenset(zip(ys.tolist(), xs.tolist())))
        assert got == flood_components(grid, connectivity)


def test_label_component_order_is_first_pixel_row_major():
    grid = np.zeros((5, 7), bool)
    grid[4, 0] = True  # placed last in row-major order
    grid[0, 6] = True
    grid[2, 2:4] = True
    labels, count = K.label_components(grid, 8)
    assert count == 3
    assert labels[0, 6] == 1
    assert labels[2, 2] == 2
    assert labels[4, 0] == 3


def test_label_rejects_bad_connectivity():
    with pytest.raises(ContractViolation):
        K.label_components(np.zeros((3, 3), bool), 6)


def test_flood_paths_agree():
    rng = np.random.default_rng(23)
    for _ in range(40):
        h, w = rng.integers(2, 40, 2)
        luma = rng.integers(0, 256, (h, w)).astype(np.int16)
        y = int(rng.integers(h))
        x = int(rng.integers(w))
        tol = int(rng.integers(0, 40))
        a = K._flood_numba(luma, y, x, np.int16(tol))
        b = K._flood_numpy(luma, y, x, tol)
        assert np.array_equal(a, b)


def test_flood_seed_out_of_bounds():
    with pytest.raises(ContractViolation):
        K.flood_fill_tolerance(np.zeros((4, 4), np.int16), 4, 0, 10)


def test_shift2d():
    a = np.arange(6).reshape(2, 3)
    down = K.shift2d(a, 1, 0, -1)
    assert down[0].tolist() == [3, 4, 5]
    assert down[1].tolist() == [-1, -1, -1]
    right = K.shift2d(a, 0, -1, -1)
    assert right[0].tolist() == [-1, 0, 1]
