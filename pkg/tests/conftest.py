"""Shared fixtures and independent brute-force oracles.

The oracles here deliberately avoid the package's DP and DFS code paths:
paths are enumerated from up-move positions with itertools, and exact laws
come from enumerating full weight configurations with their probabilities.
"""
import itertools
import math

import numpy as np
import pytest

from thinlpp import make_model


@pytest.fixture(scope="session")
def two_point():
    return make_model([[0, 0.5], [1, 0.5]], 0)


@pytest.fixture(scope="session")
def two_point_p4():
    return make_model([[0, 0.6], [1, 0.4]], 0)


@pytest.fixture(scope="session")
def three_atom():
    return make_model([[0, 0.25], [1, 0.25], [2, 0.5]], 1)


def iter_paths_by_moves(n: int, rows: int):
    """All 1-based vertex paths, from the positions of up-moves among moves."""
    moves = n + rows - 2
    for ups in itertools.combinations(range(moves), rows - 1):
        upset = frozenset(ups)
        x, y = 1, 1
        path = [(1, 1)]
        for i in range(moves):
            if i in upset:
                y += 1
            else:
                x += 1
            path.append((x, y))
        yield tuple(path)


def oracle_best_path_sum(values: np.ndarray) -> float:
    """Max path sum over values[y-1, x-1], fully independent of the package DP."""
    rows, n = values.shape
    return max(
        sum(values[y - 1, x - 1] for (x, y) in path)
        for path in iter_paths_by_moves(n, rows)
    )


def oracle_all_geodesics(values: np.ndarray) -> list[tuple[tuple[int, int], ...]]:
    rows, n = values.shape
    sums = {
        path: sum(values[y - 1, x - 1] for (x, y) in path)
        for path in iter_paths_by_moves(n, rows)
    }
    best = max(sums.values())
    return [path for path, s in sums.items() if s == best]


def oracle_exact_law(n: int, rows: int, model) -> dict[float, float]:
    """Exact distribution of the passage time by enumerating configurations."""
    vals = [float(v) for v in model.values]
    probs = [float(q) for q in model.probs]
    sites = n * rows
    law: dict[float, float] = {}
    for combo in itertools.product(range(len(vals)), repeat=sites):
        pr = math.prod(probs[c] for c in combo)
        grid = np.array([vals[c] for c in combo]).reshape(rows, n)
        L = oracle_best_path_sum(grid)
        law[L] = law.get(L, 0.0) + pr
    return law


def make_test_grid(values, threshold_int: int = 0, scale: int = 1):
    """WeightGrid straight from an integer matrix (row 1 first)."""
    from thinlpp.lattice import GridShape, WeightGrid

    w = np.asarray(values, dtype=np.int64)
    rows, n = w.shape
    shape = GridShape.from_rows(n, rows)
    return WeightGrid(shape, w, w > threshold_int, scale, threshold_int)
