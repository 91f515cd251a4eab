"""Thin-rectangle grid geometry, last-passage dynamic programming, geodesics.

Grids have n columns and floor(n**alpha) rows.  Vertices are addressed
1-based as (x, y) with x the column and y the row; directed paths go from
(1, 1) to (n, rows) by unit steps right (e1) or up (e2).  All passage-time
arithmetic runs on integer-scaled weights, so optimality comparisons are
exact and geodesic identification is never corrupted by float ties.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
import numpy as np

from . import _kernels
from ._kernels import NEG
from .weights import WeightModel

__all__ = [
    "GridShape",
    "WeightGrid",
    "PassageResult",
    "GeodesicSet",
    "floor_power",
    "sample_grid",
    "last_passage",
    "enumerate_paths_lpp",
    "enumerate_geodesics",
    "hi_mode_max",
    "geodesics",
    "cylinder_mask",
    "cylinder_last_passage",
    "apply_flip",
    "format_grid",
    "path_count",
]


def floor_power(n: int, alpha: float) -> int:
    """floor(n**alpha) with a 1e-9 nudge so exact powers don't floor down.

    Plain ``math.floor(8 ** (1/3))`` style calls can land at 7 when the float
    power comes out a hair under the integer; the nudge absorbs that.
    """
    return int(math.floor(n**alpha + 1e-9))


def path_count(n: int, rows: int) -> int:
    """Number of up-right paths from (1, 1) to (n, rows)."""
    return math.comb(n + rows - 2, rows - 1)


@dataclass(frozen=True)
class GridShape:
    """n columns by floor(n**alpha) rows."""

    n: int
    alpha: float
    rows: int = field(init=False)

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "rows", floor_power(self.n, self.alpha))

    @classmethod
    def from_rows(cls, n: int, rows: int) -> "GridShape":
        """Shape with an explicit row count (e.g. rows = floor(n * aspect))."""
        if rows < 1 or rows > n:
            raise ValueError(f"rows must be in [1, n], got rows={rows}, n={n}")
        alpha = 1.0 if n == 1 else math.log(rows) / math.log(n)
        shape = cls(n, min(alpha, 1.0) if alpha > 0 else 1e-9)
        if shape.rows != rows:  # defensive; the log/exp round trip is well inside the nudge
            raise RuntimeError(f"failed to realize rows={rows} for n={n}")
        return shape

    @property
    def sites(self) -> int:
        return self.n * self.rows

    @property
    def path_length(self) -> int:
        """Every directed path covers exactly this many vertices."""
        return self.n + self.rows - 1


@dataclass(frozen=True, eq=False)
class WeightGrid:
    """Realized weights (integer-scaled) and hi-mode flags on a grid."""

    shape: GridShape
    weights: np.ndarray  # int64, (rows, n); row index 0 is grid row 1
    hi: np.ndarray  # bool, (rows, n); True iff weight > m
    scale: int
    threshold_int: int

    @property
    def values(self) -> np.ndarray:
        """Weights in model units (float view of the exact integer grid)."""
        return self.weights / self.scale

    def value_at(self, vertex: tuple[int, int]) -> float:
        x, y = self._index(vertex)
        return self.weights[y, x] / self.scale

    def _index(self, vertex: tuple[int, int]) -> tuple[int, int]:
        x, y = vertex
        if not (1 <= x <= self.shape.n and 1 <= y <= self.shape.rows):
            raise ValueError(f"vertex {vertex} outside {self.shape.n}x{self.shape.rows} grid")
        return x - 1, y - 1

    def with_value(self, vertex: tuple[int, int], new_value: float) -> "WeightGrid":
        """Copy of this grid with one site replaced (model units)."""
        x, y = self._index(vertex)
        new_int = _to_scaled_int(new_value, self.scale)
        w = self.weights.copy()
        h = self.hi.copy()
        w[y, x] = new_int
        h[y, x] = new_int > self.threshold_int
        return WeightGrid(self.shape, w, h, self.scale, self.threshold_int)


def _to_scaled_int(value: float, scale: int) -> int:
    scaled = value * scale
    snapped = round(scaled)
    if abs(scaled - snapped) > 1e-6:
        raise ValueError(f"value {value} is not representable on the 1/{scale} grid")
    return int(snapped)


def sample_grid(shape: GridShape, model: WeightModel, rng: np.random.Generator) -> WeightGrid:
    """Draw i.i.d. weights in raster order (row 1 first, then left to right).

    The grid is a pure function of the generator state, so replaying the same
    stream reproduces the same grid bit for bit.
    """
    idx = model.sample_indices(rng, size=(shape.rows, shape.n))
    weights = model.values_int[idx]
    hi = model.hi_mask[idx]
    if int(model.C_int) * shape.path_length >= 2**62:
        raise ValueError("integer-scaled path sums would overflow int64 on this grid")
    return WeightGrid(shape, weights, hi, model.scale, model.threshold_int)


class PassageResult:
    """Last-passage value plus forward/backward best-sum tables.

    G_fwd(v) is the best sum over directed paths (1,1) -> v; G_bwd(v) the best
    over v -> (n, rows).  A vertex lies on some geodesic exactly when
    G_fwd(v) + G_bwd(v) - w(v) equals the passage time, an exact integer test.
    """

    def __init__(self, grid: WeightGrid, G_fwd: np.ndarray):
        self.grid = grid
        self.G_fwd = G_fwd

    @property
    def value_int(self) -> int:
        return int(self.G_fwd[-1, -1])

    @property
    def value(self) -> float:
        return self.value_int / self.grid.scale

    @cached_property
    def G_bwd(self) -> np.ndarray:
        rev = np.ascontiguousarray(self.grid.weights[::-1, ::-1])
        return _kernels.dp_forward(rev)[::-1, ::-1]

    def on_some_geodesic(self) -> np.ndarray:
        """Boolean mask of vertices that lie on at least one geodesic."""
        return (self.G_fwd + self.G_bwd - self.grid.weights) == self.value_int


def last_passage(grid: WeightGrid) -> PassageResult:
    """Exact last-passage time by dynamic programming.

    G_fwd(v) = w(v) + max(G_fwd(v - e1), G_fwd(v - e2)), missing neighbors
    treated as -inf except at the origin.
    """
    return PassageResult(grid, _kernels.dp_forward(grid.weights))


def hi_mode_max(grid: WeightGrid) -> int:
    """Maximum number of hi-mode sites over all directed paths.

    This is the passage time of the same grid with 0/1 indicator weights.
    """
    return int(_kernels.dp_forward(grid.hi.astype(np.int64))[-1, -1])


# -- exhaustive oracles ------------------------------------------------------


def _check_cap(shape: GridShape, cap: int) -> int:
    count = path_count(shape.n, shape.rows)
    if count > cap:
        raise ValueError(f"{count} paths exceeds the enumeration cap {cap}")
    return count


def enumerate_paths_lpp(grid: WeightGrid, cap: int = 10**6) -> float:
    """Last-passage time by brute-force enumeration of every directed path.

    Independent of the DP (depth-first walk over raw weights); intended as a
    verification oracle on small grids.
    """
    expected = _check_cap(grid.shape, cap)
    w = grid.weights
    rows, n = w.shape
    best = None
    leaves = 0
    stack = [(0, 0, int(w[0, 0]))]
    while stack:
        x, y, s = stack.pop()
        if x == n - 1 and y == rows - 1:
            leaves += 1
            if best is None or s > best:
                best = s
            continue
        if x + 1 < n:
            stack.append((x + 1, y, s + int(w[y, x + 1])))
        if y + 1 < rows:
            stack.append((x, y + 1, s + int(w[y + 1, x])))
    if leaves != expected:
        raise RuntimeError(f"visited {leaves} paths, expected {expected}")
    return best / grid.scale


def enumerate_geodesics(grid: WeightGrid, cap: int = 10**5) -> list[tuple[tuple[int, int], ...]]:
    """All maximizing paths, as 1-based vertex tuples (enumeration oracle)."""
    _check_cap(grid.shape, cap)
    w = grid.weights
    rows, n = w.shape
    best = None
    winners: list[tuple[tuple[int, int], ...]] = []
    stack = [(0, 0, int(w[0, 0]), ((1, 1),))]
    while stack:
        x, y, s, path = stack.pop()
        if x == n - 1 and y == rows - 1:
            if best is None or s > best:
                best, winners = s, [path]
            elif s == best:
                winners.append(path)
            continue
        if x + 1 < n:
            stack.append((x + 1, y, s + int(w[y, x + 1]), path + ((x + 2, y + 1),)))
        if y + 1 < rows:
            stack.append((x, y + 1, s + int(w[y + 1, x]), path + ((x + 1, y + 2),)))
    return winners


# -- geodesic structure --------------------------------------------------------


@dataclass(frozen=True)
class GeodesicSet:
    """One canonical geodesic plus the intersection of all geodesics.

    ``intersection`` holds the vertices common to every geodesic: a marked
    vertex belongs to it exactly when it is the only geodesic vertex on its
    anti-diagonal x + y = const, since every directed path crosses each
    anti-diagonal exactly once.
    """

    canonical: tuple[tuple[int, int], ...]
    intersection: tuple[tuple[int, int], ...]
    diagonal_counts: np.ndarray  # geodesic-vertex count per anti-diagonal


def geodesics(grid: WeightGrid, result: PassageResult, tie_break: str = "right") -> GeodesicSet:
    """Trace a canonical geodesic and compute the all-geodesic intersection.

    tie_break picks the incoming step during the backward trace when both
    predecessors are optimal: "right" prefers e1, "up" prefers e2.
    """
    if tie_break not in ("right", "up"):
        raise ValueError(f"tie_break must be 'right' or 'up', got {tie_break!r}")
    w = grid.weights
    rows, n = w.shape
    G = result.G_fwd
    L = result.value_int

    path = [(n, rows)]
    x, y = n - 1, rows - 1
    while (x, y) != (0, 0):
        target = G[y, x] - w[y, x]
        via_right = x > 0 and G[y, x - 1] == target
        via_up = y > 0 and G[y - 1, x] == target
        if via_right and (tie_break == "right" or not via_up):
            x -= 1
        else:
            y -= 1
        path.append((x + 1, y + 1))
    path.reverse()

    marked = (G + result.G_bwd - w) == L
    counts = np.zeros(n + rows - 1, dtype=np.int64)
    ys, xs = np.nonzero(marked)
    np.add.at(counts, xs + ys, 1)
    inter = [
        (int(x) + 1, int(y) + 1)
        for y, x in zip(ys, xs)
        if counts[x + y] == 1
    ]
    inter.sort(key=lambda v: v[0] + v[1])
    return GeodesicSet(tuple(path), tuple(inter), counts)


# -- cylinder restriction ------------------------------------------------------


def cylinder_mask(shape: GridShape, width: int) -> np.ndarray:
    """Admissible vertices within vertical distance ``width`` of the diagonal.

    The reference line runs from (1, 1) to (n, rows); membership is decided
    with integer cross-multiplication, so boundary ties are exact.
    """
    if width < 1:
        raise ValueError(f"width must be >= 1, got {width}")
    n, rows = shape.n, shape.rows
    if n == 1:
        return np.ones((rows, n), dtype=np.bool_)
    x = np.arange(n, dtype=np.int64)[None, :]
    y = np.arange(rows, dtype=np.int64)[:, None]
    # |(y+1) - (1 + x*(rows-1)/(n-1))| <= width, scaled by (n-1)
    lhs = np.abs(y * (n - 1) - x * (rows - 1))
    return lhs <= width * (n - 1)


def cylinder_last_passage(grid: WeightGrid, width: int) -> float:
    """Last-passage time restricted to the diagonal cylinder of given width."""
    adm = cylinder_mask(grid.shape, width)
    G = _kernels.dp_forward_masked(grid.weights, adm)
    sink = int(G[-1, -1])
    if sink < int(NEG) // 2:
        raise RuntimeError("cylinder admits no directed path; widths >= 1 should prevent this")
    return sink / grid.scale


# -- incremental updates -------------------------------------------------------


def apply_flip(
    grid: WeightGrid,
    result: PassageResult,
    vertex: tuple[int, int],
    new_value: float,
) -> PassageResult:
    """Raise one site's weight and repair the forward table incrementally.

    Only the up-right cone of the flipped vertex is revisited, and propagation
    stops where values stabilize; the returned result (including its updated
    grid) matches a full recomputation exactly.  Decreasing updates are
    rejected: the flipping scheme only moves weights upward.
    """
    x, y = grid._index(vertex)
    new_int = _to_scaled_int(new_value, grid.scale)
    if new_int < grid.weights[y, x]:
        raise ValueError(
            f"flip at {vertex} decreases the weight "
            f"({grid.weights[y, x] / grid.scale} -> {new_value}); flips are lo -> hi"
        )
    w = grid.weights.copy()
    G = result.G_fwd.copy()
    _kernels.flip_update(w, G, y, x, np.int64(new_int))
    hi = grid.hi.copy()
    hi[y, x] = new_int > grid.threshold_int
    return PassageResult(WeightGrid(grid.shape, w, hi, grid.scale, grid.threshold_int), G)


# -- debug dump ----------------------------------------------------------------


def format_grid(grid: WeightGrid) -> str:
    """Plain-text matrix, row 1 first, space-separated integer-scaled weights."""
    lines = [" ".join(str(int(v)) for v in row) for row in grid.weights]
    return "\n".join(lines) + "\n"
