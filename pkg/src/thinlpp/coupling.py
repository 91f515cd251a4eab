"""Monotone lo-to-hi flipping coupling for the passage time.

A trajectory starts from a grid whose every site is drawn from the weight law
conditioned on lo mode, then flips sites to conditionally-drawn hi values one
at a time in a uniformly random order.  After k flips the configuration is
distributed as the grid conditioned on having exactly k hi-mode sites, so
evaluating the trajectory at an independent Binomial(sites, p) index N
reproduces the unconditional law of the passage time.

Per-site lo and hi replacement values are drawn once up front rather than at
flip time; because sites are i.i.d. and the flip order is independent of the
values, the two schemes agree in law, and pre-drawing makes flips O(cone) and
replays exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .lattice import GridShape
from .weights import WeightModel

__all__ = [
    "CoupledTrajectory",
    "WindowI",
    "LipschitzReport",
    "IncrementEstimate",
    "build_trajectory",
    "evaluate_at_N",
    "check_reversed_lipschitz",
    "increment_conditional_mean",
    "export_trajectory",
    "read_trajectory_export",
]


@dataclass(frozen=True, eq=False)
class CoupledTrajectory:
    """One realized flip sequence and the passage-time path k -> L(k).

    ``flip_order`` holds row-major site ids (site = (y-1)*n + (x-1)); after k
    flips the grid carries hi values on the first k sites of the order and lo
    values elsewhere.  ``L_traj[k]`` is the passage time of that grid and
    ``M_traj[k]`` the hi-mode maximum (indicator passage time), for
    k = 0 .. sites.
    """

    shape: GridShape
    model: WeightModel
    flip_order: np.ndarray
    lo_int: np.ndarray
    hi_int: np.ndarray
    L_traj: np.ndarray
    M_traj: np.ndarray

    @property
    def lo_values(self) -> np.ndarray:
        return self.lo_int / self.model.scale

    @property
    def hi_values(self) -> np.ndarray:
        return self.hi_int / self.model.scale

    def site_vertex(self, site: int) -> tuple[int, int]:
        y, x = divmod(int(site), self.shape.n)
        return (x + 1, y + 1)

    def grid_after(self, k: int) -> np.ndarray:
        """Integer weight matrix after the first k flips."""
        sites = self.shape.sites
        if not (0 <= k <= sites):
            raise ValueError(f"k must be in [0, {sites}], got {k}")
        w = self.lo_int.copy()
        idx = self.flip_order[:k]
        w[idx] = self.hi_int[idx]
        return w.reshape(self.shape.rows, self.shape.n)


def build_trajectory(
    shape: GridShape,
    model: WeightModel,
    rng: np.random.Generator,
    mode: str = "incremental",
) -> CoupledTrajectory:
    """Sample a flip order and per-site values, then fill L(k) and M(k).

    Draw order on the stream: flip permutation, then lo values (raster order),
    then hi values.  ``mode`` selects the DP strategy: "incremental" repairs
    the forward table per flip, "full_recompute" rebuilds it (the oracle);
    both produce identical trajectories.
    """
    if mode not in ("incremental", "full_recompute"):
        raise ValueError(f"mode must be 'incremental' or 'full_recompute', got {mode!r}")
    sites = shape.sites
    order = rng.permutation(sites).astype(np.int64)
    lo_int = model.sample_conditional_int("lo", rng, sites).astype(np.int64)
    hi_int = model.sample_conditional_int("hi", rng, sites).astype(np.int64)

    fill = _kernels.trajectory_fill if mode == "incremental" else _kernels.trajectory_fill_full

    L_out = np.empty(sites + 1, dtype=np.int64)
    fill(lo_int.copy().reshape(shape.rows, shape.n), hi_int, order, L_out)

    M_out = np.empty(sites + 1, dtype=np.int64)
    fill(
        np.zeros((shape.rows, shape.n), dtype=np.int64),
        np.ones(sites, dtype=np.int64),
        order,
        M_out,
    )

    return CoupledTrajectory(
        shape=shape,
        model=model,
        flip_order=order,
        lo_int=lo_int,
        hi_int=hi_int,
        L_traj=L_out / model.scale,
        M_traj=M_out,
    )


def evaluate_at_N(trajectory: CoupledTrajectory, rng: np.random.Generator) -> tuple[int, float]:
    """Draw N ~ Binomial(sites, p) independent of the trajectory; return (N, L(N)).

    Over replicates, L(N) has the same law as the passage time of a directly
    sampled grid, which is what makes trajectories a valid sampling route.
    """
    N = int(rng.binomial(trajectory.shape.sites, trajectory.model.p))
    return N, float(trajectory.L_traj[N])


# -- the binomial midpoint window ----------------------------------------------


@dataclass(frozen=True)
class WindowI:
    """Open one-standard-deviation window around the binomial mean of N."""

    sites: int
    p: float
    center: float
    half_width: float
    k_min: int
    k_max: int

    @classmethod
    def for_counts(cls, sites: int, p: float) -> "WindowI":
        center = sites * p
        half_width = math.sqrt(p * (1.0 - p) * sites)
        k_min = math.floor(center - half_width) + 1
        k_max = math.ceil(center + half_width) - 1
        if k_min > k_max:
            raise ValueError(
                f"window I is empty for sites={sites}, p={p}; "
                "need sites >= 1/(p(1-p))"
            )
        return cls(sites, p, center, half_width, k_min, k_max)

    def contains(self, k) -> np.ndarray:
        return (k > self.center - self.half_width) & (k < self.center + self.half_width)

    def members(self) -> np.ndarray:
        return np.arange(self.k_min, self.k_max + 1)


@dataclass(frozen=True)
class LipschitzReport:
    """Outcome of the reversed-Lipschitz scan over the window.

    The event checked is L(j) - L(i) >= (c5 / rows) * (j - i) for every window
    pair with j - i at least the gap; ``a_holds`` reports whether the hi-mode
    maximum stayed below c1 * n throughout the window.
    """

    epsilon: float
    c1: float
    c5: float
    c_ell: float
    gap: float
    slope: float
    window: WindowI
    pair_count: int
    violations: tuple[tuple[int, int], ...]
    o_n_holds: bool
    a_threshold: float
    a_holds: Optional[bool]

    def constants_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "c1": self.c1,
            "c5": self.c5,
            "c_ell": self.c_ell,
            "gap": self.gap,
            "slope": self.slope,
        }


def default_constants(model: WeightModel, epsilon: float | None = None,
                      c1: float | None = None, c5: float | None = None,
                      c_ell: float | None = None) -> dict:
    """Fill the reversed-Lipschitz constants from the model where not given.

    Defaults: epsilon = (1-p)/4 (midpoint of its admissible range),
    c1 = epsilon + (p+1)/2, c5 = (1-c1) * (E(w|hi) - m), and gap coefficient
    c_ell = sqrt(p(1-p)) so the gap matches the window half-width.
    """
    p = model.p
    if epsilon is None:
        epsilon = (1.0 - p) / 4.0
    if c1 is None:
        c1 = epsilon + (p + 1.0) / 2.0
    if c5 is None:
        c5 = (1.0 - c1) * (model.mean_hi - model.m)
    if c_ell is None:
        c_ell = math.sqrt(p * (1.0 - p))
    return {"epsilon": epsilon, "c1": c1, "c5": c5, "c_ell": c_ell}


def check_reversed_lipschitz(
    trajectory: CoupledTrajectory,
    epsilon: float | None = None,
    c1: float | None = None,
    c5: float | None = None,
    c_ell: float | None = None,
) -> LipschitzReport:
    """Scan all sufficiently separated window pairs for slope violations."""
    shape, model = trajectory.shape, trajectory.model
    consts = default_constants(model, epsilon, c1, c5, c_ell)
    sites = shape.sites
    window = WindowI.for_counts(sites, model.p)
    gap = consts["c_ell"] * math.sqrt(sites)
    slope = consts["c5"] / shape.rows

    ks = window.members()
    ks = ks[(ks >= 0) & (ks <= sites)]
    L = trajectory.L_traj[ks]
    sep = ks[None, :] - ks[:, None]
    eligible = sep >= gap
    dL = L[None, :] - L[:, None]
    bad = eligible & (dL < slope * sep)
    ii, jj = np.nonzero(bad)
    violations = tuple((int(ks[a]), int(ks[b])) for a, b in zip(ii, jj))

    a_holds = bool(np.all(trajectory.M_traj[ks] < consts["c1"] * shape.n))

    return LipschitzReport(
        epsilon=consts["epsilon"],
        c1=consts["c1"],
        c5=consts["c5"],
        c_ell=consts["c_ell"],
        gap=gap,
        slope=slope,
        window=window,
        pair_count=int(eligible.sum()),
        violations=violations,
        o_n_holds=len(violations) == 0,
        a_threshold=consts["c1"] * shape.n,
        a_holds=a_holds,
    )


# -- conditional increment check -------------------------------------------------


@dataclass(frozen=True)
class IncrementEstimate:
    """Monte Carlo estimate of E(L(k+1) - L(k) | current grid) vs. its bound.

    The bound is (lo sites on a geodesic / lo sites total) * (E(w|hi) - m),
    using the worst-case geodesic lo count (path length minus the hi-mode
    maximum).
    """

    k: int
    samples: int
    mc_mean: float
    mc_stderr: float
    bound: float


def increment_conditional_mean(
    trajectory: CoupledTrajectory,
    k: int,
    rng: np.random.Generator,
    samples: int = 256,
) -> IncrementEstimate:
    """Estimate the expected single-flip gain at step k, holding the grid fixed.

    Averages L(k+1) - L(k) over ``samples`` independent uniform choices of the
    flipped site (among remaining lo sites) and hi-conditional value draws.
    """
    shape, model = trajectory.shape, trajectory.model
    sites = shape.sites
    if k == sites:
        raise ValueError("no lo-mode site remains at k = sites")
    if not (0 <= k < sites):
        raise ValueError(f"k must be in [0, {sites}), got {k}")
    if samples < 2:
        raise ValueError("need at least 2 Monte Carlo samples")

    w = trajectory.grid_after(k)
    G0 = _kernels.dp_forward(w)
    L0 = int(G0[-1, -1])

    remaining = trajectory.flip_order[k:]
    picks = rng.integers(0, remaining.shape[0], size=samples)
    hi_draws = model.sample_conditional_int("hi", rng, samples).astype(np.int64)

    deltas = np.empty(samples, dtype=np.int64)
    n = shape.n
    for t in range(samples):
        s = int(remaining[picks[t]])
        y, x = divmod(s, n)
        wc = w.copy()
        Gc = G0.copy()
        _kernels.flip_update(wc, Gc, y, x, hi_draws[t])
        deltas[t] = int(Gc[-1, -1]) - L0

    d = deltas / model.scale
    M_k = int(trajectory.M_traj[k])
    lo_on_geodesic = max(shape.path_length - M_k, 0)
    bound = lo_on_geodesic / (sites - k) * (model.mean_hi - model.m)
    return IncrementEstimate(
        k=k,
        samples=samples,
        mc_mean=float(d.mean()),
        mc_stderr=float(d.std(ddof=1) / math.sqrt(samples)),
        bound=float(bound),
    )


# -- columnar export -------------------------------------------------------------


def export_trajectory(trajectory: CoupledTrajectory, path, report: LipschitzReport | None = None) -> None:
    """Write (k, L_k, M_k) columns with constants echoed in header lines."""
    if report is None:
        report = check_reversed_lipschitz(trajectory)
    shape, model = trajectory.shape, trajectory.model
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"# n={shape.n} alpha={shape.alpha:.12g} rows={shape.rows} sites={shape.sites} "
            f"p={model.p:.12g} m={model.m:.12g} C={model.C:.12g}\n"
        )
        c = report.constants_dict()
        fh.write(
            "# "
            + " ".join(f"{key}={c[key]:.12g}" for key in ("epsilon", "c1", "c5", "c_ell", "gap", "slope"))
            + f" window=[{report.window.k_min},{report.window.k_max}]"
            + f" o_n={int(report.o_n_holds)} a={int(bool(report.a_holds))}\n"
        )
        fh.write("k L M\n")
        for k in range(shape.sites + 1):
            fh.write(f"{k} {trajectory.L_traj[k]:.12g} {int(trajectory.M_traj[k])}\n")


def read_trajectory_export(path) -> dict:
    """Parse a trajectory export back into arrays plus header metadata."""
    meta: dict = {}
    ks, Ls, Ms = [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        key, val = tok.split("=", 1)
                        meta[key] = val
                continue
            if line.startswith("k "):
                continue
            k, L, M = line.split()
            ks.append(int(k))
            Ls.append(float(L))
            Ms.append(int(M))
    return {
        "meta": meta,
        "k": np.array(ks),
        "L": np.array(Ls),
        "M": np.array(Ms),
    }
