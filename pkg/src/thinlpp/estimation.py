"""Central moments with bootstrap errors, scaling fits, window statistics,
and the thin-rectangle shape function."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .coupling import WindowI
from .lattice import GridShape, hi_mode_max, sample_grid
from .weights import WeightModel

__all__ = [
    "MomentEstimate",
    "ExponentFit",
    "WindowStats",
    "ShapeEstimate",
    "central_moment",
    "fit_exponent",
    "window_I",
    "window_stats",
    "shape_function_estimate",
    "empirical_shape",
]


@dataclass(frozen=True)
class MomentEstimate:
    """Plug-in r-th absolute central moment with a bootstrap standard error."""

    r: float
    count: int
    mean: float
    moment: float
    stderr: float
    samples: Optional[np.ndarray] = None


def central_moment(
    samples,
    r: float,
    bootstrap: int = 1000,
    rng: np.random.Generator | None = None,
    keep_samples: bool = False,
) -> MomentEstimate:
    """Estimate E|X - EX|^r by the plug-in average around the sample mean.

    The estimator is the biased plug-in version (bias O(1/count)); for r = 2
    it is the biased sample variance.  ``bootstrap`` resamples give the
    standard error; pass bootstrap=0 to skip (stderr reported as nan).
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        x = x.ravel()
    if x.size < 2:
        raise ValueError(f"need at least 2 samples, got {x.size}")
    if r < 1:
        raise ValueError(f"moment order r must be >= 1, got {r}")

    mean = float(x.mean())
    moment = float(np.mean(np.abs(x - mean) ** r))

    stderr = float("nan")
    if bootstrap > 0:
        if rng is None:
            rng = np.random.default_rng(0)
        est = np.empty(bootstrap)
        for b in range(bootstrap):
            xb = x[rng.integers(0, x.size, size=x.size)]
            est[b] = np.mean(np.abs(xb - xb.mean()) ** r)
        stderr = float(est.std(ddof=1))

    return MomentEstimate(
        r=float(r),
        count=int(x.size),
        mean=mean,
        moment=moment,
        stderr=stderr,
        samples=x.copy() if keep_samples else None,
    )


@dataclass(frozen=True)
class ExponentFit:
    """Least-squares slope of log moment against log n."""

    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float
    slope_ci: tuple[float, float]
    log_n: np.ndarray
    log_moment: np.ndarray
    n_values: tuple[int, ...]
    dropped: tuple[int, ...]


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    xm = x.mean()
    ym = y.mean()
    dx = x - xm
    var = float(np.dot(dx, dx))
    slope = float(np.dot(dx, y - ym) / var)
    return slope, float(ym - slope * xm)


def fit_exponent(
    points: Sequence[tuple[int, MomentEstimate]],
    resamples: int = 1000,
    rng: np.random.Generator | None = None,
) -> ExponentFit:
    """Fit log(moment) = slope * log(n) + intercept by ordinary least squares.

    Points with non-positive moment estimates cannot enter the log fit; they
    are dropped with a warning.  The slope confidence interval comes from
    re-fitting with each moment perturbed by a Gaussian draw at its bootstrap
    standard error.
    """
    kept, dropped = [], []
    for n, est in points:
        if est.moment > 0.0:
            kept.append((int(n), est))
        else:
            dropped.append(int(n))
            warnings.warn(f"dropping n={n}: non-positive moment estimate {est.moment}")
    if len(kept) < 3:
        raise ValueError(f"need at least 3 positive points to fit, have {len(kept)}")
    if len({n for n, _ in kept}) < 3:
        raise ValueError("need at least 3 distinct n values")

    ns = np.array([n for n, _ in kept], dtype=np.float64)
    moments = np.array([e.moment for _, e in kept])
    errs = np.array([e.stderr if math.isfinite(e.stderr) else 0.0 for _, e in kept])
    x = np.log(ns)
    y = np.log(moments)

    slope, intercept = _ols(x, y)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot

    slope_stderr = float("nan")
    ci = (float("nan"), float("nan"))
    if resamples > 0 and np.any(errs > 0):
        if rng is None:
            rng = np.random.default_rng(0)
        slopes = []
        for _ in range(resamples):
            perturbed = moments + rng.standard_normal(moments.size) * errs
            if np.any(perturbed <= 0):
                continue
            s, _ = _ols(x, np.log(perturbed))
            slopes.append(s)
        if len(slopes) >= 2:
            slopes = np.array(slopes)
            slope_stderr = float(slopes.std(ddof=1))
            ci = (float(np.percentile(slopes, 2.5)), float(np.percentile(slopes, 97.5)))

    return ExponentFit(
        slope=slope,
        intercept=intercept,
        r_squared=r_squared,
        slope_stderr=slope_stderr,
        slope_ci=ci,
        log_n=x,
        log_moment=y,
        n_values=tuple(int(n) for n, _ in kept),
        dropped=tuple(dropped),
    )


# -- binomial window -------------------------------------------------------------


def window_I(shape: GridShape, model: WeightModel) -> WindowI:
    """The open +-1 standard deviation window around sites * p."""
    return WindowI.for_counts(shape.sites, model.p)


@dataclass(frozen=True)
class WindowStats:
    r: float
    count_in: int
    p_in: float
    cond_mean: float
    cond_moment: float


def window_stats(samples_N, window: WindowI, r: float = 2.0) -> WindowStats:
    """Empirical window membership and conditional moments of hi counts."""
    N = np.asarray(samples_N)
    if N.size == 0:
        raise ValueError("no samples")
    inside = window.contains(N)
    count_in = int(inside.sum())
    if count_in == 0:
        raise ValueError("no samples fall inside the window")
    sel = N[inside].astype(np.float64)
    mean = float(sel.mean())
    return WindowStats(
        r=float(r),
        count_in=count_in,
        p_in=count_in / N.size,
        cond_mean=mean,
        cond_moment=float(np.mean(np.abs(sel - mean) ** r)),
    )


# -- shape function ---------------------------------------------------------------


def shape_function_estimate(p: float, a: float) -> float:
    """Small-aspect analytic approximation p + 2*sqrt(p(1-p)a) of the linear
    growth rate of the hi-mode maximum on an n x (n*a) grid."""
    if not (0.0 < a <= 1.0):
        raise ValueError(f"aspect ratio a must be in (0, 1], got {a}")
    return p + 2.0 * math.sqrt(p * (1.0 - p) * a)


@dataclass(frozen=True)
class ShapeEstimate:
    n: int
    rows: int
    a: float
    reps: int
    g_hat: float
    stderr: float


def empirical_shape(
    n: int,
    a: float,
    model: WeightModel,
    reps: int,
    rng: np.random.Generator,
) -> ShapeEstimate:
    """Monte Carlo estimate of the hi-mode growth rate mean(M(n, floor(n*a)))/n."""
    if not (0.0 < a <= 1.0):
        raise ValueError(f"aspect ratio a must be in (0, 1], got {a}")
    rows = int(math.floor(n * a + 1e-9))
    if rows < 1:
        raise ValueError(f"floor(n*a) = 0 for n={n}, a={a}; grid needs at least one row")
    shape = GridShape.from_rows(n, rows)
    vals = np.empty(reps, dtype=np.float64)
    for j in range(reps):
        vals[j] = hi_mode_max(sample_grid(shape, model, rng))
    g = vals / n
    return ShapeEstimate(
        n=n,
        rows=rows,
        a=a,
        reps=reps,
        g_hat=float(g.mean()),
        stderr=float(g.std(ddof=1) / math.sqrt(reps)),
    )
