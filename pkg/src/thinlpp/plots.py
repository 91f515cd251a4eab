"""Figure rendering for records and trajectory exports (headless, vector out)."""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .coupling import read_trajectory_export
from .experiments import load_record

__all__ = [
    "PLOT_KINDS",
    "plot_loglog_moments",
    "plot_trajectory",
    "plot_decay_curve",
    "plot_shape_curve",
    "render",
    "render_run_figures",
]

PLOT_KINDS = ("loglog_moments", "trajectory", "decay_curve", "shape_curve")

# experiment kind -> plot kind accepted for its record
_RECORD_PLOTS = {
    "moment_scaling": "loglog_moments",
    "mn_growth": "decay_curve",
    "shape_curve": "shape_curve",
}


def plot_loglog_moments(summary: dict):
    """Per-r moment points on log-log axes, with the fit and the target slope."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for key, fit in sorted(summary["fits"].items()):
        pts = [e for e in summary["estimates"] if f"{e['r']:g}" == key]
        ns = np.array([e["n"] for e in pts], dtype=float)
        ms = np.array([e["moment"] for e in pts])
        ax.loglog(ns, ms, "o", label=f"r={key} moments")
        xs = np.array([ns.min(), ns.max()])
        ax.loglog(xs, np.exp(fit["intercept"]) * xs ** fit["slope"], "-",
                  label=f"fit slope {fit['slope']:.3f}")
        anchor = ms[0]
        ax.loglog(xs, anchor * (xs / xs[0]) ** fit["target"], "--",
                  label=f"target slope {fit['target']:.3f}")
    ax.set_xlabel("n")
    ax.set_ylabel("central moment")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def plot_trajectory(export: dict):
    """L(k) and M(k) along the flip sequence, window shaded."""
    meta = export["meta"]
    sites = int(meta["sites"])
    p = float(meta["p"])
    center = sites * p
    hw = math.sqrt(p * (1 - p) * sites)

    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.plot(export["k"], export["L"], "-", label="L(k)")
    ax.axvspan(center - hw, center + hw, alpha=0.2, label="window I")
    ax2 = ax.twinx()
    ax2.plot(export["k"], export["M"], "-", color="tab:orange", alpha=0.6, label="M(k)")
    ax.set_xlabel("flips k")
    ax.set_ylabel("passage time")
    ax2.set_ylabel("hi-mode maximum")
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    return fig


def plot_decay_curve(summary: dict):
    """Exceedance frequency of the hi-mode maximum vs n, semilog scale.

    Frequencies that came out as zero are only resolved up to 1/reps; they are
    drawn as open downward markers at that resolution bound.
    """
    rows = summary["per_n"]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    pos = [e for e in rows if not e["below_resolution"]]
    zero = [e for e in rows if e["below_resolution"]]
    if pos:
        ns = [e["n"] for e in pos]
        fs = [e["freq"] for e in pos]
        lo = [max(e["freq"] - e["wilson_low"], 0.0) for e in pos]
        hi = [max(e["wilson_high"] - e["freq"], 0.0) for e in pos]
        ax.errorbar(ns, fs, yerr=[lo, hi], fmt="o", capsize=3, label="exceedance freq")
    if zero:
        ax.plot(
            [e["n"] for e in zero],
            [1.0 / e["reps"] for e in zero],
            "v",
            markerfacecolor="none",
            label="< 1/reps",
        )
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel(f"P(M >= {summary['c1']:g} n)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def plot_shape_curve(summary: dict):
    rows = summary["per_a"]
    a = np.array([e["a"] for e in rows])
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.errorbar(a, [e["g_hat"] for e in rows], yerr=[e["stderr"] for e in rows],
                fmt="o", capsize=3, label="empirical growth rate")
    grid_a = np.linspace(a.min(), a.max(), 200)
    p = summary["p"]
    analytic = p + 2 * np.sqrt(p * (1 - p) * grid_a)
    band = np.sqrt(p * (1 - p) * grid_a)
    ax.plot(grid_a, analytic, "-", label="small-aspect approximation")
    ax.fill_between(grid_a, analytic - band, analytic + band, alpha=0.15)
    ax.set_xlabel("aspect ratio a")
    ax.set_ylabel("g")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _plot_lipschitz(summary: dict):
    rows = summary["per_n"]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ns = [e["n"] for e in rows]
    ax.errorbar(
        ns,
        [e["o_n_freq"] for e in rows],
        yerr=[
            [max(e["o_n_freq"] - e["wilson_low"], 0.0) for e in rows],
            [max(e["wilson_high"] - e["o_n_freq"], 0.0) for e in rows],
        ],
        fmt="o-",
        capsize=3,
        label="reversed-Lipschitz frequency",
    )
    ax.plot(ns, [e["a_freq"] for e in rows], "s--", alpha=0.6, label="hi-count event frequency")
    ax.set_xlabel("n")
    ax.set_ylabel("frequency")
    ax.set_ylim(-0.05, 1.05)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _plot_cylinder(summary: dict):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for row in summary["per_n"]:
        widths = [w["width"] for w in row["widths"]]
        ax.plot(widths, [w["var_t"] for w in row["widths"]], "o-",
                label=f"n={row['n']} restricted")
        ax.axhline(row["var_L"], linestyle="--", alpha=0.6)
    ax.set_xlabel("cylinder width")
    ax.set_ylabel("variance")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _plot_coupling(summary: dict):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for row in summary["per_n"]:
        support = np.array(row["support"])
        width = 0.4 * (support[1] - support[0] if support.size > 1 else 1.0)
        ax.bar(support - width / 2, row["coupled_counts"], width=width, label=f"n={row['n']} coupled")
        ax.bar(support + width / 2, row["direct_counts"], width=width, label=f"n={row['n']} direct")
    ax.set_xlabel("passage time")
    ax.set_ylabel("count")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


_RUN_FIGURES = {
    "moment_scaling": ("loglog_moments", plot_loglog_moments),
    "mn_growth": ("decay_curve", plot_decay_curve),
    "shape_curve": ("shape_curve", plot_shape_curve),
    "lipschitz_frequency": ("lipschitz_frequency", _plot_lipschitz),
    "cylinder_variance": ("cylinder_variance", _plot_cylinder),
    "coupling_check": ("coupling_check", _plot_coupling),
}


def render(kind: str, record_path, out_path) -> Path:
    """Render one of the public plot kinds from a record dir or export file."""
    if kind not in PLOT_KINDS:
        raise ValueError(f"plot kind must be one of {PLOT_KINDS}, got {kind!r}")
    out_path = Path(out_path)
    if kind == "trajectory":
        export = read_trajectory_export(record_path)
        if export["k"].size == 0:
            raise ValueError(f"{record_path} does not look like a trajectory export")
        fig = plot_trajectory(export)
    else:
        _, _, summary = load_record(record_path)
        expected = _RECORD_PLOTS.get(summary.get("kind"))
        if expected != kind:
            raise ValueError(
                f"record {record_path} holds a {summary.get('kind')!r} experiment; "
                f"cannot draw {kind!r}"
            )
        fig = {
            "loglog_moments": plot_loglog_moments,
            "decay_curve": plot_decay_curve,
            "shape_curve": plot_shape_curve,
        }[kind](summary)
    fig.savefig(out_path)
    plt.close(fig)
    return out_path


def render_run_figures(summary: dict, out_dir) -> list[Path]:
    """Default figure(s) written next to a run's delimited output."""
    out_dir = Path(out_dir)
    name, fn = _RUN_FIGURES[summary["kind"]]
    path = out_dir / f"{name}.pdf"
    fig = fn(summary)
    fig.savefig(path)
    plt.close(fig)
    return [path]
