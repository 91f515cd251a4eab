"""Reproducible experiment orchestration: derived rng streams, JSONL
persistence with resume, and the headline measurement campaigns.

Replicate j of group i runs on an rng stream derived injectively as
Philox(SeedSequence(master_seed, spawn_key=(kind_code, 0, i, j))); summary
analyses (bootstraps, fit resampling) use the reserved lane
spawn_key=(kind_code, 1, a, b).  Results are therefore identical for any
parallelism degree, and completed (i, j) pairs can be skipped on resume.
"""
from __future__ import annotations

import csv
import functools
import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.stats import chi2_contingency

from . import __version__, _kernels
from .coupling import build_trajectory, check_reversed_lipschitz, default_constants, evaluate_at_N
from .estimation import MomentEstimate, central_moment, fit_exponent, shape_function_estimate
from .lattice import (
    GridShape,
    cylinder_last_passage,
    hi_mode_max,
    last_passage,
    sample_grid,
)
from .weights import WeightModel, make_model

__all__ = [
    "KINDS",
    "ConfigError",
    "ExperimentSpec",
    "ExperimentRecord",
    "load_spec",
    "load_record",
    "run",
    "gate_failures",
    "wilson_interval",
    "summary_table",
]

KINDS = (
    "moment_scaling",
    "coupling_check",
    "mn_growth",
    "lipschitz_frequency",
    "cylinder_variance",
    "shape_curve",
)
KIND_CODES = {kind: code for code, kind in enumerate(KINDS, start=1)}


class ConfigError(ValueError):
    """Experiment configuration problem, with the offending field named."""


# ---------------------------------------------------------------------------
# Spec
# ---------------------------------------------------------------------------

_SPEC_FIELDS = {"kind", "model", "alpha", "r", "n", "replicates", "seed", "constants"}


@dataclass
class ExperimentSpec:
    """Validated, hashable experiment configuration."""

    kind: str
    atoms: tuple[tuple[float, float], ...]
    threshold: float
    alpha: float
    r_list: tuple[float, ...]
    n_list: tuple[int, ...]
    replicates: int
    seed: int
    constants: dict

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        unknown = set(data) - _SPEC_FIELDS
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")

        def need(name):
            if name not in data:
                raise ConfigError(f"missing required config field: {name!r}")
            return data[name]

        kind = need("kind")
        if kind not in KINDS:
            raise ConfigError(f"kind: must be one of {KINDS}, got {kind!r}")

        model_cfg = need("model")
        if not isinstance(model_cfg, dict) or "atoms" not in model_cfg or "m" not in model_cfg:
            raise ConfigError("model: must be an object with 'atoms' and 'm'")
        try:
            make_model(model_cfg["atoms"], model_cfg["m"])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"model: {exc}") from exc
        atoms = tuple((float(v), float(q)) for v, q in model_cfg["atoms"])

        alpha = need("alpha")
        if not isinstance(alpha, (int, float)) or not (0.0 < alpha <= 1.0):
            raise ConfigError(f"alpha: must be in (0, 1], got {alpha!r}")

        n_raw = need("n")
        if not isinstance(n_raw, (list, tuple)) or not n_raw:
            raise ConfigError("n: must be a non-empty list of integers")
        n_list = []
        for v in n_raw:
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"n: entries must be positive integers, got {v!r}")
            n_list.append(v)
        if any(b <= a for a, b in zip(n_list, n_list[1:])):
            raise ConfigError(f"n: values must be strictly increasing, got {n_list}")

        replicates = need("replicates")
        if not isinstance(replicates, int) or replicates < 2:
            raise ConfigError(f"replicates: must be an integer >= 2, got {replicates!r}")

        seed = need("seed")
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError(f"seed: must be a non-negative integer, got {seed!r}")

        r_raw = data.get("r", [1, 2])
        if isinstance(r_raw, (int, float)):
            r_raw = [r_raw]
        if not isinstance(r_raw, (list, tuple)) or not r_raw:
            raise ConfigError("r: must be a number or non-empty list of numbers")
        r_list = []
        for v in r_raw:
            if not isinstance(v, (int, float)) or v < 1:
                raise ConfigError(f"r: entries must be numbers >= 1, got {v!r}")
            r_list.append(float(v))

        constants = data.get("constants", {})
        if not isinstance(constants, dict):
            raise ConfigError("constants: must be an object")

        return cls(
            kind=kind,
            atoms=atoms,
            threshold=float(model_cfg["m"]),
            alpha=float(alpha),
            r_list=tuple(r_list),
            n_list=tuple(n_list),
            replicates=int(replicates),
            seed=int(seed),
            constants=dict(constants),
        )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "model": {"atoms": [[v, q] for v, q in self.atoms], "m": self.threshold},
            "alpha": self.alpha,
            "r": list(self.r_list),
            "n": list(self.n_list),
            "replicates": self.replicates,
            "seed": self.seed,
            "constants": self.constants,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def spec_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    @functools.cached_property
    def model(self) -> WeightModel:
        return make_model(self.atoms, self.threshold)

    def shape_for(self, n: int) -> GridShape:
        return GridShape(n, self.alpha)

    def groups(self) -> list[dict]:
        """Replicated work groups; unit (i, j) is replicate j of group i."""
        if self.kind == "cylinder_variance":
            out = []
            for n in self.n_list:
                rows = self.shape_for(n).rows
                widths = self.constants.get("widths")
                if widths is None:
                    widths = []
                    w = 1
                    while w < rows:
                        widths.append(w)
                        w *= 2
                    widths.append(rows)
                widths = sorted({int(w) for w in widths})
                if any(w < 1 for w in widths):
                    raise ConfigError("constants.widths: widths must be >= 1")
                out.append({"n": n, "widths": widths})
            return out
        if self.kind == "shape_curve":
            a_list = self.constants.get("a_list", [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0])
            out = []
            for n in self.n_list:
                for a in a_list:
                    if math.floor(n * a + 1e-9) < 1:
                        raise ConfigError(f"constants.a_list: floor(n*a) < 1 for n={n}, a={a}")
                    out.append({"n": n, "a": float(a)})
            return out
        return [{"n": n} for n in self.n_list]


def load_spec(path) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return ExperimentSpec.from_dict(data)


# ---------------------------------------------------------------------------
# Derived rng streams
# ---------------------------------------------------------------------------


def unit_seed_sequence(seed: int, kind: str, i: int, j: int) -> np.random.SeedSequence:
    """Injective per-unit seed: spawn_key = (kind_code, 0, i, j)."""
    return np.random.SeedSequence(seed, spawn_key=(KIND_CODES[kind], 0, i, j))


def unit_rng(seed: int, kind: str, i: int, j: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(unit_seed_sequence(seed, kind, i, j)))


def analysis_rng(seed: int, kind: str, a: int, b: int) -> np.random.Generator:
    """Summary-stage stream on the reserved lane (kind_code, 1, a, b)."""
    seq = np.random.SeedSequence(seed, spawn_key=(KIND_CODES[kind], 1, a, b))
    return np.random.Generator(np.random.Philox(seq))


# ---------------------------------------------------------------------------
# Per-unit work
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=8)
def _cached_spec(canonical: str) -> ExperimentSpec:
    return ExperimentSpec.from_dict(json.loads(canonical))


def _run_unit(spec: ExperimentSpec, i: int, j: int) -> dict:
    group = spec.groups()[i]
    seq = unit_seed_sequence(spec.seed, spec.kind, i, j)
    out = _UNIT_FNS[spec.kind](spec, group, seq)
    out["i"] = i
    out["j"] = j
    return out


def _unit_star(args: tuple[str, int, int]) -> dict:
    canonical, i, j = args
    return _run_unit(_cached_spec(canonical), i, j)


def _unit_moment(spec, group, seq) -> dict:
    rng = np.random.Generator(np.random.Philox(seq))
    grid = sample_grid(spec.shape_for(group["n"]), spec.model, rng)
    return {"L": last_passage(grid).value}


def _unit_coupling(spec, group, seq) -> dict:
    traj_seq, n_seq, direct_seq = seq.spawn(3)
    shape = spec.shape_for(group["n"])
    traj = build_trajectory(shape, spec.model, np.random.Generator(np.random.Philox(traj_seq)))
    N, L = evaluate_at_N(traj, np.random.Generator(np.random.Philox(n_seq)))
    direct = last_passage(
        sample_grid(shape, spec.model, np.random.Generator(np.random.Philox(direct_seq)))
    ).value
    return {"N": N, "L_coupled": L, "L_direct": direct}


def _unit_mn(spec, group, seq) -> dict:
    rng = np.random.Generator(np.random.Philox(seq))
    grid = sample_grid(spec.shape_for(group["n"]), spec.model, rng)
    return {"M": hi_mode_max(grid)}


def _lipschitz_overrides(spec) -> dict:
    c = spec.constants
    return {
        "epsilon": c.get("epsilon"),
        "c1": c.get("c1"),
        "c5": c.get("c5"),
        "c_ell": c.get("c_ell"),
    }


def _unit_lipschitz(spec, group, seq) -> dict:
    rng = np.random.Generator(np.random.Philox(seq))
    traj = build_trajectory(spec.shape_for(group["n"]), spec.model, rng)
    rep = check_reversed_lipschitz(traj, **_lipschitz_overrides(spec))
    return {
        "o_n": bool(rep.o_n_holds),
        "a_holds": bool(rep.a_holds),
        "violations": len(rep.violations),
        "pairs": rep.pair_count,
    }


def _unit_cylinder(spec, group, seq) -> dict:
    rng = np.random.Generator(np.random.Philox(seq))
    grid = sample_grid(spec.shape_for(group["n"]), spec.model, rng)
    res = last_passage(grid)
    return {
        "L": res.value,
        "Lt": {str(w): cylinder_last_passage(grid, w) for w in group["widths"]},
    }


def _unit_shape(spec, group, seq) -> dict:
    rng = np.random.Generator(np.random.Philox(seq))
    n = group["n"]
    rows = int(math.floor(n * group["a"] + 1e-9))
    grid = sample_grid(GridShape.from_rows(n, rows), spec.model, rng)
    return {"M": hi_mode_max(grid)}


_UNIT_FNS: dict[str, Callable] = {
    "moment_scaling": _unit_moment,
    "coupling_check": _unit_coupling,
    "mn_growth": _unit_mn,
    "lipschitz_frequency": _unit_lipschitz,
    "cylinder_variance": _unit_cylinder,
    "shape_curve": _unit_shape,
}


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (default 95%)."""
    if trials == 0:
        return (0.0, 1.0)
    ph = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (ph + z2 / (2 * trials)) / denom
    half = z * math.sqrt(ph * (1 - ph) / trials + z2 / (4 * trials * trials)) / denom
    low = 0.0 if successes == 0 else max(0.0, center - half)
    high = 1.0 if successes == trials else min(1.0, center + half)
    return (low, high)


def _two_sample_chi2_p(counts_a: np.ndarray, counts_b: np.ndarray) -> float:
    """Chi-square homogeneity p-value, merging sparse bins (pooled count < 10)."""
    a_bins, b_bins = [], []
    acc_a = acc_b = 0
    for ca, cb in zip(counts_a, counts_b):
        acc_a += int(ca)
        acc_b += int(cb)
        if acc_a + acc_b >= 10:
            a_bins.append(acc_a)
            b_bins.append(acc_b)
            acc_a = acc_b = 0
    if acc_a + acc_b > 0:
        if a_bins:
            a_bins[-1] += acc_a
            b_bins[-1] += acc_b
        else:
            a_bins, b_bins = [acc_a], [acc_b]
    if len(a_bins) < 2:
        return float("nan")
    _, p, _, _ = chi2_contingency(np.array([a_bins, b_bins]))
    return float(p)


def _group_rows(rows: list[dict]) -> dict[int, list[dict]]:
    by_group: dict[int, list[dict]] = {}
    for row in rows:
        by_group.setdefault(int(row["i"]), []).append(row)
    for i in by_group:
        by_group[i].sort(key=lambda r: int(r["j"]))
    return by_group


def _summarize_moment(spec, groups, by_group) -> dict:
    estimates = []
    fits = {}
    per_r_points: dict[float, list[tuple[int, MomentEstimate]]] = {r: [] for r in spec.r_list}
    for i, group in enumerate(groups):
        samples = np.array([row["L"] for row in by_group.get(i, [])])
        for k, r in enumerate(spec.r_list):
            est = central_moment(samples, r, bootstrap=1000, rng=analysis_rng(spec.seed, spec.kind, i, k))
            per_r_points[r].append((group["n"], est))
            estimates.append(
                {
                    "n": group["n"],
                    "alpha": spec.alpha,
                    "r": r,
                    "moment": est.moment,
                    "stderr": est.stderr,
                    "mean": est.mean,
                    "samples": est.count,
                }
            )
    if len(groups) < 3:  # a log-log fit needs 3 distinct sizes
        return {"estimates": estimates, "fits": {}}
    for k, r in enumerate(spec.r_list):
        fit = fit_exponent(per_r_points[r], rng=analysis_rng(spec.seed, spec.kind, 1000 + k, 0))
        entry = {
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "slope_stderr": fit.slope_stderr,
            "slope_ci": list(fit.slope_ci),
            "target": r * (1.0 - spec.alpha) / 2.0,
            "n_values": list(fit.n_values),
        }
        if r == 1.0:
            entry["reference"] = 0.5 - spec.alpha / 6.0
        fits[f"{r:g}"] = entry
    return {"estimates": estimates, "fits": fits}


def _summarize_coupling(spec, groups, by_group) -> dict:
    per_n = []
    for i, group in enumerate(groups):
        rows = by_group.get(i, [])
        coupled = np.array([row["L_coupled"] for row in rows])
        direct = np.array([row["L_direct"] for row in rows])
        support = np.unique(np.concatenate([coupled, direct]))
        cc = np.array([(coupled == v).sum() for v in support])
        dc = np.array([(direct == v).sum() for v in support])
        per_n.append(
            {
                "n": group["n"],
                "reps": len(rows),
                "support": [float(v) for v in support],
                "coupled_counts": [int(v) for v in cc],
                "direct_counts": [int(v) for v in dc],
                "chi2_p": _two_sample_chi2_p(cc, dc),
                "mean_coupled": float(coupled.mean()),
                "mean_direct": float(direct.mean()),
                "mean_N": float(np.mean([row["N"] for row in rows])),
            }
        )
    return {"per_n": per_n}


def _summarize_mn(spec, groups, by_group) -> dict:
    c1 = spec.constants.get("c1")
    if c1 is None:
        c1 = default_constants(spec.model)["c1"]
    per_n = []
    fit_x, fit_y = [], []
    for i, group in enumerate(groups):
        rows = by_group.get(i, [])
        n = group["n"]
        threshold = c1 * n
        ms = np.array([row["M"] for row in rows])
        exceed = int((ms >= threshold).sum())
        freq = exceed / len(rows)
        low, high = wilson_interval(exceed, len(rows))
        per_n.append(
            {
                "n": n,
                "threshold": threshold,
                "reps": len(rows),
                "exceed": exceed,
                "freq": freq,
                "wilson_low": low,
                "wilson_high": high,
                "below_resolution": exceed == 0,
            }
        )
        if exceed > 0:
            fit_x.append(n)
            fit_y.append(math.log(freq))
    c2_hat = None
    if len(fit_x) >= 2:
        slope = np.polyfit(np.array(fit_x, dtype=float), np.array(fit_y), 1)[0]
        c2_hat = float(-slope)
    return {"c1": float(c1), "per_n": per_n, "c2_hat": c2_hat, "decay_points": len(fit_x)}


def _summarize_lipschitz(spec, groups, by_group) -> dict:
    consts = default_constants(spec.model, **_lipschitz_overrides(spec))
    per_n = []
    for i, group in enumerate(groups):
        rows = by_group.get(i, [])
        o_count = sum(1 for row in rows if row["o_n"])
        a_count = sum(1 for row in rows if row["a_holds"])
        low, high = wilson_interval(o_count, len(rows))
        per_n.append(
            {
                "n": group["n"],
                "reps": len(rows),
                "o_n_freq": o_count / len(rows),
                "wilson_low": low,
                "wilson_high": high,
                "a_freq": a_count / len(rows),
                "mean_violations": float(np.mean([row["violations"] for row in rows])),
                "mean_pairs": float(np.mean([row["pairs"] for row in rows])),
            }
        )
    return {"constants": consts, "per_n": per_n}


def _summarize_cylinder(spec, groups, by_group) -> dict:
    per_n = []
    for i, group in enumerate(groups):
        rows = by_group.get(i, [])
        n = group["n"]
        shape = spec.shape_for(n)
        L = np.array([row["L"] for row in rows])
        var_L = float(np.mean((L - L.mean()) ** 2))
        widths_out = []
        for w in group["widths"]:
            Lt = np.array([row["Lt"][str(w)] for row in rows])
            var_t = float(np.mean((Lt - Lt.mean()) ** 2))
            p_less = float((Lt < L).mean())
            dmean = float(L.mean() - Lt.mean())
            widths_out.append(
                {
                    "width": w,
                    "var_t": var_t,
                    "mean_t": float(Lt.mean()),
                    "p_strict_less": p_less,
                    "all_le": bool(np.all(Lt <= L)),
                    "covers_grid": w >= shape.rows,
                    "var_equal": var_t == var_L,
                    "sandwich_low": var_t - 8 * n * n * p_less - dmean * dmean,
                    "sandwich_high": var_t + 8 * n * n * p_less - dmean * dmean,
                }
            )
        per_n.append(
            {
                "n": n,
                "rows": shape.rows,
                "reps": len(rows),
                "var_L": var_L,
                "mean_L": float(L.mean()),
                "widths": widths_out,
            }
        )
    return {"per_n": per_n}


def _summarize_shape(spec, groups, by_group) -> dict:
    p = spec.model.p
    per_a = []
    for i, group in enumerate(groups):
        rows = by_group.get(i, [])
        n, a = group["n"], group["a"]
        g = np.array([row["M"] for row in rows], dtype=float) / n
        g_hat = float(g.mean())
        stderr = float(g.std(ddof=1) / math.sqrt(len(rows)))
        analytic = shape_function_estimate(p, a)
        band = math.sqrt(p * (1 - p) * a)  # half the analytic excess term
        per_a.append(
            {
                "n": n,
                "a": a,
                "rows": int(math.floor(n * a + 1e-9)),
                "reps": len(rows),
                "g_hat": g_hat,
                "stderr": stderr,
                "g_analytic": analytic,
                "band": band,
                "within_band": abs(g_hat - analytic) <= band,
            }
        )
    return {"p": p, "per_a": per_a}


_SUMMARY_FNS = {
    "moment_scaling": _summarize_moment,
    "coupling_check": _summarize_coupling,
    "mn_growth": _summarize_mn,
    "lipschitz_frequency": _summarize_lipschitz,
    "cylinder_variance": _summarize_cylinder,
    "shape_curve": _summarize_shape,
}


def summarize(spec: ExperimentSpec, rows: list[dict]) -> dict:
    groups = spec.groups()
    by_group = _group_rows(rows)
    missing = [i for i in range(len(groups)) if len(by_group.get(i, [])) != spec.replicates]
    if missing:
        raise RuntimeError(f"incomplete groups (expected {spec.replicates} replicates): {missing}")
    body = _SUMMARY_FNS[spec.kind](spec, groups, by_group)
    return {
        "kind": spec.kind,
        "spec": spec.to_dict(),
        "spec_hash": spec.spec_hash(),
        "version": __version__,
        **body,
    }


# ---------------------------------------------------------------------------
# Gates (CLI --check)
# ---------------------------------------------------------------------------


def gate_failures(summary: dict, spec: ExperimentSpec) -> list[str]:
    """Per-kind pass/fail thresholds; empty list means all gates passed."""
    out: list[str] = []
    c = spec.constants
    if spec.kind == "moment_scaling":
        margin = c.get("slope_margin", 0.05)
        for key, fit in summary["fits"].items():
            if fit["slope"] < fit["target"] - margin:
                out.append(
                    f"r={key}: slope {fit['slope']:.4f} below target {fit['target']:.4f} - {margin}"
                )
    elif spec.kind == "mn_growth":
        rows = summary["per_n"]
        for a, b in zip(rows, rows[1:]):
            if b["wilson_low"] > a["wilson_high"]:
                out.append(f"exceedance frequency rises significantly from n={a['n']} to n={b['n']}")
        final_max = c.get("final_freq_max", 1e-3)
        if rows and rows[-1]["freq"] >= final_max:
            out.append(f"final exceedance frequency {rows[-1]['freq']:.2e} >= {final_max}")
    elif spec.kind == "coupling_check":
        for row in summary["per_n"]:
            if not (row["chi2_p"] > 0.001):
                out.append(f"n={row['n']}: coupled/direct chi-square p={row['chi2_p']:.2e} <= 0.001")
    elif spec.kind == "lipschitz_frequency":
        floor_freq = c.get("o_n_min", 0.9)
        largest = summary["per_n"][-1]
        if largest["o_n_freq"] < floor_freq:
            out.append(f"n={largest['n']}: O_n frequency {largest['o_n_freq']:.3f} < {floor_freq}")
    elif spec.kind == "cylinder_variance":
        for row in summary["per_n"]:
            for wrow in row["widths"]:
                if not wrow["all_le"]:
                    out.append(f"n={row['n']} width={wrow['width']}: restricted value exceeded L")
                if wrow["covers_grid"] and not wrow["var_equal"]:
                    out.append(f"n={row['n']} width={wrow['width']}: full-width variance differs")
    elif spec.kind == "shape_curve":
        for row in summary["per_a"]:
            if not row["within_band"]:
                out.append(
                    f"n={row['n']} a={row['a']}: g_hat {row['g_hat']:.4f} outside "
                    f"{row['g_analytic']:.4f} +- {row['band']:.4f}"
                )
    return out


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


def summary_table(summary: dict) -> tuple[list[str], list[list]]:
    """Flatten a summary into a delimited table (header, rows)."""
    kind = summary["kind"]
    if kind == "moment_scaling":
        header = ["n", "alpha", "r", "moment", "stderr", "mean", "samples"]
        rows = [[e[h] for h in header] for e in summary["estimates"]]
    elif kind == "coupling_check":
        header = ["n", "reps", "chi2_p", "mean_coupled", "mean_direct", "mean_N"]
        rows = [[e[h] for h in header] for e in summary["per_n"]]
    elif kind == "mn_growth":
        header = ["n", "threshold", "reps", "exceed", "freq", "wilson_low", "wilson_high"]
        rows = [[e[h] for h in header] for e in summary["per_n"]]
    elif kind == "lipschitz_frequency":
        header = ["n", "reps", "o_n_freq", "wilson_low", "wilson_high", "a_freq", "mean_violations"]
        rows = [[e[h] for h in header] for e in summary["per_n"]]
    elif kind == "cylinder_variance":
        header = ["n", "width", "var_L", "var_t", "p_strict_less", "sandwich_low", "sandwich_high"]
        rows = []
        for e in summary["per_n"]:
            for w in e["widths"]:
                rows.append([e["n"], w["width"], e["var_L"], w["var_t"], w["p_strict_less"],
                             w["sandwich_low"], w["sandwich_high"]])
    elif kind == "shape_curve":
        header = ["n", "a", "rows", "reps", "g_hat", "stderr", "g_analytic", "band"]
        rows = [[e[h] for h in header] for e in summary["per_a"]]
    else:  # pragma: no cover
        raise ValueError(f"unknown kind {kind!r}")
    return header, rows


# ---------------------------------------------------------------------------
# Run / resume
# ---------------------------------------------------------------------------


@dataclass
class ExperimentRecord:
    spec: ExperimentSpec
    rows: list[dict]
    summary: dict
    version: str
    wall_clock: float
    out_dir: Optional[Path] = None


def _read_completed(jsonl_path: Path) -> list[dict]:
    rows = []
    if not jsonl_path.exists():
        return rows
    with open(jsonl_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError:
                break  # partial trailing line from an interrupted run
    return rows


def run(
    spec: ExperimentSpec,
    parallelism: int = 1,
    out_dir=None,
    resume: bool = False,
) -> ExperimentRecord:
    """Execute all replicates, summarize, and (optionally) persist.

    With ``out_dir`` set, writes spec.json, an append-only replicates.jsonl,
    summary.json, summary.csv, and run_meta.json.  With ``resume``, completed
    (i, j) units found in replicates.jsonl are skipped; the spec hash must
    match the stored one.
    """
    t0 = time.perf_counter()
    groups = spec.groups()
    rows: list[dict] = []
    jsonl_path = None

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        spec_path = out_dir / "spec.json"
        if spec_path.exists():
            stored = ExperimentSpec.from_dict(json.loads(spec_path.read_text(encoding="utf-8")))
            if stored.spec_hash() != spec.spec_hash():
                raise ConfigError(
                    f"spec hash mismatch on resume: {spec_path} holds {stored.spec_hash()[:12]}, "
                    f"requested {spec.spec_hash()[:12]}"
                )
            if not resume:
                raise ConfigError(f"{out_dir} already holds a record; pass resume=True to continue")
        else:
            spec_path.write_text(
                json.dumps(spec.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
            )
        jsonl_path = out_dir / "replicates.jsonl"
        if resume:
            rows = _read_completed(jsonl_path)

    done = {(int(r["i"]), int(r["j"])) for r in rows}
    units = [
        (i, j)
        for i in range(len(groups))
        for j in range(spec.replicates)
        if (i, j) not in done
    ]

    appender = None
    if jsonl_path is not None:
        appender = open(jsonl_path, "a", encoding="utf-8")

    try:
        if parallelism <= 1 or not units:
            for i, j in units:
                row = _run_unit(spec, i, j)
                rows.append(row)
                if appender:
                    appender.write(json.dumps(row, sort_keys=True) + "\n")
                    appender.flush()
        else:
            _kernels.warm_up()  # compile in the parent so forked workers inherit
            canonical = spec.canonical_json()
            args = [(canonical, i, j) for i, j in units]
            chunk = max(1, len(args) // (parallelism * 8))
            with ProcessPoolExecutor(max_workers=parallelism) as pool:
                for row in pool.map(_unit_star, args, chunksize=chunk):
                    rows.append(row)
                    if appender:
                        appender.write(json.dumps(row, sort_keys=True) + "\n")
                        appender.flush()
    finally:
        if appender:
            appender.close()

    rows.sort(key=lambda r: (int(r["i"]), int(r["j"])))
    summary = summarize(spec, rows)
    wall = time.perf_counter() - t0

    if out_dir is not None:
        (out_dir / "summary.json").write_text(
            json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        header, table = summary_table(summary)
        with open(out_dir / "summary.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(table)
        (out_dir / "run_meta.json").write_text(
            json.dumps(
                {
                    "wall_clock_s": wall,
                    "parallelism": parallelism,
                    "units_run": len(units),
                    "version": __version__,
                },
                sort_keys=True,
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )

    return ExperimentRecord(
        spec=spec, rows=rows, summary=summary, version=__version__, wall_clock=wall, out_dir=out_dir
    )


def load_record(record_dir) -> tuple[ExperimentSpec, list[dict], dict]:
    """Read back a persisted record directory."""
    record_dir = Path(record_dir)
    spec = ExperimentSpec.from_dict(
        json.loads((record_dir / "spec.json").read_text(encoding="utf-8"))
    )
    rows = _read_completed(record_dir / "replicates.jsonl")
    summary_path = record_dir / "summary.json"
    summary = json.loads(summary_path.read_text(encoding="utf-8")) if summary_path.exists() else {}
    return spec, rows, summary
