"""Finite-support weight laws with a hi/lo mode threshold.

A weight law is a finite set of (value, probability) atoms on the non-negative
reals, together with a threshold m that splits atoms into lo mode (value <= m)
and hi mode (value > m).  Atom values are read as exact decimal rationals and
rescaled to a common integer grid, so that every passage-time computation
downstream runs in exact integer arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

__all__ = ["WeightModel", "make_model"]

# Guard against integer-scaled weights large enough to overflow the int64 DP.
_MAX_SCALED_VALUE = 1 << 40


def _as_fraction(value, what: str) -> Fraction:
    """Parse a number as an exact rational; floats are read as decimal literals."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"{what} must be finite, got {value!r}")
        # repr(float) is the shortest decimal that round-trips, so 0.1 -> 1/10.
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"{what} must be a number, got {type(value).__name__}")


@dataclass(frozen=True, eq=False)
class WeightModel:
    """Immutable finitely-atomic weight law plus derived mode quantities.

    Attributes
    ----------
    atoms: tuple of (value, probability) with exact Fraction values, sorted by
        value, duplicates merged, probabilities normalized to sum to 1.
    threshold: the hi/lo threshold m as an exact Fraction.
    scale: least common denominator; ``value * scale`` is an integer for every
        atom value and for the threshold.
    p: probability of hi mode, P(w > m).
    """

    atoms: tuple[tuple[Fraction, float], ...]
    threshold: Fraction
    scale: int
    values_int: np.ndarray
    threshold_int: int
    probs: np.ndarray
    p: float
    mean_hi: float
    mean_lo: float

    @property
    def m(self) -> float:
        return float(self.threshold)

    @property
    def C(self) -> float:
        """Maximum atom value (support upper end)."""
        return float(self.atoms[-1][0])

    @property
    def C_int(self) -> int:
        return int(self.values_int[-1])

    @property
    def values(self) -> np.ndarray:
        return self.values_int / self.scale

    @property
    def hi_mask(self) -> np.ndarray:
        return self.values_int > self.threshold_int

    # -- sampling ------------------------------------------------------------

    def sample_indices(self, rng: np.random.Generator, size=None) -> np.ndarray:
        """Atom indices distributed per the law; arrays fill in C order."""
        return rng.choice(len(self.probs), size=size, p=self.probs)

    def sample(self, rng: np.random.Generator, size=None):
        """Draw values from the unconditional law."""
        return self.values[self.sample_indices(rng, size)]

    def _mode_split(self, mode: str) -> tuple[np.ndarray, np.ndarray]:
        if mode not in ("hi", "lo"):
            raise ValueError(f"mode must be 'hi' or 'lo', got {mode!r}")
        mask = self.hi_mask if mode == "hi" else ~self.hi_mask
        probs = self.probs[mask]
        return self.values_int[mask], probs / probs.sum()

    def sample_conditional(self, mode: str, rng: np.random.Generator, size=None):
        """Draw values from the law conditioned on the given mode."""
        return self.sample_conditional_int(mode, rng, size) / self.scale

    def sample_conditional_int(self, mode: str, rng: np.random.Generator, size=None) -> np.ndarray:
        """Integer-scaled conditional draws (internal grid units)."""
        vals, probs = self._mode_split(mode)
        return vals[rng.choice(len(probs), size=size, p=probs)]

    # -- config round-trip -----------------------------------------------------

    def to_config(self) -> dict:
        return {
            "atoms": [[float(v), float(q)] for v, q in self.atoms],
            "m": float(self.threshold),
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "WeightModel":
        if "atoms" not in cfg:
            raise ValueError("model config missing 'atoms'")
        if "m" not in cfg:
            raise ValueError("model config missing 'm'")
        return make_model(cfg["atoms"], cfg["m"])

    def __repr__(self) -> str:  # keep test failure output readable
        pairs = ", ".join(f"{float(v):g}:{q:g}" for v, q in self.atoms)
        return f"WeightModel({pairs}; m={float(self.threshold):g}, p={self.p:g})"


def make_model(atoms: Sequence, threshold_m) -> WeightModel:
    """Build a validated weight model from (value, probability) pairs.

    Probabilities must sum to 1 within 1e-12 and are then renormalized, so
    decimal config literals round-trip cleanly.  The law must put positive
    mass both above and strictly at-or-below the threshold.
    """
    if not atoms:
        raise ValueError("weight model needs at least one atom")

    merged: dict[Fraction, float] = {}
    for entry in atoms:
        try:
            value, prob = entry
        except (TypeError, ValueError):
            raise ValueError(f"atom {entry!r} is not a (value, probability) pair") from None
        v = _as_fraction(value, "atom value")
        q = float(prob)
        if v < 0:
            raise ValueError(f"atom value {float(v)} is negative; weights must be non-negative")
        if not (0.0 < q <= 1.0):
            raise ValueError(f"atom probability {q} is outside (0, 1]")
        merged[v] = merged.get(v, 0.0) + q

    total = sum(merged.values())
    if abs(total - 1.0) > 1e-12:
        raise ValueError(f"atom probabilities sum to {total!r}, not 1 (tolerance 1e-12)")

    if len(merged) < 2:
        raise ValueError("degenerate law: need at least two distinct atom values")

    m = _as_fraction(threshold_m, "threshold m")
    if m < 0:
        raise ValueError(f"threshold m must be non-negative, got {float(m)}")

    values = sorted(merged)
    probs = np.array([merged[v] / total for v in values], dtype=np.float64)

    denom_lcm = m.denominator
    for v in values:
        denom_lcm = math.lcm(denom_lcm, v.denominator)
    scale = denom_lcm
    values_int = np.array([int(v * scale) for v in values], dtype=np.int64)
    threshold_int = int(m * scale)
    if values_int[-1] > _MAX_SCALED_VALUE:
        raise ValueError(
            f"atom values scale to integers up to {values_int[-1]}; "
            "use coarser decimals to keep the integer grid in range"
        )

    hi = values_int > threshold_int
    p = float(probs[hi].sum())
    if p <= 0.0 or p >= 1.0:
        raise ValueError(f"P(w > m) = {p}; need both modes to carry positive mass")

    vals_f = values_int / scale
    mean_hi = float(np.dot(vals_f[hi], probs[hi]) / probs[hi].sum())
    mean_lo = float(np.dot(vals_f[~hi], probs[~hi]) / probs[~hi].sum())

    return WeightModel(
        atoms=tuple((v, float(merged[v] / total)) for v in values),
        threshold=m,
        scale=scale,
        values_int=values_int,
        threshold_int=threshold_int,
        probs=probs,
        p=p,
        mean_hi=mean_hi,
        mean_lo=mean_lo,
    )
