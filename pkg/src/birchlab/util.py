"""Shared plumbing: error types, budgets, fast uniform-grid interpolation,
canonical hashing, and CSV/JSON emission at round-trip precision."""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np


class BudgetError(RuntimeError):
    """An operation refused because its estimated cost exceeds the budget."""

    def __init__(self, what: str, estimated: float, budget: float):
        self.what = what
        self.estimated = estimated
        self.budget = budget
        super().__init__(
            f"{what}: estimated cost {estimated:.3g} exceeds budget {budget:.3g}"
        )


class InvalidConfigError(ValueError):
    """Configuration or argument rejected before any work is done."""


def check_budget(what: str, estimated: float, budget: float) -> None:
    if estimated > budget:
        raise BudgetError(what, estimated, budget)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def stable_hash(obj) -> str:
    """16-hex-digit digest of the canonical JSON form of obj."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]


def fmt_float(x: float) -> str:
    """17 significant digits: parses back to the identical float64."""
    return f"{x:.17g}"


def write_csv(path, header, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(
                ",".join(fmt_float(v) if isinstance(v, float) else str(v) for v in row)
                + "\n"
            )


class UniformTable:
    """Linear interpolation on a uniformly spaced table.

    Much faster than np.interp (no binary search); out-of-range arguments
    clamp to the end values, so tables must extend past the needed range.
    """

    def __init__(self, x0: float, x1: float, values: np.ndarray):
        if x1 <= x0 or len(values) < 2:
            raise InvalidConfigError("degenerate interpolation table")
        self.x0 = float(x0)
        self.x1 = float(x1)
        self.values = np.asarray(values)
        self.inv_step = (len(values) - 1) / (self.x1 - self.x0)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        t = (np.asarray(x, dtype=np.float64) - self.x0) * self.inv_step
        t = np.clip(t, 0.0, len(self.values) - 1.000001)
        idx = t.astype(np.intp)
        frac = t - idx
        lo = self.values[idx]
        hi = self.values[idx + 1]
        return lo + (hi - lo) * frac


def theil_sen_slope(x, y) -> float:
    """Median of pairwise slopes; robust trend estimate."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slopes = []
    for i in range(len(x)):
        for j in range(i + 1, len(x)):
            if x[j] != x[i]:
                slopes.append((y[j] - y[i]) / (x[j] - x[i]))
    return float(np.median(slopes))


def lsq_slope(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm = x - x.mean()
    return float(np.dot(xm, y - y.mean()) / np.dot(xm, xm))


def e(x):
    """e(x) = exp(2*pi*i*x), the standard additive character."""
    return np.exp(2j * math.pi * np.asarray(x))
