"""Small shared numeric/seed helpers."""

from __future__ import annotations

import math

import numpy as np


def snap_ceil(x: float, rel: float = 1e-9) -> int:
    """Ceiling that forgives float noise: values within rel of an integer snap to it.

    Quantities like 0.05 * delta**(-5/3) are exact integers in real arithmetic
    for the dyadic spacing grid but land an ulp above in floats; a bare ceil
    would overshoot by one.
    """
    if not math.isfinite(x):
        raise ValueError(f"cannot take ceiling of {x!r}")
    nearest = round(x)
    if abs(x - nearest) <= rel * max(1.0, abs(x)):
        return int(nearest)
    return int(math.ceil(x))


def derive_seed(master: int, label: str) -> int:
    """Deterministic child seed for a named stage of a seeded pipeline.

    Distinct labels give statistically independent streams; the mapping is
    fixed so external callers can reproduce any stage in isolation.
    """
    codes = {"simulate": 1, "draws": 2}
    if label not in codes:
        raise ValueError(f"unknown seed label {label!r}; expected one of {sorted(codes)}")
    ss = np.random.SeedSequence(entropy=master, spawn_key=(codes[label],))
    return int(ss.generate_state(1, np.uint64)[0])
