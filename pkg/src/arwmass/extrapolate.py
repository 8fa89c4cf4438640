"""Aitken delta-squared extrapolation for geometrically sampled sequences."""

from __future__ import annotations

import numpy as np


def aitken_limit(values) -> tuple[float, float]:
    """Iterated Aitken delta-squared acceleration.

    Returns ``(limit, error_estimate)`` where the error estimate is the size
    of the last correction applied.  Sequences that are already constant to
    machine precision pass through unchanged (their Aitken denominators
    vanish).
    """
    seq = np.asarray(values, dtype=float)
    if seq.size == 0:
        raise ValueError("empty sequence")
    if seq.size < 3:
        limit = float(seq[-1])
        error = float(abs(seq[-1] - seq[0])) if seq.size == 2 else float("nan")
        return limit, error

    scale = float(np.max(np.abs(seq))) or 1.0
    limit = float(seq[-1])
    error = float(abs(seq[-1] - seq[-2]))
    current = seq
    while current.size >= 3:
        d1 = current[1:] - current[:-1]
        d2 = d1[1:] - d1[:-1]
        ok = np.abs(d2) > 1e-13 * scale
        if not ok.any():
            break
        accel = current[:-2] - d1[:-1] ** 2 / np.where(ok, d2, 1.0)
        accel = np.where(ok, accel, current[2:])
        error = float(abs(accel[-1] - limit))
        limit = float(accel[-1])
        current = accel
    return limit, error
