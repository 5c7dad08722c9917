"""Box-constrained maximization: coarse grid, then coordinate refinement."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


def grid_coordinate_ascent(
    objective: Callable[..., np.ndarray],
    bounds: Sequence[tuple[float, float]],
    coarse: Sequence[int],
    rounds: int = 3,
    shrink: float = 0.2,
    line_points: int = 11,
) -> tuple[np.ndarray, float, float]:
    """Maximize a vectorized objective over a box.

    ``objective(*coords)`` must accept broadcastable arrays, one per
    coordinate.  A full grid with ``coarse[i]`` points per axis seeds the
    search; each refinement round scans every coordinate over +/- one step
    around the incumbent and then shrinks the steps by ``shrink``.

    Returns ``(x_best, f_best, f_coarse)``.
    """
    axes = [np.linspace(lo, hi, n) for (lo, hi), n in zip(bounds, coarse)]
    mesh = np.meshgrid(*axes, indexing="ij")
    values = np.asarray(objective(*mesh))
    values = np.where(np.isfinite(values), values, -np.inf)
    flat = int(np.argmax(values))
    idx = np.unravel_index(flat, values.shape)
    x = np.array([ax[i] for ax, i in zip(axes, idx)], dtype=float)
    f_best = f_coarse = float(values[idx])
    steps = np.array([(hi - lo) / max(n - 1, 1) for (lo, hi), n in zip(bounds, coarse)])
    offsets = np.linspace(-1.0, 1.0, line_points)
    for _ in range(rounds):
        for i, (lo, hi) in enumerate(bounds):
            if hi <= lo:
                continue
            cand = np.clip(x[i] + steps[i] * offsets, lo, hi)
            coords = [np.full_like(cand, xv) for xv in x]
            coords[i] = cand
            vals = np.asarray(objective(*coords))
            vals = np.where(np.isfinite(vals), vals, -np.inf)
            j = int(np.argmax(vals))
            if vals[j] > f_best:
                f_best = float(vals[j])
                x[i] = cand[j]
        steps *= shrink
    return x, f_best, f_coarse


def grid_coordinate_descent(objective, bounds, coarse, **kwargs):
    """Minimization counterpart of :func:`grid_coordinate_ascent`."""
    x, f, f0 = grid_coordinate_ascent(lambda *c: -np.asarray(objective(*c)), bounds, coarse, **kwargs)
    return x, -f, -f0
