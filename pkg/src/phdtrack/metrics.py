"""Set-to-set error metrics for tracker output against truth.

The headline metric is OSPA: optimal subpattern assignment distance of
order p with cutoff c, reported together with its localization and
cardinality parts.  Base distances are Euclidean and truncated at the
cutoff before the assignment is solved, so one far-away pairing cannot
trade off against the rest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class OspaParams:
    """Cutoff c > 0 and order p >= 1."""

    cutoff: float = 100.0
    order: float = 2.0

    def __post_init__(self):
        if not (self.cutoff > 0):
            raise ValueError(f"cutoff must be > 0, got {self.cutoff}")
        if not (self.order >= 1):
            raise ValueError(f"order must be >= 1, got {self.order}")


def assignment_min_cost(cost: np.ndarray) -> tuple[np.ndarray, float]:
    """Minimum-cost assignment of a rectangular cost matrix.

    Returns (pairs, total): pairs is (min(m, n), 2) of row/column indices,
    total the summed cost over those pairs.  Every row (or column,
    whichever side is smaller) is matched exactly once.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.size == 0:
        raise ValueError(f"cost must be a nonempty 2-D matrix, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost entries must be finite")
    rows, cols = linear_sum_assignment(cost)
    return np.stack([rows, cols], axis=1), float(cost[rows, cols].sum())


def _as_points(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.size == 0:
        return arr.reshape(0, 1)
    return np.atleast_2d(arr)


def ospa(x, y, params: OspaParams = OspaParams()) -> tuple[float, float, float]:
    """OSPA distance between two point sets, as (total, localization, cardinality).

    Both sets are arrays of equal-dimension vectors; either may be empty.
    Two empty sets are at distance zero; an empty set against n points is
    at the cutoff.  The decomposition satisfies
    total**p == localization**p + cardinality**p.
    """
    c = params.cutoff
    p = params.order
    xs = _as_points(x)
    ys = _as_points(y)
    if len(xs) > len(ys):
        xs, ys = ys, xs
    m, n = len(xs), len(ys)
    if n == 0:
        return 0.0, 0.0, 0.0
    if m == 0:
        return c, 0.0, c
    if xs.shape[1] != ys.shape[1]:
        raise ValueError(f"point dimensions differ: {xs.shape[1]} vs {ys.shape[1]}")
    dist = np.linalg.norm(xs[:, None, :] - ys[None, :, :], axis=2)
    truncated = np.minimum(dist, c) ** p
    _, loc_term = assignment_min_cost(truncated)
    card_term = c ** p * (n - m)
    total = ((loc_term + card_term) / n) ** (1.0 / p)
    loc = (loc_term / n) ** (1.0 / p)
    card = (card_term / n) ** (1.0 / p)
    return float(total), float(loc), float(card)
