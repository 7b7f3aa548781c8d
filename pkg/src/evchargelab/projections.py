"""Euclidean projections onto box-constrained sum sets.

The workhorse is the projection onto {x : 0 <= x <= upper, sum(x) = total},
computed by bisection on the shift parameter of clip(v - tau, 0, upper).
"""

from __future__ import annotations

import numpy as np

_BISECT_STEPS = 100


def project_capped_simplex(v: np.ndarray, upper: np.ndarray, total: float) -> np.ndarray:
    """Project v onto {x : 0 <= x <= upper, sum(x) = total}.

    Requires 0 <= total <= sum(upper); raises otherwise.
    """
    v = np.asarray(v, dtype=float)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), v.shape)
    if total < -1e-12 or total > upper.sum() + 1e-9:
        raise ValueError(f"total {total} outside [0, {upper.sum()}]")
    total = min(max(total, 0.0), float(upper.sum()))
    if v.size == 0:
        return v.copy()
    lo = float(np.min(v - upper))
    hi = float(np.max(v))
    # clip(v - tau) is non-increasing in tau; sum spans [0, sum(upper)] on [lo, hi]
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        s = np.clip(v - mid, 0.0, upper).sum()
        if s > total:
            lo = mid
        else:
            hi = mid
    return np.clip(v - 0.5 * (lo + hi), 0.0, upper)


def project_box_capped_sum(v: np.ndarray, upper: np.ndarray, cap: float) -> np.ndarray:
    """Project v onto {x : 0 <= x <= upper, sum(x) <= cap}."""
    x = np.clip(np.asarray(v, dtype=float), 0.0, upper)
    if x.sum() <= cap:
        return x
    return project_capped_simplex(v, upper, cap)


def project_rows_capped_simplex(
    V: np.ndarray, upper_rows: np.ndarray, totals: np.ndarray, mask: np.ndarray
) -> np.ndarray:
    """Row-wise projection onto {0 <= x <= upper, sum over mask = total}.

    Entries outside each row's mask are fixed at zero. All rows are
    bisected simultaneously. upper_rows and totals are per-row scalars.
    """
    V = np.asarray(V, dtype=float)
    n, _ = V.shape
    upper = np.where(mask, upper_rows[:, None], 0.0)
    row_capacity = upper.sum(axis=1)
    if np.any(totals > row_capacity + 1e-9) or np.any(totals < -1e-12):
        bad = int(np.argmax(totals > row_capacity + 1e-9))
        raise ValueError(f"row {bad}: total {totals[bad]} outside [0, {row_capacity[bad]}]")
    t = np.clip(totals, 0.0, row_capacity)
    Vm = np.where(mask, V, 0.0)
    lo = (Vm - upper).min(axis=1)
    hi = Vm.max(axis=1)
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        s = np.clip(Vm - mid[:, None], 0.0, upper).sum(axis=1)
        too_big = s > t
        lo = np.where(too_big, mid, lo)
        hi = np.where(too_big, hi, mid)
    return np.clip(Vm - (0.5 * (lo + hi))[:, None], 0.0, upper)


def project_cols_capped_simplex(V: np.ndarray, upper: np.ndarray, totals: np.ndarray) -> np.ndarray:
    """Column-wise projection onto {x : 0 <= x <= upper[:, t], sum(x) = totals[t]}.

    upper is a full matrix of per-entry bounds; all columns are bisected
    simultaneously. Totals are clipped into [0, column capacity].
    """
    V = np.asarray(V, dtype=float)
    upper = np.asarray(upper, dtype=float)
    capacity = upper.sum(axis=0)
    if np.any(totals > capacity + 1e-9) or np.any(totals < -1e-12):
        bad = int(np.argmax((totals > capacity + 1e-9) | (totals < -1e-12)))
        raise ValueError(f"column {bad}: total {totals[bad]} outside [0, {capacity[bad]}]")
    t = np.clip(totals, 0.0, capacity)
    lo = (V - upper).min(axis=0)
    hi = V.max(axis=0)
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        s = np.clip(V - mid[None, :], 0.0, upper).sum(axis=0)
        too_big = s > t
        lo = np.where(too_big, mid, lo)
        hi = np.where(too_big, hi, mid)
    return np.clip(V - (0.5 * (lo + hi))[None, :], 0.0, upper)


def project_cols_box_capped(
    V: np.ndarray, upper_rows: np.ndarray, mask: np.ndarray, caps: np.ndarray
) -> np.ndarray:
    """Column-wise projection onto {0 <= x <= upper, sum(x) <= cap_t}."""
    V = np.asarray(V, dtype=float)
    upper = np.where(mask, upper_rows[:, None], 0.0)
    X = np.clip(np.where(mask, V, 0.0), 0.0, upper)
    sums = X.sum(axis=0)
    over = sums > caps
    if not np.any(over):
        return X
    for col in np.nonzero(over)[0]:
        X[:, col] = project_capped_simplex(V[:, col] * mask[:, col], upper[:, col], caps[col])
    return X
