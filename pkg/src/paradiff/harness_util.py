"""Small numeric helpers for the harness."""

from __future__ import annotations

import numpy as np


def fit_slope(nt_values, errors, floor: float = 1e-14, rate_window: float = 0.15) -> float:
    """Least-squares slope of log(error) vs log(1/Nt) on the asymptotic tail.

    Points at or below ``floor`` (roundoff plateau) and points past saturation
    (no longer decaying) are discarded.  High-order methods show a steep
    pre-asymptotic transient, so the fit walks backwards from the finest
    resolution and keeps points only while their local pairwise rate matches
    the final rate within ``rate_window`` (relative).  Needs two points.
    """
    nts = np.asarray(nt_values, dtype=float)
    errs = np.asarray(errors, dtype=float)
    kept = []
    prev = None
    for i in range(nts.size):
        if errs[i] <= floor:
            break
        if prev is not None and errs[i] >= errs[prev]:
            break
        kept.append(i)
        prev = i
    if len(kept) < 2:
        return float("nan")
    sel = np.array(kept)
    x = np.log(1.0 / nts[sel])
    y = np.log(errs[sel])
    pair = (y[1:] - y[:-1]) / (x[1:] - x[:-1])
    last = pair[-1]
    start = pair.size - 1
    while start > 0 and abs(pair[start - 1] - last) <= rate_window * abs(last) + 0.05:
        start -= 1
    xs, ys = x[start:], y[start:]
    slope, _ = np.polyfit(xs, ys, 1)
    return float(slope)
