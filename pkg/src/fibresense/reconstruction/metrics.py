from dataclasses import dataclass

import numpy as np


@dataclass
class Metrics:
    rmse: float
    r2: float
    nrmse: float
    r2_defined: bool = True


def evaluate(pred, ref, value_range=None):
    """RMSE, R^2 and range-normalised RMSE of one prediction column.

    ``value_range`` is the range of motion (or strain span) used to normalise
    the RMSE; it defaults to the reference's peak-to-peak. R^2 of a
    constant reference is undefined and reported as NaN with
    ``r2_defined=False``.
    """
    p = np.asarray(pred, dtype=float).ravel()
    r = np.asarray(ref, dtype=float).ravel()
    if p.shape != r.shape:
        raise ValueError("prediction and reference lengths differ")
    err = p - r
    rmse = float(np.sqrt(np.mean(err * err)))
    ss_tot = float(np.sum((r - r.mean()) ** 2))
    if ss_tot == 0:
        r2, ok = float("nan"), False
    else:
        r2, ok = 1.0 - float(np.sum(err * err)) / ss_tot, True
    span = float(np.ptp(r)) if value_range is None else float(value_range)
    nrmse = rmse / span if span > 0 else float("nan")
    return Metrics(rmse, r2, nrmse, ok)


def evaluate_columns(pred, ref, names, ranges=None):
    """Per-column metrics plus an ``aggregate`` row over all values."""
    pred = np.atleast_2d(np.asarray(pred, dtype=float).T).T
    ref = np.atleast_2d(np.asarray(ref, dtype=float).T).T
    ranges = ranges or [None] * len(names)
    out = {name: evaluate(pred[:, k], ref[:, k], ranges[k]) for k, name in enumerate(names)}
    span = None if all(x is None for x in ranges) else float(np.mean([x for x in ranges if x]))
    out["aggregate"] = evaluate(pred, ref, span)
    return out
