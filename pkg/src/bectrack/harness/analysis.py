"""Reductions of logged time series (times in Rabi periods)."""

from __future__ import annotations

import numpy as np


def convergence_time(times, fid, threshold: float = 0.99, window: float = 10.0) -> float:
    """Earliest t with F(t) > threshold and mean F over (t, t + window] > threshold.

    Returns ``nan`` if no such time exists with the full window inside the
    log.
    """
    times = np.asarray(times, dtype=float)
    fid = np.asarray(fid, dtype=float)
    if times.shape != fid.shape:
        raise ValueError("times and fidelity differ in length")
    csum = np.concatenate([[0.0], np.cumsum(fid)])
    tol = 1e-9
    ends = np.searchsorted(times, times + window + tol, side="right")
    for i in np.flatnonzero(fid > threshold):
        end = ends[i]
        if times[i] + window > times[-1] + tol:
            break
        count = end - (i + 1)
        if count and (csum[end] - csum[i + 1]) / count > threshold:
            return float(times[i])
    return float("nan")


def longest_run_above(times, values, threshold: float) -> float:
    """Duration of the longest contiguous stretch of samples above ``threshold``."""
    times = np.asarray(times, dtype=float)
    above = np.asarray(values) > threshold
    best, start = 0.0, None
    for i, flag in enumerate(above):
        if flag and start is None:
            start = i
        if start is not None and (not flag or i == len(above) - 1):
            stop = i if flag else i - 1
            best = max(best, times[stop] - times[start])
            start = None
    return float(best)


def window_mask(times, t0: float, t1: float) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    return (times >= t0 - 1e-9) & (times <= t1 + 1e-9)


def oscillation_amplitude(times, values, t0: float, t1: float) -> float:
    """Half the peak-to-peak excursion within [t0, t1]."""
    sel = np.asarray(values)[window_mask(times, t0, t1)]
    if sel.size == 0:
        raise ValueError(f"no samples in [{t0}, {t1}]")
    return 0.5 * float(sel.max() - sel.min())


def rms_difference(times, a, b, t0: float, t1: float) -> float:
    mask = window_mask(times, t0, t1)
    diff = np.asarray(a)[mask] - np.asarray(b)[mask]
    return float(np.sqrt(np.mean(diff**2)))


def convergence_order(steps, errors) -> float:
    """Least-squares slope of log(error) against log(step)."""
    steps = np.asarray(steps, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if np.any(errors <= 0):
        raise ValueError("errors must be positive to fit an order")
    slope, _ = np.polyfit(np.log(steps), np.log(errors), 1)
    return float(slope)
