"""Finite-n surrogates for limsup root rates of error sequences."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TooFewSamples

MIN_SAMPLES = 8


@dataclass
class FitDiagnostics:
    used_n: list = field(default_factory=list)
    dropped_n: list = field(default_factory=list)
    hull_n: list = field(default_factory=list)
    slope: float = float("nan")
    intercept: float = float("nan")
    all_zero: bool = False


def upper_concave_envelope(x, y):
    """Vertices (indices into sorted x) of the upper concave hull of (x, y)."""
    order = np.argsort(x, kind="stable")
    hull: list[int] = []
    for i in order:
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(int(i))
    return hull


def fit_geometric_rate(n_values, errors, floor: float = 1e-15, min_samples: int = MIN_SAMPLES):
    """Estimate ``limsup err_n^{1/n}`` from a finite sequence.

    Samples with ``err <= floor`` are dropped.  The remaining points
    ``(n, log err_n)`` are replaced by their upper concave envelope, and the
    slope is the least-squares slope of that envelope over the upper half of
    the sampled range.  Returns ``(exp(slope), FitDiagnostics)``; if nothing
    survives the floor the rate is 0 with ``all_zero`` set.
    """
    n = np.asarray(n_values, dtype=float)
    e = np.abs(np.asarray(errors, dtype=float))
    if n.shape != e.shape:
        raise ValueError("n_values and errors must have equal length")
    keep = np.isfinite(e) & (e > floor)
    diag = FitDiagnostics(used_n=n[keep].astype(int).tolist(), dropped_n=n[~keep].astype(int).tolist())
    if not keep.any():
        diag.all_zero = True
        return 0.0, diag
    if keep.sum() < min_samples:
        raise TooFewSamples(f"{int(keep.sum())} usable samples, need {min_samples}")
    x, y = n[keep], np.log(e[keep])
    hull = upper_concave_envelope(x, y)
    diag.hull_n = [int(x[i]) for i in hull]
    hx, hy = x[hull], y[hull]
    env = np.interp(x, hx, hy)
    sel = x >= np.median(x)
    xs, ys = x[sel], env[sel]
    if np.ptp(xs) == 0:
        xs, ys = x, env
    slope, intercept = np.polyfit(xs, ys, 1)
    diag.slope, diag.intercept = float(slope), float(intercept)
    return float(np.exp(slope)), diag
