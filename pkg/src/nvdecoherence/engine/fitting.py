"""Gaussian-decay fits of coherence magnitudes."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientData

MIN_POINTS = 5
DEFAULT_FLOOR = 0.05
NON_DECAYING_FACTOR = 1e3


@dataclass(frozen=True)
class T2Fit:
    """
    Result of fitting ``|rho(t)| = A exp(-(t/T2)^2)``.

    Attributes
    ----------
    amplitude : float
        Fitted ``A``.
    t2 : float
        Fitted decay time in us; ``inf`` when ``non_decaying`` is set.
    residual : float
        RMS residual of the log-domain fit.
    points_used : int
    t2_stderr : float
        One-sigma uncertainty of ``t2`` propagated from the fit covariance.
    non_decaying : bool
        The fitted T2 is not positive or exceeds 1e3 times the fit window.
    """

    amplitude: float
    t2: float
    residual: float
    points_used: int
    t2_stderr: float = math.nan
    non_decaying: bool = False


def _magnitudes(series):
    if hasattr(series, "times"):
        return np.asarray(series.times, float), np.abs(np.asarray(series.values))
    t, v = series
    return np.asarray(t, float), np.abs(np.asarray(v))


def fit_gaussian_decay(series, floor=DEFAULT_FLOOR):
    """
    Least-squares fit of ``ln|rho| = ln A - s t^2`` with ``T2 = s^{-1/2}``.

    Uses the leading run of points whose magnitude exceeds
    ``floor * |rho(0)|``; later points have sunk into Monte Carlo noise and
    are dropped even if they fluctuate back above the floor.

    Parameters
    ----------
    series : CoherenceSeries or (times, values)
    floor : float
        Relative threshold.

    Raises
    ------
    InsufficientData
        Fewer than five usable points.
    """
    t, mag = _magnitudes(series)
    if t.size == 0 or mag[0] == 0:
        raise InsufficientData("series is empty or starts at zero")
    above = mag > floor * mag[0]
    n = int(np.argmin(above)) if not above.all() else above.size
    if n < MIN_POINTS:
        raise InsufficientData(f"only {n} points above the floor (need {MIN_POINTS})")
    t, y = t[:n], np.log(mag[:n])
    X = np.column_stack([np.ones(n), -t ** 2])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    lnA, s = coef
    resid = y - X @ coef
    rms = float(np.sqrt(np.mean(resid ** 2)))
    window = float(t[-1] - t[0])
    if s <= 0 or s * (NON_DECAYING_FACTOR * window) ** 2 < 1:
        return T2Fit(float(np.exp(lnA)), math.inf, rms, n, math.nan, True)
    dof = n - 2
    s_var = math.nan
    if dof > 0:
        cov = np.linalg.inv(X.T @ X) * (resid @ resid) / dof
        s_var = cov[1, 1]
    t2 = s ** -0.5
    # dT2/ds = -T2 / (2 s)
    t2_err = 0.5 * t2 / s * math.sqrt(s_var) if math.isfinite(s_var) else math.nan
    return T2Fit(float(np.exp(lnA)), float(t2), rms, n, float(t2_err), False)
