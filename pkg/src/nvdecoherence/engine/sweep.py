"""Parameter sweeps over schedule parameters."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import InsufficientData, InvalidParam
from ..noise import StaticGaussian
from ..schedule.analytic import analytic_t2, pair_coefficients, two_channel_coefficients
from ..schedule.core import rebuild
from .ensemble import run_ensemble
from .fitting import fit_gaussian_decay

SWEEP_PARAMS = ("lambda", "mu", "mu1", "mu2", "tau", "tau1", "tau2")


@dataclass
class SweepRow:
    value: float
    fits: dict = field(default_factory=dict)
    analytic: dict = field(default_factory=dict)
    infeasible: bool = False
    errors: dict = field(default_factory=dict)
    result: Optional[object] = None


def _analytic_row(spec, schedule):
    if not isinstance(spec.noise, StaticGaussian) or spec.noise.sigma_b == 0:
        return {}
    coeffs = pair_coefficients(schedule, spec.dephase)
    return {p: analytic_t2(c, spec.noise.sigma_b) for p, c in coeffs.as_dict().items()}


def _infeasible_analytic(spec, params):
    """Closed-form T2 for a two-channel point outside the realisable region."""
    if not isinstance(spec.noise, StaticGaussian) or spec.noise.sigma_b == 0:
        return {}
    if spec.schedule.kind != "two_channel":
        return {}
    lam = params.get("lambda", spec.schedule.lam)
    mu1 = params.get("mu1", spec.schedule.params.get("mu1", 0.0))
    mu2 = params.get("mu2", spec.schedule.params.get("mu2", 0.0))
    for k in ("tau1", "tau2"):
        if k in params:
            mu = params[k] * lam / 2
            mu1, mu2 = (mu, mu2) if k == "tau1" else (mu1, mu)
    c12, c13, c23 = two_channel_coefficients(lam, mu1, mu2)
    sb = spec.noise.sigma_b
    return {(0, 1): analytic_t2(c12, sb), (0, 2): analytic_t2(c13, sb), (1, 2): analytic_t2(c23, sb)}


def sweep(template, param_name, values, prepare: Optional[Callable] = None, workers=1, keep_results=False):
    """
    Run an ensemble and a Gaussian fit for each value of one schedule parameter.

    Parameters
    ----------
    template : SimulationSpec
        Spec whose schedule is rebuilt with ``param_name = value``.
    param_name : str
        One of ``lambda, mu, mu1, mu2, tau, tau1, tau2``.
    values : sequence of float
    prepare : callable, optional
        ``prepare(spec, value) -> spec`` applied after the schedule is
        rebuilt, e.g. to retune a detuning with lambda.
    workers : int

    Returns
    -------
    list of SweepRow
        In the order of ``values``. Points the schedule cannot realise are
        flagged ``infeasible`` and carry only the analytic column.
    """
    if param_name not in SWEEP_PARAMS:
        raise InvalidParam(f"cannot sweep {param_name!r}; choose from {SWEEP_PARAMS}")
    rows = []
    for v in values:
        v = float(v)
        if not math.isfinite(v):
            raise InvalidParam(f"sweep value {v} is not finite")
        try:
            schedule = rebuild(template.schedule, **{param_name: v})
        except InvalidParam as exc:
            row = SweepRow(v, infeasible=True, analytic=_infeasible_analytic(template, {param_name: v}))
            row.errors["schedule"] = str(exc)
            rows.append(row)
            continue
        spec = template.replace(schedule=schedule)
        if prepare is not None:
            spec = prepare(spec, v)
        res = run_ensemble(spec, workers=workers)
        row = SweepRow(v, analytic=_analytic_row(spec, schedule), result=res if keep_results else None)
        for s in res.coherences:
            try:
                row.fits[s.pair] = fit_gaussian_decay(s)
            except InsufficientData as exc:
                row.fits[s.pair] = None
                row.errors[s.pair] = str(exc)
        rows.append(row)
    return rows


def sweep_table(rows, pairs=None):
    """Flatten sweep rows into a 2-D float array ``[value, t2_fit..., t2_analytic..., infeasible]``."""
    if pairs is None:
        pairs = sorted({p for r in rows for p in list(r.fits) + list(r.analytic)})
    out = []
    for r in rows:
        fit = [r.fits[p].t2 if r.fits.get(p) is not None else np.nan for p in pairs]
        ana = [r.analytic.get(p, np.nan) for p in pairs]
        out.append([r.value, *fit, *ana, float(r.infeasible)])
    return pairs, np.array(out, dtype=float)
