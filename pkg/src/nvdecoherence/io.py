"""
CSV/JSON export of simulation results and run manifests.

CSV files start with ``#meta`` comment lines holding the run description as
JSON, followed by a plain header row and numeric rows. Floats are written
with ``repr`` so equal results give byte-identical bodies.
"""
from __future__ import annotations

import json
import math
import platform
from dataclasses import asdict, is_dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from . import __version__
from .model import NVParams, QuditModel
from .noise import OrnsteinUhlenbeck, StaticGaussian
from .schedule.dsl import emit_sequence_dsl

META_PREFIX = "#meta "


def _num(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if is_dataclass(obj):
        return _jsonable(asdict(obj))
    return obj


def describe_model(model):
    if isinstance(model, NVParams):
        d = asdict(model)
        d["type"] = "nv"
        return d
    return {"type": "qudit", "dim": model.dim, "eps": model.eps.tolist(), "J": model.J.tolist(),
            "dephase": model.dephase.tolist(), "labels": list(model.labels)}


def describe_noise(noise):
    if isinstance(noise, StaticGaussian):
        return {"type": "static", "sigma_b": noise.sigma_b}
    if isinstance(noise, OrnsteinUhlenbeck):
        return {"type": "ou", "l": noise.l, "R": noise.R}
    return {"type": type(noise).__name__}


def describe_schedule(schedule):
    return {"kind": schedule.kind, "params": dict(schedule.params), "dt": schedule.dt,
            "repeats": schedule.repeats, "program": emit_sequence_dsl(schedule)}


def describe_spec(spec):
    """JSON-ready description of a :class:`SimulationSpec` (internal units: us, rad/us)."""
    psi = np.asarray(spec.initial_state)
    return _jsonable({
        "model": describe_model(spec.model),
        "schedule": describe_schedule(spec.schedule),
        "noise": describe_noise(spec.noise),
        "initial_state": [[z.real, z.imag] for z in psi],
        "trajectories": spec.trajectories,
        "sample_stride": spec.sample_stride,
        "master_seed": spec.master_seed,
        "chunk_size": spec.chunk_size,
        "substep_phase": spec.substep_phase,
    })


def series_columns(dim):
    cols = ["time_us"]
    for i, j in combinations(range(dim), 2):
        lab = f"{i + 1}{j + 1}"
        cols += [f"re_rho_{lab}", f"im_rho_{lab}", f"abs_rho_{lab}", f"stderr_{lab}"]
    cols += [f"pop_{m + 1}" for m in range(dim)]
    return cols


def series_rows(result):
    """Rows matching :func:`series_columns` for an :class:`EnsembleResult`."""
    d = result.rho.shape[1]
    pops = result.populations
    rows = []
    for k, t in enumerate(result.times):
        row = [t]
        for i, j in combinations(range(d), 2):
            z = result.rho[k, i, j]
            row += [z.real, z.imag, abs(z), result.stderr[k, i, j]]
        row += list(pops[k])
        rows.append(row)
    return rows


def format_csv(columns, rows, meta=None):
    lines = []
    if meta is not None:
        lines.append(META_PREFIX + json.dumps(_jsonable(meta), sort_keys=True))
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_num(x) if not isinstance(x, str) else x for x in row))
    return "\n".join(lines) + "\n"


def format_json(columns, rows, meta=None):
    data = {c: [None if (isinstance(r[k], float) and math.isnan(r[k])) else _jsonable(r[k]) for r in rows]
            for k, c in enumerate(columns)}
    return json.dumps({"meta": _jsonable(meta), "columns": list(columns), "data": data},
                      sort_keys=True, indent=1) + "\n"


def write_table(path, columns, rows, meta=None, fmt="csv"):
    """Write a table as CSV or JSON; returns the path written (suffix set by format)."""
    path = Path(path)
    if path.suffix != "." + fmt:
        # append rather than with_suffix: stems like "lambda_0.25" contain dots
        path = path.with_name(path.name + "." + fmt)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = format_csv(columns, rows, meta) if fmt == "csv" else format_json(columns, rows, meta)
    path.write_text(text)
    return path


def write_series(path, result, meta=None, fmt="csv"):
    meta = dict(meta or {})
    meta.setdefault("spec", describe_spec(result.spec))
    return write_table(path, series_columns(result.rho.shape[1]), series_rows(result), meta, fmt)


def read_csv(path):
    """Parse a file written by :func:`format_csv` into ``(meta, columns, array)``."""
    meta, columns, rows = None, None, []
    for line in Path(path).read_text().splitlines():
        if line.startswith(META_PREFIX):
            meta = json.loads(line[len(META_PREFIX):])
        elif line.startswith("#") or not line.strip():
            continue
        elif columns is None:
            columns = line.split(",")
        else:
            rows.append([float(x) for x in line.split(",")])
    return meta, columns, np.array(rows, dtype=float).reshape(len(rows), len(columns or []))


def csv_body(text):
    """Everything after the ``#meta`` lines; the part compared for reproducibility."""
    return "\n".join(line for line in text.splitlines() if not line.startswith("#"))


def write_manifest(out_dir, config, seed, outputs, runtimes):
    """JSON manifest with everything needed to re-run an output set."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "package": "nvdecoherence",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": _jsonable(config),
        "master_seed": seed,
        "outputs": [str(Path(p).name) for p in outputs],
        "runtimes_s": _jsonable(runtimes),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return path
