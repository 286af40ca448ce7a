"""Plain-text serialization: covariance and spectrum CSVs, JSON reports."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import is_dataclass, asdict
from pathlib import Path

import numpy as np

from . import gaussian as g
from .montecarlo import SpectrumTrace

SCHEMA_VERSION = "1.0"


def _header(path) -> dict:
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            for token in line[1:].split():
                if "=" in token:
                    key, value = token.split("=", 1)
                    meta[key] = value
    return meta


# -- covariance -------------------------------------------------------------


def write_covariance(state: g.GaussianState, path, units: str = "half") -> None:
    """Covariance rows followed by one mean row; ``units`` is ``half`` or ``snu``."""
    if units not in ("half", "snu"):
        raise ValueError("units must be 'half' or 'snu'")
    scale = 2.0 if units == "snu" else 1.0
    mean_scale = np.sqrt(2.0) if units == "snu" else 1.0
    with open(path, "w", newline="") as fh:
        fh.write(f"# n_modes={state.n_modes} units={units} schema_version={SCHEMA_VERSION}\n")
        w = csv.writer(fh)
        w.writerows((scale * state.cov).tolist())
        w.writerow((mean_scale * state.mean).tolist())


def read_covariance(path, validate: bool = True) -> g.GaussianState:
    meta = _header(path)
    try:
        n = int(meta["n_modes"])
    except KeyError:
        raise ValueError(f"{path}: missing n_modes header") from None
    units = meta.get("units", "half")
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if data.shape != (2 * n + 1, 2 * n):
        raise ValueError(f"{path}: expected {2 * n + 1} rows of {2 * n} values, got {data.shape}")
    cov, mean = data[:-1], data[-1]
    if units == "snu":
        return g.from_shot_noise_units(cov, mean, validate=validate)
    if units != "half":
        raise ValueError(f"{path}: unknown units {units!r}")
    return g.GaussianState(mean, cov, validate=validate)


# -- spectra ----------------------------------------------------------------


def write_spectrum(trace: SpectrumTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(
            f"# V_sn={trace.V_sn!r} phi_avg_label={trace.phi_avg_label!r} "
            f"n_averages={trace.n_averages} seed={trace.seed} schema_version={SCHEMA_VERSION}\n"
        )
        w = csv.writer(fh)
        w.writerow(["freq_hz", "psd"])
        for f, p in zip(trace.freqs, trace.psd):
            w.writerow([repr(float(f)), repr(float(p))])


def read_spectrum(path) -> SpectrumTrace:
    meta = _header(path)
    missing = {"V_sn", "phi_avg_label", "n_averages"} - meta.keys()
    if missing:
        raise ValueError(f"{path}: missing header fields {sorted(missing)}")
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=2, ndmin=2)
    seed = meta.get("seed")
    return SpectrumTrace(
        freqs=data[:, 0],
        psd=data[:, 1],
        V_sn=float(meta["V_sn"]),
        phi_avg_label=float(meta["phi_avg_label"]),
        n_averages=int(meta["n_averages"]),
        seed=None if seed in (None, "None") else int(seed),
    )


# -- reports ----------------------------------------------------------------


def _jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(obj.as_dict() if hasattr(obj, "as_dict") else asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def dumps_json(payload) -> str:
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True)


def write_json(payload, path) -> None:
    Path(path).write_text(dumps_json(payload) + "\n")


def rows_to_csv(rows: list[dict], columns=None, meta: dict | None = None) -> str:
    """CSV text with an optional ``# key=value`` comment line in front."""
    columns = list(columns or (rows[0].keys() if rows else []))
    buf = io.StringIO()
    if meta:
        buf.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
    w = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _jsonable(row.get(k)) for k in columns})
    return buf.getvalue()
