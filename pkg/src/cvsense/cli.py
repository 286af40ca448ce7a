"""Command-line front end: ``cvsense <subcommand> [options]``.

Option precedence is built-in defaults, then the ``--config`` file, then
explicit flags. Angles are given in degrees. Exit codes: 0 success,
2 invalid input, 3 numerical failure; failures print a JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis as an
from . import fisher, io, montecarlo as mc, theory
from .gaussian import InvalidStateError
from .network import KINDS, SchemeParams

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3
SCHEMA_VERSION = io.SCHEMA_VERSION

DEFAULTS = {
    "scheme": "entangled",
    "modes": 4,
    "photons": 2.5,
    "eta": 0.735,
    "mu": None,
    "n_sqz": None,
    "phi_deg": None,
    "grid": {},
    "shots": 100_000,
    "seed": 0,
    "out": None,
    "format": None,
    "d_phi_deg": None,
    "n_averages": 2000,
    "theta1_deg": 0.0,
    "theta2_deg": 0.0,
    "v_sn": None,
    "ent_method": "qfim",
    "synthetic": None,
    "inputs": [],
}

# subcommand -> (default format, allowed formats)
FORMATS = {
    "gain-curve": ("csv", ("csv", "json")),
    "sensitivity": ("json", ("json",)),
    "qcrb": ("csv", ("csv", "json")),
    "montecarlo": ("json", ("json",)),
    "synthesize": ("csv", ("csv",)),
    "analyze": ("json", ("json",)),
    "calibrate": ("json", ("json",)),
}

GRID_DEFAULTS = {
    "gain-curve": {"M": list(range(1, 11))},
    "qcrb": {"N": [0.5, 1.0, 2.5, 5.0, 10.0]},
    "synthesize": {"phi": list(np.linspace(0.0, 90.0, 12))},
}

CALIBRATION_TABLE = {
    "squeezing": {"k": [-3.96, -3.97, -3.95, -3.96], "b": [-0.13, -0.59, -0.64, 0.37]},
    "anti-squeezing": {"k": [-3.99, -3.99, -4.06, -4.06], "b": [-89.50, -89.97, -89.87, -88.90]},
}


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- parsing helpers --------------------------------------------------------


def parse_values(text: str) -> list[float]:
    """``a,b,c`` or ``lo:hi:n`` (linear) or ``lo:hi:n:log`` (logarithmic)."""
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] != "log"):
            raise UsageError(f"bad range {text!r}; use lo:hi:n or lo:hi:n:log")
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise UsageError(f"range {text!r} is empty")
        if len(parts) == 4:
            if lo <= 0 or hi <= 0:
                raise UsageError("logarithmic ranges need positive bounds")
            return list(np.geomspace(lo, hi, n))
        return list(np.linspace(lo, hi, n))
    values = [float(v) for v in text.split(",") if v.strip()]
    if not values:
        raise UsageError(f"empty value list {text!r}")
    return values


def parse_grid(items) -> dict:
    grid = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"grid spec {item!r} must look like KEY=VALUES")
        key, spec = item.split("=", 1)
        grid[key.strip()] = parse_values(spec)
    return grid


def load_config(path) -> dict:
    """JSON object, or ``key = value`` lines; ``grid.KEY = VALUES`` sets a grid axis."""
    text = Path(path).read_text()
    if str(path).endswith(".json"):
        raw = json.loads(text)
        if not isinstance(raw, dict):
            raise UsageError("JSON config must be an object")
        cfg = {k.replace("-", "_"): v for k, v in raw.items()}
        if "grid" in cfg:
            cfg["grid"] = {k: parse_values(v) if isinstance(v, str) else list(v)
                           for k, v in cfg["grid"].items()}
        if "phi_deg" in cfg and not isinstance(cfg["phi_deg"], list):
            cfg["phi_deg"] = parse_values(str(cfg["phi_deg"]))
        return cfg
    cfg: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key.startswith("grid."):
            cfg.setdefault("grid", {})[key[5:]] = parse_values(value)
        elif key == "phi_deg":
            cfg[key] = parse_values(value)
        elif key == "inputs":
            cfg[key] = [v.strip() for v in value.split(",") if v.strip()]
        else:
            cfg[key] = value
    return cfg


_INT_KEYS = {"modes", "shots", "seed", "n_averages"}
_FLOAT_KEYS = {"photons", "eta", "mu", "n_sqz", "d_phi_deg", "theta1_deg", "theta2_deg", "v_sn"}


def _coerce(cfg: dict) -> dict:
    out = dict(cfg)
    for key in _INT_KEYS & out.keys():
        if out[key] is not None:
            out[key] = int(out[key])
    for key in _FLOAT_KEYS & out.keys():
        if out[key] is not None:
            out[key] = float(out[key])
    unknown = out.keys() - DEFAULTS.keys() - {"command"}
    if unknown:
        raise UsageError(f"unknown configuration keys: {sorted(unknown)}")
    return out


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value or JSON file; explicit flags override it")
    common.add_argument("--scheme", choices=KINDS)
    common.add_argument("--modes", type=int, help="number of sensing nodes M")
    common.add_argument("--photons", type=float, help="mean photons per sample N")
    common.add_argument("--eta", type=float, help="overall efficiency")
    common.add_argument("--mu", type=float, help="squeezed fraction of the photon budget")
    common.add_argument("--n-sqz", type=float, dest="n_sqz", help="squeezed photons per sample (sets mu)")
    common.add_argument("--phi-deg", dest="phi_deg", type=parse_values, help="phase(s) in degrees")
    common.add_argument("--grid", action="append", metavar="KEY=VALUES",
                        help="grid axis, e.g. M=1:10:10 or N=0.1:100:30:log (repeatable)")
    common.add_argument("--shots", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output file (directory for synthesize)")
    common.add_argument("--format", choices=("csv", "json"))

    parser = _Parser(prog="cvsense", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gain-curve", parents=[common], help="entangled over separable gain table")
    sub.add_parser("sensitivity", parents=[common], help="closed-form sensitivity and optimum")
    q = sub.add_parser("qcrb", parents=[common], help="Cramer-Rao bound comparison")
    q.add_argument("--ent-method", dest="ent_method", choices=("qfim", "unsplit"))
    m = sub.add_parser("montecarlo", parents=[common], help="sampled homodyne sensitivity")
    m.add_argument("--d-phi-deg", dest="d_phi_deg", type=float)
    s = sub.add_parser("synthesize", parents=[common], help="synthetic sideband spectra")
    a = sub.add_parser("analyze", parents=[common], help="reduce spectrum CSVs to a sensitivity")
    for p in (s, a):
        p.add_argument("--v-sn", dest="v_sn", type=float, help="shot-noise voltage")
    s.add_argument("--n-averages", dest="n_averages", type=int)
    s.add_argument("--theta1-deg", dest="theta1_deg", type=float)
    s.add_argument("--theta2-deg", dest="theta2_deg", type=float)
    a.add_argument("inputs", nargs="*", help="spectrum CSV files or a directory of them")
    c = sub.add_parser("calibrate", parents=[common], help="wave-plate phase calibration fit")
    c.add_argument("inputs", nargs="*", help="fringe CSV (channel,theta_v_deg,ramp_deg,signal)")
    c.add_argument("--synthetic", choices=("jones", "squeezing", "anti-squeezing"))
    return parser


def resolve_config(argv) -> dict:
    args = build_parser().parse_args(argv)
    given = {k: v for k, v in vars(args).items() if v is not None and k != "config"}
    if "grid" in given:
        given["grid"] = parse_grid(given["grid"])
    if given.get("inputs") == []:
        del given["inputs"]
    cfg = dict(DEFAULTS)
    cfg["grid"] = dict(GRID_DEFAULTS.get(args.command, {}))
    if args.config:
        from_file = _coerce(load_config(args.config))
        cfg["grid"].update(from_file.pop("grid", {}))
        cfg.update(from_file)
    cfg["grid"].update(given.pop("grid", {}))
    cfg.update(given)
    cfg = _coerce(cfg)
    default_fmt, allowed = FORMATS[cfg["command"]]
    cfg["format"] = cfg["format"] or default_fmt
    if cfg["format"] not in allowed:
        raise UsageError(f"{cfg['command']} does not support --format {cfg['format']}")
    for key, values in cfg["grid"].items():
        if not values:
            raise UsageError(f"grid axis {key} is empty")
    return cfg


def scheme_params(cfg: dict) -> SchemeParams:
    N = cfg["photons"]
    if cfg.get("n_sqz") is not None:
        if N <= 0:
            raise UsageError("--n-sqz needs a positive photon number")
        mu = cfg["n_sqz"] / N
    elif cfg.get("mu") is not None:
        mu = cfg["mu"]
    else:
        mu = theory.optimal_point(cfg["modes"], N, cfg["eta"], cfg["scheme"]).mu_opt
    return SchemeParams(M=cfg["modes"], N=N, eta=cfg["eta"], mu=mu, kind=cfg["scheme"])


def _int_axis(values, name) -> list[int]:
    ints = [int(round(v)) for v in values]
    if any(abs(i - v) > 1e-9 or i < 1 for i, v in zip(ints, values)):
        raise UsageError(f"grid axis {name} must hold positive integers")
    return ints


# -- subcommands ------------------------------------------------------------


def cmd_gain_curve(cfg):
    grid = cfg["grid"]
    Ns = grid.get("N", [cfg["photons"]])
    etas = grid.get("eta", [cfg["eta"]])
    rows = theory.gain_curve_rows(_int_axis(grid["M"], "M"), Ns, etas)
    return {"rows": rows, "columns": ["M", "N", "eta", "gain", "sigma_sep", "sigma_ent", "mu_sep", "mu_ent"]}


def cmd_sensitivity(cfg):
    params = scheme_params(cfg)
    report = theory.sensitivity_report(params)
    opt = theory.optimal_point(params.M, params.N, params.eta, params.kind)
    out = {
        "params": params.as_dict(),
        "alpha": params.alpha,
        "r": params.r,
        "sigma": report.sigma,
        "sigma_deg": report.resolvable_deg,
        "report": report,
        "optimal": opt,
        "sql": theory.standard_quantum_limit(params.M, params.N),
        "sql_deg": float(np.degrees(theory.standard_quantum_limit(params.M, params.N))),
        "small_angle_bound": theory.small_angle_bound(params.r),
    }
    if "eta" in cfg["grid"]:
        sig = [theory.sigma_for(params.with_(eta=e)) for e in cfg["grid"]["eta"]]
        out["eta_envelope"] = {"eta": cfg["grid"]["eta"], "sigma": sig,
                               "sigma_min": min(sig), "sigma_max": max(sig)}
    return out


def cmd_qcrb(cfg):
    rows = []
    for N in cfg["grid"]["N"]:
        rep = fisher.qcrb_ordering_report(N, cfg["eta"], cfg["modes"], ent_method=cfg["ent_method"])
        rows.append({"N": N, **rep.bounds, "ordering_holds": rep.holds,
                     "mu_sep_cr": rep.mu["sep_cr"], "mu_ent_cr": rep.mu["ent_cr"]})
    cols = ["N", *fisher.OrderingReport.ORDER, "ordering_holds", "mu_sep_cr", "mu_ent_cr"]
    return {"rows": rows, "columns": cols}


def cmd_montecarlo(cfg):
    params = scheme_params(cfg)
    phi0 = float(np.radians((cfg["phi_deg"] or [0.0])[0]))
    d_phi = None if cfg["d_phi_deg"] is None else float(np.radians(cfg["d_phi_deg"]))
    rep = mc.empirical_sensitivity(params, phi0=phi0, d_phi=d_phi, K=cfg["shots"], seed=cfg["seed"])
    analytic = theory.sigma_for(params)
    return {"params": params.as_dict(), "empirical": rep, "analytic_sigma": analytic,
            "z_score": (rep.sigma - analytic) / rep.sigma_err if rep.sigma_err else None}


def _model(cfg) -> mc.SpectrumModel:
    return mc.SpectrumModel(V_sn=cfg["v_sn"] or 1.0, theta1=np.radians(cfg["theta1_deg"]),
                            theta2=np.radians(cfg["theta2_deg"]))


def cmd_synthesize(cfg):
    params = scheme_params(cfg)
    phis_deg = cfg["phi_deg"] or cfg["grid"]["phi"]
    sweep = mc.synthesize_sweep(params, np.radians(phis_deg), _model(cfg), cfg["n_averages"], cfg["seed"])
    return {"params": params.as_dict(), "sweep": sweep, "phi_deg": list(phis_deg)}


def _spectrum_paths(inputs) -> list[Path]:
    paths = []
    for item in inputs:
        p = Path(item)
        paths.extend(sorted(p.glob("spectrum_*.csv")) if p.is_dir() else [p])
    if not paths:
        raise UsageError("no spectrum files given")
    return paths


def cmd_analyze(cfg):
    traces = [io.read_spectrum(p) for p in _spectrum_paths(cfg["inputs"])]
    points = [an.extract_peak(t) for t in traces]
    fit = an.fit_vs_vn(points)
    V_sn = cfg["v_sn"] or traces[0].V_sn
    counts = an.count_photons(fit, V_sn, cfg["modes"], cfg["scheme"])
    out = {"n_spectra": len(traces), "V_sn": V_sn, **fit.as_dict(),
           "N_coh": counts.N_coh, "N_sqz": counts.N_sqz,
           "N_coh_err": counts.N_coh_err, "N_sqz_err": counts.N_sqz_err,
           "points": [{"phi_avg": p.phi_avg, "V_s": p.V_s, "V_n": p.V_n,
                       "below_baseline": p.below_baseline} for p in points]}
    if cfg["scheme"] == "separable":
        # one channel was measured; the M-node figure scales by 1/sqrt(M)
        out["sigma_scheme"] = fit.sigma_min / np.sqrt(cfg["modes"])
    else:
        out["sigma_scheme"] = fit.sigma_min
    return out


def _read_fringes(path) -> dict:
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=1, ndmin=2)
    if data.shape[1] != 4:
        raise UsageError(f"{path}: expected columns channel,theta_v_deg,ramp_deg,signal")
    sweeps: dict = {}
    for ch in np.unique(data[:, 0]).astype(int):
        rows = data[data[:, 0] == ch]
        samples = []
        for tv in np.unique(rows[:, 1]):
            sel = rows[rows[:, 1] == tv]
            samples.append(an.FringeSample(float(tv), sel[:, 2], sel[:, 3]))
        sweeps[int(ch)] = samples
    return sweeps


def cmd_calibrate(cfg):
    theta = np.linspace(0.0, 8.0, 9)
    source = cfg["synthetic"]
    if source == "jones":
        phi_d = (cfg["phi_deg"] or [0.0])[0]
        sweeps = {j: an.jones_sweep(theta, phi_d) for j in range(cfg["modes"])}
    elif source in CALIBRATION_TABLE:
        tab = CALIBRATION_TABLE[source]
        seeds = np.random.SeedSequence(cfg["seed"]).generate_state(4, dtype=np.uint64)
        sweeps = {j: an.linear_law_sweep(k, b, theta, noise=0.05, n_repeats=40, seed=int(s))
                  for j, (k, b, s) in enumerate(zip(tab["k"], tab["b"], seeds))}
    else:
        if not cfg["inputs"]:
            raise UsageError("calibrate needs a fringe CSV or --synthetic")
        sweeps = {}
        for path in cfg["inputs"]:
            sweeps.update(_read_fringes(path))
    fit = an.calibrate_channels(sweeps)
    return {"source": source or list(cfg["inputs"]), **fit.as_dict(),
            "linear_within_0p5deg": fit.linear_within(0.5)}


COMMANDS = {
    "gain-curve": cmd_gain_curve,
    "sensitivity": cmd_sensitivity,
    "qcrb": cmd_qcrb,
    "montecarlo": cmd_montecarlo,
    "synthesize": cmd_synthesize,
    "analyze": cmd_analyze,
    "calibrate": cmd_calibrate,
}


# -- output -----------------------------------------------------------------


def _public_config(cfg) -> dict:
    return {k: v for k, v in cfg.items() if k != "out"}


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def render(cfg, result) -> None:
    meta = {"schema_version": SCHEMA_VERSION,
            "config": json.dumps(io._jsonable(_public_config(cfg)), sort_keys=True, separators=(",", ":"))}
    command, fmt = cfg["command"], cfg["format"]
    if command == "synthesize":
        outdir = Path(cfg["out"] or "spectra")
        outdir.mkdir(parents=True, exist_ok=True)
        sweep = result["sweep"]
        for i, trace in enumerate(sweep.traces):
            io.write_spectrum(trace, outdir / f"spectrum_{i:03d}.csv")
        manifest = {"schema_version": SCHEMA_VERSION, "config": _public_config(cfg),
                    "truth": sweep.truth, "params": result["params"],
                    "files": [f"spectrum_{i:03d}.csv" for i in range(len(sweep.traces))]}
        io.write_json(manifest, outdir / "truth.json")
        sys.stdout.write(io.dumps_json(manifest) + "\n")
        return
    if fmt == "csv":
        _emit(io.rows_to_csv(result["rows"], result["columns"], meta), cfg["out"])
        return
    payload = {"schema_version": SCHEMA_VERSION, "config": _public_config(cfg), "result": result}
    _emit(io.dumps_json(payload) + "\n", cfg["out"])


def _fail(exc: BaseException, code: int) -> int:
    err = {"schema_version": SCHEMA_VERSION, "error": type(exc).__name__,
           "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def main(argv=None) -> int:
    try:
        cfg = resolve_config(sys.argv[1:] if argv is None else argv)
        result = COMMANDS[cfg["command"]](cfg)
        render(cfg, result)
    except (UsageError, InvalidStateError, KeyError, OSError) as exc:
        return _fail(exc, EXIT_INVALID)
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        return _fail(exc, EXIT_NUMERIC)
    except ValueError as exc:
        return _fail(exc, EXIT_INVALID)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
