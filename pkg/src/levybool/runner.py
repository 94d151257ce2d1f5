"""Lab dispatch: validated flat configs in, CSV artifacts plus manifest out.

Config files are INI-style with one section per lab; command-line flags
override file values. Exit code misuse of the schema is 2, numeric
failure inside a lab is 3 (see cli.main).
"""
from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass

import numpy as np

from .calibrate import calibrate as fit_bound_constants
from .calibrate import load_constants, save_constants
from .coverage import TargetSet, coverage_slope, simulate_coverage
from .detection import SurvivalCurve, decay_rate, simulate_detection, void_survival
from .field import (RadiusLaw, parse_radius_law, plan_window,
                    window_plan_from_halfwidth, sample_cloud, evolve)
from .manifest import ExperimentManifest, write_csv
from .motion import TargetMotion
from .percolation import (estimate_lambda_c, giant_fraction, good_box_fraction,
                          simulate_percolation_time)
from .rngtools import derive_stream
from .stable import BoundConstants, StableParams
from .volume import ball_capacity, expected_sausage_rate


class SchemaError(ValueError):
    """Invalid or missing config entry; carries the offending field path."""

    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}")


class NumericFailure(RuntimeError):
    pass


REQUIRED = object()

SCHEMAS: dict[str, dict[str, tuple]] = {
    "sample-path": {
        "alpha": (float, REQUIRED), "d": (int, 2), "lambda": (float, 0.1),
        "radius": (str, "const:1"), "window": (float, 5.0),
        "T": (float, 10.0), "h": (float, 0.05), "seed": (int, REQUIRED),
    },
    "sausage": {
        "alpha": (float, REQUIRED), "d": (int, 2), "radius": (str, "const:1"),
        "T": (str, "10"), "h": (float, 0.01), "n": (int, 200),
        "seed": (int, REQUIRED), "h_check": (int, 0),
    },
    "detect": {
        "alpha": (float, REQUIRED), "d": (int, 2), "lambda": (float, REQUIRED),
        "radius": (str, REQUIRED), "target": (str, "static"),
        "T": (float, REQUIRED), "h": (float, 0.01), "n": (int, REQUIRED),
        "seed": (int, REQUIRED), "method": (str, "both"),
        "window": (float, 0.0), "eps_trunc": (float, 0.05),
        "constants": (str, ""), "out_times": (str, ""),
    },
    "cover": {
        "alpha": (float, REQUIRED), "d": (int, 2), "lambda": (float, REQUIRED),
        "radius": (str, REQUIRED), "set": (str, "cube"),
        "k_ladder": (str, "4,8,16,32"), "eps": (float, 0.1),
        "h": (float, 0.02), "n": (int, 100), "seed": (int, REQUIRED),
        "t_max": (float, 0.0),
    },
    "percolate": {
        "alpha": (float, REQUIRED), "d": (int, 2), "lambda": (float, REQUIRED),
        "radius": (str, REQUIRED), "target": (str, "static"),
        "T": (float, 4), "n": (int, REQUIRED), "window": (float, REQUIRED),
        "seed": (int, REQUIRED), "rho": (float, 0.0), "check_dt": (float, 1.0),
    },
    "goodbox": {
        "alpha": (float, REQUIRED), "d": (int, 2), "lambda": (float, REQUIRED),
        "V": (float, REQUIRED), "M": (int, REQUIRED), "xi": (float, REQUIRED),
        "t": (int, REQUIRED), "seed": (int, REQUIRED),
    },
    "lambda-c": {
        "d": (int, 2), "radius": (str, REQUIRED), "window": (float, 12.0),
        "tolerance": (float, 0.05), "n": (int, 200), "seed": (int, REQUIRED),
    },
    "plan-window": {
        "alpha": (float, REQUIRED), "d": (int, 2), "lambda": (float, REQUIRED),
        "radius": (str, REQUIRED), "T": (float, REQUIRED),
        "eps_trunc": (float, 1e-3), "constants": (str, REQUIRED),
        "seed": (int, 0),
    },
    "calibrate": {
        "alpha": (float, REQUIRED), "d": (int, 2), "n": (int, 20000),
        "seed": (int, REQUIRED),
    },
    "report-data": {
        "seed": (int, 7),
    },
}


def _coerce(lab: str, key: str, raw, kind) -> object:
    try:
        if kind is int:
            value = int(str(raw))
        elif kind is float:
            value = float(str(raw))
        else:
            value = str(raw)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{lab}.{key}", f"expected {kind.__name__}, "
                          f"got {raw!r}") from exc
    return value


def resolve_config(lab: str, file_path: str | None = None,
                   overrides: dict | None = None) -> dict:
    """Merge file section and overrides against the lab schema."""
    if lab not in SCHEMAS:
        raise SchemaError(lab, "unknown lab")
    schema = SCHEMAS[lab]
    merged: dict = {}
    if file_path:
        parser = configparser.ConfigParser()
        parser.optionxform = str    # keys are case-sensitive (V vs v)
        read = parser.read(file_path)
        if not read:
            raise SchemaError(f"{lab}.config", f"cannot read {file_path}")
        if parser.has_section(lab):
            for key, raw in parser.items(lab):
                if key not in schema:
                    raise SchemaError(f"{lab}.{key}", "unknown key")
                merged[key] = raw
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        if key not in schema:
            raise SchemaError(f"{lab}.{key}", "unknown key")
        merged[key] = raw
    out: dict = {}
    for key, (kind, default) in schema.items():
        if key in merged:
            out[key] = _coerce(lab, key, merged[key], kind)
        elif default is REQUIRED:
            raise SchemaError(f"{lab}.{key}", "required key missing")
        else:
            out[key] = default
    return out


def parse_target(text: str) -> TargetMotion:
    head, _, rest = text.partition(":")
    head = head.strip().lower()
    if head == "static":
        return TargetMotion.static()
    if head == "levy":
        return TargetMotion.levy()
    if head == "linear":
        parts = rest.split(":")
        beta = float(parts[0])
        psi = [float(x) for x in parts[1].split(",")] if len(parts) > 1 else None
        if psi is None:
            raise SchemaError("target", "linear needs linear:beta:x,y,...")
        return TargetMotion.linear(beta, psi)
    if head == "table":
        data = np.loadtxt(rest, delimiter=",", skiprows=1)
        return TargetMotion.table(data[:, 0], data[:, 1:])
    raise SchemaError("target", f"unknown motion {text!r}")


def parse_set(text: str, dim: int) -> TargetSet:
    head, _, rest = text.partition(":")
    head = head.strip().lower()
    if head == "cube":
        return TargetSet.cube(dim)
    if head == "segment":
        return TargetSet.segment(dim)
    if head in ("cantor", "cantor_dust"):
        return TargetSet.cantor_dust(int(rest or 6), dim)
    raise SchemaError("set", f"unknown target set {text!r}")


def _float_list(text: str) -> list[float]:
    return [float(x) for x in str(text).split(",") if str(x).strip()]


# ---------------------------------------------------------------------------
# Lab implementations
# ---------------------------------------------------------------------------

def _run_sample_path(cfg: dict, out_dir: str, manifest: ExperimentManifest,
                     threads: int) -> list[str]:
    params = StableParams(cfg["alpha"], cfg["d"])
    law = parse_radius_law(cfg["radius"])
    rng = derive_stream(cfg["seed"], "sample-path", 0)
    cloud = sample_cloud(cfg["lambda"], cfg["window"], law, params.dim, rng)
    grid = np.arange(0.0, cfg["T"] + cfg["h"] / 2, cfg["h"])
    skeletons = evolve(cloud, grid, params, rng)
    cols = ["id", "t"] + [f"x{a}" for a in range(params.dim)] + ["radius"]
    rows = []
    for i, skel in enumerate(skeletons):
        for t, pos in zip(skel.times, skel.positions):
            rows.append([int(cloud.ids[i]), float(t),
                         *[float(c) for c in pos], float(cloud.radii[i])])
    path = os.path.join(out_dir, "trajectory.csv")
    write_csv(path, cols, rows, manifest)
    return [path]


def _run_sausage(cfg: dict, out_dir: str, manifest: ExperimentManifest,
                 threads: int) -> list[str]:
    params = StableParams(cfg["alpha"], cfg["d"])
    law = parse_radius_law(cfg["radius"])
    rng = derive_stream(cfg["seed"], "sausage", 0)
    times = _float_list(cfg["T"])
    horizon = max(times)
    res = expected_sausage_rate(params, law, horizon, cfg["h"], cfg["n"], rng,
                                times=times, h_check=bool(cfg["h_check"]))
    target = ball_capacity(params.alpha, params.dim) \
        * law.moment(params.dim - params.alpha)
    rows = [[float(t), float(m), float(1.96 * s), cfg["h"], "grid-occupancy",
             target]
            for t, m, s in zip(res.times, res.rate_mean, res.rate_sem)]
    path = os.path.join(out_dir, "rate_ladder.csv")
    write_csv(path, ["t", "estimate", "ci", "h", "method", "target"], rows,
              manifest)
    return [path]


def _curve_rows(curve: SurvivalCurve) -> list[list]:
    return [[float(t), float(s), float(c), curve.method]
            for t, s, c in zip(curve.times, curve.survival, curve.ci)]


def _fit_rows(curve: SurvivalCurve) -> list[list]:
    fit = decay_rate(curve)
    return [[fit.rate, fit.stderr, fit.window[0], fit.window[1],
             fit.intercept, fit.n_points]]


def _run_detect(cfg: dict, out_dir: str, manifest: ExperimentManifest,
                threads: int) -> list[str]:
    params = StableParams(cfg["alpha"], cfg["d"])
    law = parse_radius_law(cfg["radius"])
    target = parse_target(cfg["target"])
    constants = load_constants(cfg["constants"]) if cfg["constants"] \
        else None
    if cfg["window"] > 0:
        plan = window_plan_from_halfwidth(params, cfg["lambda"], law, cfg["T"],
                                          cfg["window"], constants, target)
    else:
        if constants is None:
            raise SchemaError("detect.window",
                              "need either window > 0 or a constants file "
                              "for the planner")
        plan = plan_window(params, cfg["lambda"], law, cfg["T"],
                           cfg["eps_trunc"], constants, target)
    out_times = _float_list(cfg["out_times"]) if cfg["out_times"] else None
    paths = []
    if cfg["method"] in ("direct", "both"):
        rng = derive_stream(cfg["seed"], "detect-direct", 0)
        curve = simulate_detection(cfg["lambda"], law, params, target,
                                   cfg["T"], cfg["h"], cfg["n"], rng, plan,
                                   threads=threads)
        p = os.path.join(out_dir, "survival_direct.csv")
        write_csv(p, ["t", "survival", "ci", "method"], _curve_rows(curve),
                  manifest)
        paths.append(p)
    if cfg["method"] in ("void", "both"):
        rng = derive_stream(cfg["seed"], "detect-void", 0)
        curve = void_survival(cfg["lambda"], law, params, target, None,
                              cfg["T"], cfg["h"], cfg["n"], rng,
                              out_times=out_times, threads=threads)
        p = os.path.join(out_dir, "survival_void.csv")
        write_csv(p, ["t", "survival", "ci", "method"], _curve_rows(curve),
                  manifest)
        paths.append(p)
        f = os.path.join(out_dir, "survival_void_fit.csv")
        write_csv(f, ["rate", "stderr", "window_lo", "window_hi",
                      "intercept", "n_points"], _fit_rows(curve), manifest)
        paths.append(f)
    return paths


def _run_cover(cfg: dict, out_dir: str, manifest: ExperimentManifest,
               threads: int) -> list[str]:
    params = StableParams(cfg["alpha"], cfg["d"])
    law = parse_radius_law(cfg["radius"])
    target = parse_set(cfg["set"], params.dim)
    ks = _float_list(cfg["k_ladder"])
    if len(ks) < 1:
        raise SchemaError("cover.k_ladder", "need at least one scale")
    beta = target.nominal_dimension
    slope_ref = beta / (cfg["lambda"]
                        * ball_capacity(params.alpha, params.dim)
                        * law.moment(params.dim - params.alpha))
    rows = []
    for j, k in enumerate(ks):
        rng = derive_stream(cfg["seed"], "cover", j)
        t_max = cfg["t_max"] if cfg["t_max"] > 0 \
            else max(3.0 * slope_ref * math.log(max(k, 2.0)), 2.0)
        res = simulate_coverage(cfg["lambda"], law, params, target, k,
                                cfg["eps"], t_max, cfg["h"], cfg["n"], rng,
                                threads=threads)
        attempts = 0
        while not res.usable and attempts < 3:
            t_max *= 2.0
            attempts += 1
            res = simulate_coverage(cfg["lambda"], law, params, target, k,
                                    cfg["eps"], t_max, cfg["h"], cfg["n"],
                                    rng, threads=threads)
        mu, cu = res.mean_ci("upper")
        ml, _ = res.mean_ci("lower")
        rows.append([k, mu, ml, cu, res.censor_fraction, slope_ref])
    path = os.path.join(out_dir, "coverage.csv")
    write_csv(path, ["k", "mean_upper", "mean_lower", "ci", "censor_frac",
                     "target"], rows, manifest)
    return [path]


def _run_percolate(cfg: dict, out_dir: str, manifest: ExperimentManifest,
                   threads: int) -> list[str]:
    params = StableParams(cfg["alpha"], cfg["d"])
    law = parse_radius_law(cfg["radius"])
    target = parse_target(cfg["target"])
    rng = derive_stream(cfg["seed"], "percolate", 0)
    curves = simulate_percolation_time(
        cfg["lambda"], law, params, target, cfg["T"], cfg["n"],
        cfg["window"], rng, rho=cfg["rho"] if cfg["rho"] > 0 else None,
        check_dt=cfg["check_dt"], threads=threads)
    rows = []
    for k, t in enumerate(curves.times):
        rows.append([float(t), float(curves.perc_survival[k]),
                     float(curves.perc_ci[k]), "percolation"])
    for k, t in enumerate(curves.times):
        rows.append([float(t), float(curves.det_survival[k]),
                     float(curves.det_ci[k]), "detection"])
    path = os.path.join(out_dir, "percolation.csv")
    write_csv(path, ["t", "survival", "ci", "method"], rows, manifest)
    return [path]


def _run_goodbox(cfg: dict, out_dir: str, manifest: ExperimentManifest,
                 threads: int) -> list[str]:
    params = StableParams(cfg["alpha"], cfg["d"])
    rng = derive_stream(cfg["seed"], "goodbox", 0)
    report = good_box_fraction(cfg["lambda"], cfg["M"], cfg["xi"], cfg["V"],
                               cfg["t"], params, rng)
    rows = [[i + 1, bool(flag), report.good_fraction]
            for i, flag in enumerate(report.per_time_flags)]
    path = os.path.join(out_dir, "goodbox.csv")
    write_csv(path, ["i", "good_flag", "good_fraction"], rows, manifest)
    return [path]


def _run_lambda_c(cfg: dict, out_dir: str, manifest: ExperimentManifest,
                  threads: int) -> list[str]:
    law = parse_radius_law(cfg["radius"])
    rng = derive_stream(cfg["seed"], "lambda-c", 0)
    lo, hi = estimate_lambda_c(law, cfg["window"], cfg["d"], rng,
                               tolerance=cfg["tolerance"], n=cfg["n"],
                               threads=threads)
    path = os.path.join(out_dir, "lambda_c.csv")
    write_csv(path, ["lambda_lo", "lambda_hi"], [[lo, hi]], manifest)
    return [path]


def _run_plan_window(cfg: dict, out_dir: str, manifest: ExperimentManifest,
                     threads: int) -> list[str]:
    params = StableParams(cfg["alpha"], cfg["d"])
    law = parse_radius_law(cfg["radius"])
    constants = load_constants(cfg["constants"])
    plan = plan_window(params, cfg["lambda"], law, cfg["T"], cfg["eps_trunc"],
                       constants)
    path = os.path.join(out_dir, "window_plan.csv")
    write_csv(path, ["halfwidth", "horizon", "eps_trunc", "margin"],
              [[plan.halfwidth, plan.horizon, plan.eps_trunc, plan.margin]],
              manifest)
    return [path]


def _run_calibrate(cfg: dict, out_dir: str, manifest: ExperimentManifest,
                   threads: int) -> list[str]:
    params = StableParams(cfg["alpha"], cfg["d"])
    rng = derive_stream(cfg["seed"], "calibrate", 0)
    constants = fit_bound_constants(params, rng, n_escape=cfg["n"],
                                 n_hitting=cfg["n"])
    path = os.path.join(out_dir, "constants.json")
    save_constants(constants, path)
    manifest.calibrated_constants = constants.to_dict()
    return [path]


def _run_report_data(cfg: dict, out_dir: str, manifest: ExperimentManifest,
                     threads: int) -> list[str]:
    """Small sample CSVs of every table shape, for plotting consumers."""
    seed = cfg["seed"]
    paths = []
    paths += _run_sample_path(resolve_config("sample-path", overrides={
        "alpha": 1.5, "lambda": 0.08, "window": 4, "T": 10, "h": 0.25,
        "seed": seed}), out_dir, manifest, threads)
    # synthetic exactly-exponential survival curve plus its fitted rate
    times = np.round(np.arange(0.0, 5.0 + 1e-9, 0.1), 10)
    surv = np.exp(-2.0 * times)
    curve = SurvivalCurve(times=times, survival=surv,
                          ci=np.full_like(times, 1e-6), n=10 ** 6,
                          method="direct")
    p = os.path.join(out_dir, "survival.csv")
    write_csv(p, ["t", "survival", "ci", "method"], _curve_rows(curve),
              manifest)
    paths.append(p)
    f = os.path.join(out_dir, "survival_fit.csv")
    write_csv(f, ["rate", "stderr", "window_lo", "window_hi", "intercept",
                  "n_points"], _fit_rows(curve), manifest)
    paths.append(f)
    paths += _run_sausage(resolve_config("sausage", overrides={
        "alpha": 1.0, "T": "2,5,10", "h": 0.05, "n": 24, "seed": seed}),
        out_dir, manifest, threads)
    paths += _run_cover(resolve_config("cover", overrides={
        "alpha": 1.0, "lambda": 1.0, "radius": "const:1",
        "k_ladder": "2,4,8,16", "n": 12, "h": 0.05, "seed": seed}),
        out_dir, manifest, threads)
    paths += _run_goodbox(resolve_config("goodbox", overrides={
        "alpha": 1.5, "lambda": 1.0, "V": 100, "M": 4, "xi": 0.3, "t": 40,
        "seed": seed}), out_dir, manifest, threads)
    return paths


_LABS = {
    "sample-path": _run_sample_path,
    "sausage": _run_sausage,
    "detect": _run_detect,
    "cover": _run_cover,
    "percolate": _run_percolate,
    "goodbox": _run_goodbox,
    "lambda-c": _run_lambda_c,
    "plan-window": _run_plan_window,
    "calibrate": _run_calibrate,
    "report-data": _run_report_data,
}


def run(lab: str, config_path: str | None, overrides: dict, out_dir: str,
        threads: int | None = None) -> list[str]:
    """Resolve config, run the lab, emit CSVs plus manifest.json."""
    cfg = resolve_config(lab, config_path, overrides)
    os.makedirs(out_dir, exist_ok=True)
    manifest = ExperimentManifest(config={lab: cfg},
                                  master_seed=cfg.get("seed", 0))
    if threads is None:
        threads = 1
    try:
        artifacts = _LABS[lab](cfg, out_dir, manifest, threads)
    except SchemaError:
        raise
    except ValueError as exc:
        raise SchemaError(lab, str(exc)) from exc
    except (RuntimeError, FloatingPointError, OverflowError) as exc:
        raise NumericFailure(f"{lab}: {exc}") from exc
    manifest.write(os.path.join(out_dir, "manifest.json"))
    return artifacts
