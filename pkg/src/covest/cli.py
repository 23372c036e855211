"""Batch command-line front-end.

Subcommands: simulate, fit, benchmark, are, study, scores. Every run is
driven by one flat JSON config document plus flags; outputs are CSV/JSON
files plus a manifest recording the effective config hash and seed, so a
run is reproducible from its manifest. Exit codes: 0 success, 2 config
error, 3 numerical failure, 4 non-convergence.
"""

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .covariance import (FAMILIES, RANGE_CONVENTIONS, CovarianceSpec, TaperSpec,
                         assemble_tapered_sigma)
from .errors import (ConfigError, DegenerateCorrelationError,
                     NotPositiveDefiniteError, SingularInformationError)
from .geometry import pairs_within, perturbed_grid_design, read_locations_csv
from .inference import are_sweep, fit
from .objectives import ObjectiveSpec, build_pairs, evaluate
from .predict import loo_predict, scores as predictive_scores
from .simulate import read_field_csv, simulate_batch, write_realizations_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_NONCONVERGED = 4

METHOD_KINDS = ("ml", "taper1", "taper2", "pl_marginal", "pl_conditional", "pl_difference")
_METHOD_LABELS = {"ml": "ML", "taper1": "TAP1(d)", "taper2": "TAP(d)",
                  "pl_marginal": "PL_M(d)", "pl_conditional": "PL_C(d)",
                  "pl_difference": "PL_D(d)"}
_SWEEP_LABELS = {"taper": "TAP(d)", "marginal": "PL_M(d)",
                 "conditional": "PL_C(d)", "difference": "PL_D(d)"}

_NUMBER = (int, float)

# key -> (types, default); _REQUIRED marks keys with no default
_REQUIRED = object()
_MODEL_KEYS = {
    "family": (str, _REQUIRED),
    "sigma2": (_NUMBER, _REQUIRED),
    "phi": (_NUMBER, _REQUIRED),
    "nugget": (_NUMBER, 0.0),
    "range_convention": (str, "practical"),
}
_DESIGN_KEYS = {
    "design": (str, "grid"),
    "grid_k": (int, 0),
    "grid_increment": (_NUMBER, 0.03),
    "grid_jitter": (_NUMBER, 0.01),
    "grid_points": (int, None),
    "design_path": (str, None),
    "earth_radius_km": (_NUMBER, 6371.0),
}
_FIT_KEYS = {
    "method": (str, _REQUIRED),
    "cutoff": (_NUMBER, None),
    "taper_range": (_NUMBER, None),
    "free": (list, None),
    "standard_errors": (bool, True),
    "n_starts": (int, 5),
    "phi_starts": (list, None),
    "max_iter": (int, 300),
}
_METHODS_KEYS = dict(_FIT_KEYS)
_METHODS_KEYS.pop("method")
_METHODS_KEYS["methods"] = (list, _REQUIRED)

_SCHEMAS = {
    "simulate": {**_MODEL_KEYS, **_DESIGN_KEYS,
                 "seed": (int, _REQUIRED), "replicates": (int, 1)},
    "fit": {**_MODEL_KEYS, **_FIT_KEYS},
    "benchmark": {**_MODEL_KEYS, **_DESIGN_KEYS, "seed": (int, _REQUIRED),
                  "k_max": (int, 3), "taper_range": (_NUMBER, None)},
    "are": {**_MODEL_KEYS, **_DESIGN_KEYS, "seed": (int, _REQUIRED),
            "percents": (list, None), "methods": (list, None), "free": (list, None)},
    "study": {**_MODEL_KEYS, **_DESIGN_KEYS, **_METHODS_KEYS,
              "seed": (int, _REQUIRED), "replicates": (int, _REQUIRED)},
    "scores": {**_MODEL_KEYS, **_METHODS_KEYS},
}


def _validate_config(command, raw):
    if not isinstance(raw, dict):
        raise ConfigError("config must be a flat JSON object")
    schema = _SCHEMAS[command]
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config key(s) for {command}: {', '.join(unknown)}")
    cfg = {}
    for key, (types, default) in schema.items():
        if key in raw and raw[key] is not None:
            val = raw[key]
            if types is int and isinstance(val, bool):
                raise ConfigError(f"config key {key!r} must be an integer")
            if not isinstance(val, types):
                raise ConfigError(f"config key {key!r} has type {type(val).__name__}")
            cfg[key] = val
        elif default is _REQUIRED:
            raise ConfigError(f"config key {key!r} is required for {command}")
        else:
            cfg[key] = default
    if "family" in cfg and cfg["family"] not in FAMILIES:
        raise ConfigError(f"unknown family {cfg['family']!r}")
    if cfg.get("range_convention") not in (None,) + RANGE_CONVENTIONS:
        raise ConfigError(f"unknown range_convention {cfg['range_convention']!r}")
    if "design" in cfg:
        if cfg["design"] not in ("grid", "file"):
            raise ConfigError(f"design must be 'grid' or 'file', got {cfg['design']!r}")
        if cfg["design"] == "file":
            if not cfg.get("design_path"):
                raise ConfigError("design 'file' requires design_path")
            if any(k in raw for k in ("grid_k", "grid_increment", "grid_jitter", "grid_points")):
                raise ConfigError("exactly one design source: grid_* keys conflict with design 'file'")
            if not Path(cfg["design_path"]).exists():
                raise ConfigError(f"design file not found: {cfg['design_path']}")
        elif "design_path" in raw:
            raise ConfigError("exactly one design source: design_path conflicts with design 'grid'")
    if "method" in cfg and cfg["method"] not in METHOD_KINDS:
        raise ConfigError(f"unknown method {cfg['method']!r}")
    if cfg.get("methods") is not None:
        allowed = tuple(_SWEEP_LABELS) if command == "are" else METHOD_KINDS
        for m in cfg["methods"]:
            if m not in allowed:
                raise ConfigError(f"unknown method {m!r} in methods")
    return cfg


def _config_hash(cfg):
    return hashlib.sha256(
        json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _model_from(cfg):
    return CovarianceSpec(cfg["family"], float(cfg["sigma2"]), float(cfg["phi"]),
                          nugget=float(cfg["nugget"]),
                          range_convention=cfg["range_convention"])


def _design_from(cfg, seed):
    if cfg["design"] == "file":
        return read_locations_csv(cfg["design_path"], radius_km=cfg["earth_radius_km"])
    return perturbed_grid_design(cfg["grid_k"], increment=cfg["grid_increment"],
                                 jitter=cfg["grid_jitter"], seed=seed,
                                 n_points=cfg["grid_points"])


def _objective_from(kind, cfg, model):
    if kind in ("taper1", "taper2"):
        d = cfg.get("taper_range")
        if d is None:
            raise ConfigError(f"method {kind!r} requires taper_range")
        return ObjectiveSpec(kind, taper=TaperSpec("wendland", float(d)))
    if kind.startswith("pl_"):
        cut = cfg.get("cutoff")
        return ObjectiveSpec(kind, cutoff=None if cut is None else float(cut))
    return ObjectiveSpec("ml")


def _free_from(cfg, model):
    free = cfg.get("free")
    if free is None:
        free = ["sigma2", "phi"] + (["nugget"] if model.nugget > 0 else [])
    for name in free:
        if name not in ("sigma2", "phi", "nugget"):
            raise ConfigError(f"unknown free parameter {name!r}")
    return tuple(free)


def _fit_kwargs(cfg):
    return dict(n_starts=cfg["n_starts"], phi_starts=cfg["phi_starts"],
                max_iter=cfg["max_iter"], compute_info=cfg["standard_errors"])


def _write_manifest(out_dir, command, cfg, outputs, extra=None):
    manifest = {"command": command, "config_hash": _config_hash(cfg),
                "seed": cfg.get("seed"), "config": cfg, "outputs": sorted(outputs)}
    if extra:
        manifest.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _fmt(x):
    return repr(float(x))


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg, out_dir, threads):
    model = _model_from(cfg)
    locs = _design_from(cfg, cfg["seed"])
    reals = simulate_batch(model, locs, cfg["replicates"], cfg["seed"], threads=threads)
    out = out_dir / "realizations.csv"
    write_realizations_csv(out, locs, reals)
    _write_manifest(out_dir, "simulate", cfg, [out.name])
    print(f"wrote {out} ({cfg['replicates']} replicate(s), n={locs.n})")
    return EXIT_OK


def _load_field(path):
    try:
        return read_field_csv(path)
    except (ValueError, OSError) as exc:
        raise ConfigError(str(exc)) from exc


def cmd_fit(cfg, out_dir, threads, data_path):
    locs, z = _load_field(data_path)
    model = _model_from(cfg)
    objective = _objective_from(cfg["method"], cfg, model)
    free = _free_from(cfg, model)
    pairs = build_pairs(objective, locs)
    if pairs is not None:
        print(f"method {cfg['method']}: {pairs.size} pairs within "
              f"{'unbounded' if pairs.cutoff is None else pairs.cutoff}")
    result = fit(objective, model, locs, z, free=free, **_fit_kwargs(cfg))
    report = result.to_dict()
    report["method_label"] = _METHOD_LABELS[cfg["method"]]
    report["n_observations"] = locs.n
    out = out_dir / "fit.json"
    out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _write_manifest(out_dir, "fit", cfg, [out.name])
    print(f"wrote {out} (converged={result.converged})")
    return EXIT_OK if result.converged else EXIT_NONCONVERGED


def cmd_benchmark(cfg, out_dir, threads):
    model = _model_from(cfg)
    d = float(cfg["taper_range"]) if cfg["taper_range"] is not None else model.phi
    tspec = TaperSpec("wendland", d)
    rows = []
    for k in range(cfg["k_max"] + 1):
        sub = dict(cfg, grid_k=k)
        locs = _design_from(sub, cfg["seed"])
        z = simulate_batch(model, locs, 1, cfg["seed"] + k)[0].values
        pairs_d = pairs_within(locs, d)
        pairs_all = pairs_within(locs, None)
        nnz = (locs.n + 2 * pairs_d.size) / locs.n ** 2
        timings = {}
        for name, objective, pairs in (
                ("ml", ObjectiveSpec("ml"), None),
                ("taper2", ObjectiveSpec("taper2", taper=tspec), pairs_d),
                ("pl_m", ObjectiveSpec("pl_marginal"), pairs_all),
                ("pl_m_d", ObjectiveSpec("pl_marginal", cutoff=d), pairs_d)):
            evaluate(objective, model, locs, z, pairs=pairs, with_grad=False)  # warm-up
            t0 = time.perf_counter()
            evaluate(objective, model, locs, z, pairs=pairs, with_grad=False)
            timings[name] = time.perf_counter() - t0
        rows.append((locs.n, timings["ml"], timings["taper2"], timings["pl_m"],
                     timings["pl_m_d"], nnz))
        print(f"k={k} n={locs.n}: ml={timings['ml']:.3f}s taper2={timings['taper2']:.3f}s "
              f"pl_m={timings['pl_m']:.3f}s pl_m(d)={timings['pl_m_d']:.3f}s nnz={nnz:.4f}")
    out = out_dir / "benchmark.csv"
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("n,ml_seconds,taper2_seconds,pl_m_seconds,pl_m_cutoff_seconds,percent_nonzero\n")
        for row in rows:
            fh.write(",".join([str(row[0])] + [_fmt(v) for v in row[1:]]) + "\n")
    _write_manifest(out_dir, "benchmark", cfg, [out.name])
    return EXIT_OK


def cmd_are(cfg, out_dir, threads):
    model = _model_from(cfg)
    locs = _design_from(cfg, cfg["seed"])
    percents = cfg["percents"] or [round(0.01 * i, 2) for i in range(1, 21)]
    methods = cfg["methods"] or ["taper", "marginal", "conditional", "difference"]
    for m in methods:
        if m not in _SWEEP_LABELS:
            raise ConfigError(f"unknown sweep method {m!r}")
    free = tuple(cfg["free"]) if cfg["free"] else ("sigma2", "phi")
    reports = are_sweep(methods, model, locs, percents, free=free)
    out = out_dir / "are.csv"
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("method,percent_nonzero,d,are\n")
        for r in reports:
            if r.error:
                print(f"warning: {_SWEEP_LABELS[r.method]} at {r.percent_target}: {r.error}",
                      file=sys.stderr)
            fh.write(f"{_SWEEP_LABELS[r.method]},{_fmt(r.percent_nonzero)},"
                     f"{_fmt(r.d)},{_fmt(r.are) if np.isfinite(r.are) else 'nan'}\n")
    _write_manifest(out_dir, "are", cfg, [out.name])
    print(f"wrote {out} ({len(reports)} rows)")
    return EXIT_OK


def _study_task(args):
    objective, model, locs, z, free, fit_kw = args
    t0 = time.perf_counter()
    try:
        res = fit(objective, model, locs, z, free=free, compute_info=False,
                  **{k: v for k, v in fit_kw.items() if k != "compute_info"})
        return res.params(), res.converged, time.perf_counter() - t0, None
    except (NotPositiveDefiniteError, DegenerateCorrelationError,
            SingularInformationError, np.linalg.LinAlgError) as exc:
        return None, False, time.perf_counter() - t0, str(exc)


def cmd_study(cfg, out_dir, threads):
    model = _model_from(cfg)
    locs = _design_from(cfg, cfg["seed"])
    free = _free_from(cfg, model)
    objectives = [(m, _objective_from(m, cfg, model)) for m in cfg["methods"]]
    reals = simulate_batch(model, locs, cfg["replicates"], cfg["seed"], threads=threads)
    fit_kw = _fit_kwargs(cfg)
    tasks = [(obj, model, locs, reals[rep].values, free, fit_kw)
             for rep in range(cfg["replicates"]) for _, obj in objectives]
    labels = [(rep, m) for rep in range(cfg["replicates"]) for m, _ in objectives]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_study_task, tasks, chunksize=1))
    else:
        results = [_study_task(t) for t in tasks]
    n_failures = 0
    out = out_dir / "study.csv"
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("rep,method,param,estimate,converged,seconds\n")
        for (rep, method), (params, converged, seconds, err) in zip(labels, results):
            if not converged:
                n_failures += 1
            label = _METHOD_LABELS[method]
            if params is None:
                fh.write(f"{rep},{label},error,nan,False,{seconds:.3f}\n")
                continue
            for name, value in params.items():
                fh.write(f"{rep},{label},{name},{_fmt(value)},{converged},{seconds:.3f}\n")
    _write_manifest(out_dir, "study", cfg, [out.name], extra={"n_failures": n_failures})
    print(f"wrote {out} ({cfg['replicates']} replicates, {n_failures} non-convergent fits)")
    return EXIT_OK


def cmd_scores(cfg, out_dir, threads, data_path):
    locs, z = _load_field(data_path)
    base = _model_from(cfg)
    variants = [("with_nugget", base if base.nugget > 0 else base.replace(nugget=0.1 * base.sigma2),
                 ("sigma2", "phi", "nugget")),
                ("without_nugget", base.replace(nugget=0.0), ("sigma2", "phi"))]
    rows = []
    for model_label, start, free in variants:
        for method in cfg["methods"]:
            objective = _objective_from(method, cfg, start)
            res = fit(objective, start, locs, z, free=free, **_fit_kwargs(cfg))
            fitted = start.with_theta(free, res.theta)
            rep = predictive_scores(loo_predict(fitted, locs, z), z)
            rows.append((model_label, _METHOD_LABELS[method], rep, res.converged))
    out = out_dir / "scores.csv"
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("model,method,rmse,lscore,crps\n")
        for model_label, label, rep, _ in rows:
            fh.write(f"{model_label},{label},{_fmt(rep.rmse)},{_fmt(rep.lscore)},{_fmt(rep.crps)}\n")
    _write_manifest(out_dir, "scores", cfg, [out.name])
    print(f"wrote {out} ({len(rows)} rows)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(sub, with_data=False):
    sub.add_argument("--config", required=True, help="path to the flat JSON run config")
    sub.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub.add_argument("--threads", type=int, default=1, help="worker parallelism (never changes results)")
    sub.add_argument("--out", default=".", help="output directory")
    sub.add_argument("--method", default=None, help="override the config method")
    sub.add_argument("--cutoff", type=float, default=None, help="override the pairwise cut-off distance")
    sub.add_argument("--taper-range", type=float, default=None, help="override the taper range")
    sub.add_argument("--model", default=None, help="override the covariance family")
    if with_data:
        sub.add_argument("data", help="observation CSV with header x,y,z or lon,lat,z")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="covest",
        description="Covariance estimation for Gaussian random fields: exact, tapered "
                    "and pairwise composite likelihoods.")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("simulate", help="draw seeded field realizations"))
    _add_common(sub.add_parser("fit", help="fit one method to an observation CSV"), with_data=True)
    _add_common(sub.add_parser("benchmark", help="time one evaluation of each objective"))
    _add_common(sub.add_parser("are", help="asymptotic-relative-efficiency sweep"))
    _add_common(sub.add_parser("study", help="simulate-and-fit Monte Carlo study"))
    _add_common(sub.add_parser("scores", help="leave-one-out predictive score comparison"), with_data=True)
    return parser


def _effective_config(args):
    path = Path(args.config)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    overrides = {"seed": args.seed, "cutoff": args.cutoff, "taper_range": args.taper_range,
                 "method": args.method, "family": args.model}
    for key, val in overrides.items():
        if val is not None:
            raw[key] = val
    return _validate_config(args.command, raw)


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = _effective_config(args)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        threads = max(1, args.threads)
        if args.command == "simulate":
            return cmd_simulate(cfg, out_dir, threads)
        if args.command == "fit":
            return cmd_fit(cfg, out_dir, threads, args.data)
        if args.command == "benchmark":
            return cmd_benchmark(cfg, out_dir, threads)
        if args.command == "are":
            return cmd_are(cfg, out_dir, threads)
        if args.command == "study":
            return cmd_study(cfg, out_dir, threads)
        if args.command == "scores":
            return cmd_scores(cfg, out_dir, threads, args.data)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NotPositiveDefiniteError, DegenerateCorrelationError,
            SingularInformationError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
