"""Run configuration, the three CLI commands, and the file outputs.

The configuration is a single JSON document.  Field names are camelCase
on disk; validation failures raise ConfigError with the dotted field
path.  Outputs are deterministic given the config and its seeds:

* ``train``  -> metrics.csv (fixed column order), summary.json, and two
  rendered figures;
* ``bounds`` -> bounds_report.json, bounds_curve.csv, and one figure;
* ``verify`` -> per-suite pass/fail lines on stdout plus
  verify_summary.json.

Exit codes: 0 success, 1 verification failure, 2 config error,
3 numerical failure.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import bounds, dataio, diagnostics, netcore, optim, plotting, suites
from .errors import ConfigError, InputError, NumericalError, PdlearnError
from .generators import NormPowerFn, make_generator
from .netcore import NetworkSpec

#: metrics.csv column order; a golden-header test pins this exactly.
CSV_COLUMNS = [
    "step", "riskSurrogate", "log2Risk", "gradEnergy", "lambdaMin",
    "lambdaMax", "lowerBound", "upperBound", "log2Lower", "log2Upper",
    "pearsonRiskUpper", "pearsonRiskLower",
]

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _require(mapping, key, path, kind=None):
    if not isinstance(mapping, dict):
        raise ConfigError(path or key, "expected a JSON object")
    if key not in mapping:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
    value = mapping[key]
    if kind is not None and not isinstance(value, kind):
        names = kind if isinstance(kind, tuple) else (kind,)
        raise ConfigError(f"{path}.{key}" if path else key,
                          f"expected {'/'.join(k.__name__ for k in names)}, "
                          f"got {type(value).__name__}")
    return value


def _optional(mapping, key, default):
    return mapping.get(key, default) if isinstance(mapping, dict) else default


@dataclass(frozen=True)
class BoundsConfig:
    mc_trials: int = 1000
    mc_sample_size: int = 500
    eps_grid: tuple = ()
    seed: int = 0

    def to_dict(self):
        return {
            "mcTrials": self.mc_trials,
            "mcSampleSize": self.mc_sample_size,
            "epsGrid": list(self.eps_grid),
            "seed": self.seed,
        }


@dataclass(frozen=True)
class RunConfig:
    """Parsed run configuration (see README for the JSON schema)."""

    task: dict
    model: NetworkSpec
    model_init_seed: int
    model_init_scale: float
    generator: dict
    sgd: optim.SgdConfig
    pearson_window: int
    outputs: str
    bounds_cfg: BoundsConfig
    train_samples: int

    @staticmethod
    def from_dict(doc) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("<root>", "config must be a JSON object")

        task = _require(doc, "task", "", dict)
        task_type = _require(task, "type", "task", str)
        if task_type == "synthetic":
            try:
                dataio.SyntheticTaskSpec.from_dict(task)
            except (KeyError, TypeError) as exc:
                raise ConfigError("task", f"bad synthetic task: {exc}") from exc
            except InputError as exc:
                raise ConfigError("task", str(exc)) from exc
            out_dim = int(task["cardY"])
            in_dim = int(task["embedDim"])
        elif task_type == "idx":
            for key in ("imagesPath", "labelsPath"):
                _require(task, key, "task", str)
            in_dim = 28 * 28
            out_dim = 10
        else:
            raise ConfigError("task.type", f"unknown task type {task_type!r}")

        model_doc = _require(doc, "model", "", dict)
        if "preset" in model_doc:
            preset = _require(model_doc, "preset", "model", str)
            try:
                model = netcore.model_preset(
                    preset, input_dim=in_dim, output_dim=out_dim,
                    k=int(_optional(model_doc, "repeat", 1)))
            except InputError as exc:
                raise ConfigError("model.preset", str(exc)) from exc
        else:
            try:
                model = NetworkSpec.from_dict(model_doc)
            except (KeyError, TypeError) as exc:
                raise ConfigError("model", f"bad network spec: {exc}") from exc
            except InputError as exc:
                raise ConfigError("model", str(exc)) from exc
        if model.input_dim != in_dim:
            raise ConfigError("model.inputDim",
                              f"model expects {model.input_dim} inputs but the "
                              f"task provides {in_dim}")
        if model.output_dim != out_dim:
            raise ConfigError("model.outputDim",
                              f"model has {model.output_dim} outputs but the "
                              f"task has {out_dim} labels")
        init_seed = int(_optional(model_doc, "initSeed", 0))
        init_scale = float(_optional(model_doc, "initScale", 1.0))
        if not init_scale > 0:
            raise ConfigError("model.initScale", "must be > 0")

        gen_doc = _require(doc, "generator", "", dict)
        variant = _require(gen_doc, "variant", "generator", str)
        try:
            make_generator(variant, out_dim,
                           order=_optional(gen_doc, "order", None),
                           scale=_optional(gen_doc, "scale", None))
        except InputError as exc:
            raise ConfigError("generator", str(exc)) from exc

        sgd_doc = _require(doc, "sgd", "", dict)
        mode = _require(sgd_doc, "mode", "sgd", str)
        xi = None
        if mode == "optimalFromXi":
            xi_doc = _require(sgd_doc, "xi", "sgd", dict)
            try:
                xi = NormPowerFn(order=float(_require(xi_doc, "order", "sgd.xi")),
                                 scale=float(_optional(xi_doc, "scale", 1.0)))
            except InputError as exc:
                raise ConfigError("sgd.xi", str(exc)) from exc
        try:
            sgd = optim.SgdConfig(
                mode=mode,
                alpha=(float(sgd_doc["alpha"]) if "alpha" in sgd_doc else None),
                xi=xi,
                batch_size=int(_require(sgd_doc, "batchSize", "sgd")),
                steps=int(_require(sgd_doc, "steps", "sgd")),
                seed=int(_require(sgd_doc, "seed", "sgd")),
                eigen_every=int(_optional(sgd_doc, "eigenEvery", 1)),
            )
        except InputError as exc:
            raise ConfigError("sgd", str(exc)) from exc
        except (TypeError, ValueError) as exc:
            raise ConfigError("sgd", f"bad field value: {exc}") from exc

        window = int(_optional(doc, "pearsonWindow", 20))
        if window < 2:
            raise ConfigError("pearsonWindow", "must be >= 2")

        train_samples = int(_optional(doc, "trainSamples",
                                      _optional(task, "trainSamples", 0)))
        if task_type == "synthetic" and sgd.steps > 0 and train_samples < 1:
            raise ConfigError("trainSamples",
                              "synthetic training needs trainSamples >= 1")

        bounds_doc = _optional(doc, "bounds", {})
        bcfg = BoundsConfig(
            mc_trials=int(_optional(bounds_doc, "mcTrials", 1000)),
            mc_sample_size=int(_optional(bounds_doc, "mcSampleSize", 500)),
            eps_grid=tuple(float(e) for e in _optional(bounds_doc, "epsGrid", [])),
            seed=int(_optional(bounds_doc, "seed", 0)),
        )
        if bcfg.mc_trials < 100:
            raise ConfigError("bounds.mcTrials", "must be >= 100")

        return RunConfig(
            task=dict(task), model=model, model_init_seed=init_seed,
            model_init_scale=init_scale, generator=dict(gen_doc), sgd=sgd,
            pearson_window=window, outputs=str(_optional(doc, "outputs", ".")),
            bounds_cfg=bcfg, train_samples=train_samples,
        )

    def to_dict(self):
        sgd = {
            "mode": self.sgd.mode,
            "batchSize": self.sgd.batch_size,
            "steps": self.sgd.steps,
            "seed": self.sgd.seed,
            "eigenEvery": self.sgd.eigen_every,
        }
        if self.sgd.alpha is not None:
            sgd["alpha"] = self.sgd.alpha
        if self.sgd.xi is not None:
            sgd["xi"] = {"order": self.sgd.xi.order, "scale": self.sgd.xi.scale}
        model = self.model.to_dict()
        model["initSeed"] = self.model_init_seed
        model["initScale"] = self.model_init_scale
        return {
            "task": dict(self.task),
            "model": model,
            "generator": dict(self.generator),
            "sgd": sgd,
            "pearsonWindow": self.pearson_window,
            "trainSamples": self.train_samples,
            "bounds": self.bounds_cfg.to_dict(),
            "outputs": self.outputs,
        }


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError("<file>", f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
    return RunConfig.from_dict(doc)


def _build_generator(cfg: RunConfig):
    gen_doc = cfg.generator
    return make_generator(gen_doc["variant"], cfg.model.output_dim,
                          order=gen_doc.get("order"), scale=gen_doc.get("scale"))


def _build_task(cfg: RunConfig):
    """Returns (finite_pd_or_none, features, labels)."""
    task = cfg.task
    if task["type"] == "synthetic":
        q = dataio.make_synthetic(dataio.SyntheticTaskSpec.from_dict(task))
        if cfg.train_samples > 0:
            pairs = dataio.sample(q, cfg.train_samples,
                                  seed=int(task.get("sampleSeed", task["seed"])) + 1)
            feats, labels = dataio.labeled_arrays(q, pairs)
        else:
            feats = np.zeros((0, q.embed_dim))
            labels = np.zeros(0, dtype=np.int64)
        return q, feats, labels
    ds = dataio.load_idx(task["imagesPath"], task["labelsPath"])
    if "perClass" in task:
        ds = dataio.subsample(ds, int(task["perClass"]),
                              seed=int(task.get("subsampleSeed", 0)))
    feats = ds.flattened()
    labels = ds.labels
    # empirical joint over the loaded items: each item is its own feature
    joint = np.zeros((len(ds), 10))
    joint[np.arange(len(ds)), labels] = 1.0 / len(ds)
    q = bounds.FinitePD(joint=joint, feature_embedding=feats)
    return q, feats, labels


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if not np.isfinite(value):
            return ""
        return repr(value)
    return str(value)


def write_metrics_csv(path, rows, pearson_upper, pearson_lower):
    lines = [",".join(CSV_COLUMNS)]
    for row, pu, pl in zip(rows, pearson_upper, pearson_lower):
        lines.append(",".join([
            _fmt(row.step),
            _fmt(row.risk_surrogate),
            _fmt(row.log2_risk),
            _fmt(row.grad_energy),
            _fmt(row.lambda_min),
            _fmt(row.lambda_max),
            _fmt(row.lower_bound),
            _fmt(row.upper_bound),
            _fmt(row.log2_lower),
            _fmt(row.log2_upper),
            _fmt(pu),
            _fmt(pl),
        ]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def pearson_columns(rows, window):
    """Sliding-window correlations of log2 risk against the log2 bounds.

    Computed over the subsequence of rows that carry bound values; rows
    without bounds (or with too little history) get None.
    """
    upper_col = [None] * len(rows)
    lower_col = [None] * len(rows)
    logged = [(i, r) for i, r in enumerate(rows)
              if r.upper_bound is not None and r.lower_bound is not None]
    if len(logged) >= window:
        risk_series = np.array([r.log2_risk for _i, r in logged])
        upper_series = np.array([r.log2_upper if r.log2_upper is not None
                                 else np.nan for _i, r in logged])
        lower_series = np.array([r.log2_lower if r.log2_lower is not None
                                 else np.nan for _i, r in logged])
        pu = diagnostics.local_pearson(risk_series, upper_series, window)
        pl = diagnostics.local_pearson(risk_series, lower_series, window)
        for (i, _r), u, l in zip(logged, pu, pl):
            upper_col[i] = u
            lower_col[i] = l
    return upper_col, lower_col


def cmd_train(config_path, out_dir, figures=True) -> int:
    """Run the configured training experiment and write its artifacts."""
    cfg = load_config(config_path)
    os.makedirs(out_dir, exist_ok=True)
    gen = _build_generator(cfg)
    q, feats, labels = _build_task(cfg)
    theta0 = netcore.init_params(cfg.model, seed=cfg.model_init_seed,
                                 scale=cfg.model_init_scale)
    if cfg.sgd.steps > 0:
        trace = optim.train(cfg.model, gen, feats, labels, cfg.sgd, theta0)
    else:
        trace = optim.TrainTrace(rows=[], final_params=theta0,
                                 descent_violations=None)

    pu, pl = pearson_columns(trace.rows, cfg.pearson_window)
    write_metrics_csv(os.path.join(out_dir, "metrics.csv"), trace.rows, pu, pl)

    lower, upper = bounds.risk_bounds(gen, q)
    summary = {
        "finalRisk": bounds.risk(gen, q, cfg.model, trace.final_params),
        "riskLowerBound": lower,
        "riskUpperBound": upper,
        "gamma": bounds.gamma_max_loss(gen, cfg.model, trace.final_params, q),
        "zeta": bounds.information_loss(cfg.model, trace.final_params, q),
        "descentViolations": trace.descent_violations,
        "steps": cfg.sgd.steps,
        "config": cfg.to_dict(),
    }
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if figures and trace.rows:
        plotting.render_train_curves(trace.rows, pu, pl,
                                     os.path.join(out_dir, "train_curves.png"))
        plotting.render_train_indicators(
            trace.rows, os.path.join(out_dir, "train_indicators.png"))
    return EXIT_OK


def cmd_bounds(config_path, out_dir, figures=True) -> int:
    """Write the bound report for the configured task and model."""
    cfg = load_config(config_path)
    os.makedirs(out_dir, exist_ok=True)
    gen = _build_generator(cfg)
    q, _feats, _labels = _build_task(cfg)
    theta = netcore.init_params(cfg.model, seed=cfg.model_init_seed,
                                scale=cfg.model_init_scale)

    lower, upper = bounds.risk_bounds(gen, q)
    gamma = bounds.gamma_max_loss(gen, cfg.model, theta, q)
    zeta = bounds.information_loss(cfg.model, theta, q)
    n = cfg.bounds_cfg.mc_sample_size
    valid_from = gamma * float(np.sqrt(
        5.0 * (q.card_x - zeta) * q.card_y / n))
    eps_grid = list(cfg.bounds_cfg.eps_grid) or [
        0.5 * valid_from, valid_from, 1.25 * valid_from, 1.5 * valid_from,
        2.0 * valid_from]
    report = bounds.mc_generalization_check(
        gen, cfg.model, theta, q, n=n, trials=cfg.bounds_cfg.mc_trials,
        eps_grid=eps_grid, seed=cfg.bounds_cfg.seed)

    doc = {
        "riskLowerBound": lower,
        "riskUpperBound": upper,
        "generalizedConditionalEntropy": lower,
        "generalizedMutualInformation": upper - lower,
        "generator": cfg.generator.get("variant"),
        "concentration": report.to_dict(),
        "config": cfg.to_dict(),
    }
    if cfg.generator.get("variant") == "NegEntropySimplex":
        doc["shannonConditionalEntropyNats"] = lower
        doc["shannonMutualInformationNats"] = upper - lower
    with open(os.path.join(out_dir, "bounds_report.json"), "w",
              encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")

    curve_path = os.path.join(out_dir, "bounds_curve.csv")
    lines = ["eps,bound,empiricalExceedance,valid"]
    for eps, b, f in zip(report.eps_grid, report.bound_values,
                         report.empirical_exceedance):
        lines.append(f"{eps!r},{b!r},{f!r},{int(eps >= report.valid_from)}")
    with open(curve_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")

    if figures:
        plotting.render_bound_curve(report,
                                    os.path.join(out_dir, "bounds_curve.png"))
    return EXIT_OK


def cmd_verify(suite=None, out_dir=".", fault=None) -> int:
    """Run the property suites, print one line each, write the JSON summary."""
    names = None if suite is None else [suite]
    results = suites.run_suites(names=names, fault=fault)
    os.makedirs(out_dir, exist_ok=True)
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"{status} {res.name} ({len(res.checks)} checks, "
              f"{res.duration:.2f}s)")
        for check in res.checks:
            mark = "ok" if check.passed else "FAILED"
            print(f"    [{mark}] {check.name}: {check.detail}")
    summary = {
        "allPassed": all(r.passed for r in results),
        "suites": [r.to_dict() for r in results],
    }
    with open(os.path.join(out_dir, "verify_summary.json"), "w",
              encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK if summary["allPassed"] else EXIT_VERIFY_FAILED
