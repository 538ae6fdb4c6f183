"""Experiment config files and the results directory layout.

Config (JSON)::

    {
      "seed": 1,                       # trial-seed root
      "n_trials": 5,
      "grid": "full",                 # or a list of {model, structure, aggregation, hidden_units}
      "hidden_units": [10, 50, 100],   # used with "full"
      "training": {"epochs": 20, "learning_rate": 0.01, "epsilon": 1e-8, "init_sd": 0.01},
      "split": {"test_fraction": 0.2, "validation_fraction_of_train": 0.2, "seed": 1},
      "generator": {...GeneratorConfig fields...},   # or "dataset": "cohort.csv"
      "criteria": {...AkiCriteria fields...},        # optional, dataset labeling
      "out": "results/run1",
      "svg": false
    }

Results directory::

    manifest.json                  resolved config, seeds, versions, data stats
    trials/<config>/trial_NNN.json one TrialResult each
    summary.json                   selection + test metrics + validation distributions
    table.md / table.csv           test-performance table
    validation_distributions.md/.csv
    svg/                           optional histograms

No wall-clock values are written, so reruns with the same config produce
byte-identical files.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, fields
from pathlib import Path

from . import __version__
from .cohort import AkiCriteria, cohort_stats, fill_cohort, ingest
from .report import (
    DIST_METRICS,
    quantile_summary,
    render_distributions_csv,
    render_distributions_md,
    render_histogram_svg,
    render_table_csv,
    render_table_md,
)
from .synth import GeneratorConfig, generate_cohort
from .training import (
    SplitSpec,
    TrialConfig,
    full_grid,
    patient_split,
    run_trials,
    trial_seed,
)


class ConfigError(ValueError):
    pass


_TRAINING_KEYS = {"epochs", "learning_rate", "epsilon", "init_sd"}
_TOP_KEYS = {"seed", "n_trials", "grid", "hidden_units", "training", "split", "generator", "dataset",
             "criteria", "out", "svg", "name"}


def load_config(path):
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return resolve_config(cfg, base_dir=Path(path).parent)


def resolve_config(cfg, base_dir=None):
    """Validate a config dict and fill defaults; returns a new dict."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if ("generator" in cfg) == ("dataset" in cfg):
        raise ConfigError("config needs exactly one of 'generator' or 'dataset'")
    out = dict(cfg)
    out.setdefault("seed", 0)
    out.setdefault("n_trials", 100)
    out.setdefault("grid", "full")
    out.setdefault("hidden_units", [10, 50, 100])
    out.setdefault("svg", False)
    training = dict(out.get("training") or {})
    if set(training) - _TRAINING_KEYS:
        raise ConfigError(f"unknown training keys: {sorted(set(training) - _TRAINING_KEYS)}")
    out["training"] = training
    try:
        out["split"] = asdict(SplitSpec(**(out.get("split") or {})))
        if "generator" in out:
            out["generator"] = asdict(GeneratorConfig.from_dict(out["generator"] or {}))
        if out.get("criteria") is not None:
            out["criteria"] = asdict(AkiCriteria(**out["criteria"]))
        build_grid(out)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid config: {exc}") from None
    if not isinstance(out["n_trials"], int) or out["n_trials"] < 1:
        raise ConfigError("n_trials must be a positive integer")
    if "dataset" in out and base_dir is not None and not os.path.isabs(out["dataset"]):
        out["dataset"] = str(Path(base_dir) / out["dataset"])
    return out


def build_grid(cfg):
    training = cfg.get("training") or {}
    if cfg["grid"] == "full":
        return full_grid(tuple(cfg["hidden_units"]), **training)
    if not isinstance(cfg["grid"], list) or not cfg["grid"]:
        raise ConfigError("grid must be 'full' or a nonempty list")
    allowed = {f.name for f in fields(TrialConfig)} - {"trial_seed"}
    grid = []
    for item in cfg["grid"]:
        if set(item) - allowed:
            raise ConfigError(f"unknown grid entry keys: {sorted(set(item) - allowed)}")
        grid.append(TrialConfig(**{**training, **item}))
    return grid


def load_data(cfg):
    """Filled cohort plus a provenance record."""
    if "generator" in cfg:
        gcfg = GeneratorConfig(**cfg["generator"])
        cohort, info = generate_cohort(gcfg, fill=True, return_info=True)
        return cohort, {"source": "generator", "intercept": info["intercept"]}
    criteria = AkiCriteria(**cfg["criteria"]) if cfg.get("criteria") else None
    cohort = ingest(cfg["dataset"], criteria=criteria)
    return fill_cohort(cohort), {"source": "dataset", "path": cfg["dataset"], "warnings": len(cohort.warnings)}


def summarize_experiment(result, grid):
    configs = []
    for cfg in grid:
        trials = result.trials[cfg.name]
        dist = {m: quantile_summary([t.final_validation.get(m) for t in trials if not t.diverged])
                for m in DIST_METRICS}
        configs.append({
            "name": cfg.name,
            "config": {k: v for k, v in asdict(cfg).items() if k != "trial_seed"},
            "selected_trial": result.selected.get(cfg.name),
            "diverged_trials": [t.trial_index for t in trials if t.diverged],
            "test": result.test.get(cfg.name),
            "validation_distribution": dist,
        })
    prevalence = next((t["prevalence"] for t in result.test.values()), None)
    return {"configs": configs, "failed": result.failed, "test_prevalence": prevalence}


def _dump(path, doc):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def write_reports(out, summary, result=None, svg=False):
    out = Path(out)
    (out / "table.md").write_text(render_table_md(summary))
    (out / "table.csv").write_text(render_table_csv(summary))
    (out / "validation_distributions.md").write_text(render_distributions_md(summary))
    (out / "validation_distributions.csv").write_text(render_distributions_csv(summary))
    if svg and result is not None:
        d = out / "svg"
        d.mkdir(exist_ok=True)
        for name, trials in result.trials.items():
            for m in DIST_METRICS:
                vals = [t.final_validation.get(m) for t in trials if not t.diverged]
                (d / f"{name}_{m}.svg").write_text(render_histogram_svg(vals, f"{name} {m}"))


def run_experiment(cfg, out=None, workers=1, progress=None):
    """Run a resolved config end to end and write the results directory."""
    out = Path(out or cfg.get("out") or "results")
    grid = build_grid(cfg)
    cohort, data_info = load_data(cfg)
    split = SplitSpec(**cfg["split"])
    train, val, test = patient_split(cohort, split)
    result = run_trials(grid, cfg["n_trials"], train, val, test, seed=cfg["seed"], workers=workers,
                        progress=progress)

    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": "nestseq",
        "version": __version__,
        "config": cfg,
        "data": dict(data_info, stats=cohort_stats(cohort)),
        "split_sizes": {"train": len(train), "validation": len(val), "test": len(test)},
        "trial_seeds": [trial_seed(cfg["seed"], t) for t in range(cfg["n_trials"])],
    }
    _dump(out / "manifest.json", manifest)
    for name, trials in result.trials.items():
        for t in trials:
            _dump(out / "trials" / name / f"trial_{t.trial_index:03d}.json", t.to_dict())
    summary = summarize_experiment(result, grid)
    _dump(out / "summary.json", summary)
    write_reports(out, summary, result, svg=cfg.get("svg", False))
    return result, summary


def load_summary(out):
    return json.loads((Path(out) / "summary.json").read_text())
