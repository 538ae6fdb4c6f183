"""AdaGrad, patient-grouped splits and the multi-trial training protocol."""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .metrics import summarize
from .models import (
    MlpParams,
    RnnParams,
    bce_loss,
    mlp_backward,
    mlp_forward,
    nest_backward,
    nest_forward,
    params_to_dict,
    rnn_backward,
    rnn_forward,
)
from .numerics import SeededRng, sigmoid
from .structures import Aggregation, Structure, build_samples


class TrainingError(ValueError):
    pass


class DivergedError(TrainingError):
    """Non-finite loss or gradient during training."""


# ----------------------------------------------------------------------------
# AdaGrad


@dataclass
class AdaGradState:
    accumulators: dict
    learning_rate: float = 0.01
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params, learning_rate=0.01, epsilon=1e-8):
        if not learning_rate > 0:
            raise TrainingError("learning_rate must be positive")
        acc = {k: np.zeros_like(v) for k, v in params.arrays().items()}
        return cls(acc, learning_rate, epsilon)


def adagrad_step(params, grads, state):
    """``acc += g**2``; ``theta -= lr * g / (sqrt(acc) + eps)``, in place.

    Non-finite gradients raise ``DivergedError`` before anything is modified.
    Returns ``(params, state)``.
    """
    garr = grads.arrays()
    parr = params.arrays()
    if garr.keys() != parr.keys():
        raise TrainingError(f"gradient tensors {sorted(garr)} do not match params {sorted(parr)}")
    for k, g in garr.items():
        if g.shape != parr[k].shape:
            raise TrainingError(f"gradient {k} has shape {g.shape}, params have {parr[k].shape}")
        if not np.all(np.isfinite(g)):
            raise DivergedError(f"non-finite gradient in {k}")
    lr, eps = state.learning_rate, state.epsilon
    for k, g in garr.items():
        acc = state.accumulators[k]
        acc += g * g
        parr[k] -= lr * g / (np.sqrt(acc) + eps)
    return params, state


# ----------------------------------------------------------------------------
# splitting


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.2
    validation_fraction_of_train: float = 0.2
    seed: int = 0

    def __post_init__(self):
        for name in ("test_fraction", "validation_fraction_of_train"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise TrainingError(f"{name} must lie in (0, 1)")


def split_counts(n, spec):
    """(train, validation, test) patient counts; Python ``round`` = half-to-even."""
    n_test = round(spec.test_fraction * n)
    n_val = round(spec.validation_fraction_of_train * (n - n_test))
    return n - n_test - n_val, n_val, n_test


def patient_split(cohort, spec):
    """Shuffle patients by ``spec.seed`` and cut them into train/validation/test cohorts.

    Every patient lands in exactly one part, so no stays of one patient are
    shared between parts.
    """
    n = len(cohort.patients)
    n_train, n_val, n_test = split_counts(n, spec)
    if min(n_train, n_val, n_test) < 1:
        raise TrainingError(
            f"split of {n} patients gives train/validation/test = {n_train}/{n_val}/{n_test}; "
            "every part needs at least one patient, enlarge the cohort"
        )
    perm = SeededRng(spec.seed).permutation(n)
    ids = [cohort.patients[i].id for i in perm]
    test_ids = ids[:n_test]
    val_ids = ids[n_test:n_test + n_val]
    train_ids = ids[n_test + n_val:]
    return (
        cohort.subset(train_ids, f"{cohort.provenance}|train"),
        cohort.subset(val_ids, f"{cohort.provenance}|validation"),
        cohort.subset(test_ids, f"{cohort.provenance}|test"),
    )


# ----------------------------------------------------------------------------
# trial configuration


@dataclass(frozen=True)
class TrialConfig:
    model: str = "MLP"
    structure: str = "MARKOV"
    aggregation: Optional[str] = "SUM"
    hidden_units: int = 10
    epochs: int = 20
    learning_rate: float = 0.01
    epsilon: float = 1e-8
    init_sd: float = 0.01
    trial_seed: int = 0

    def __post_init__(self):
        model = self.model.upper()
        structure = Structure(self.structure.upper()).value
        agg = None if self.aggregation is None else Aggregation(self.aggregation.upper()).value
        object.__setattr__(self, "model", model)
        object.__setattr__(self, "structure", structure)
        object.__setattr__(self, "aggregation", agg)
        if model not in ("MLP", "RNN"):
            raise TrainingError(f"unknown model {self.model!r}")
        if model == "MLP" and (structure == "NEST" or agg is None):
            raise TrainingError("MLP needs MARKOV or CONCAT with an aggregation")
        if model == "RNN" and agg is not None:
            raise TrainingError("aggregation applies only to the MLP")
        if self.hidden_units < 1 or self.epochs < 0:
            raise TrainingError("hidden_units must be >= 1 and epochs >= 0")
        if not (self.learning_rate > 0 and self.init_sd >= 0):
            raise TrainingError("learning_rate must be > 0 and init_sd >= 0")

    @property
    def input_struct(self):
        return self.structure if self.aggregation is None else f"{self.structure}-{self.aggregation}"

    @property
    def name(self):
        return f"H{self.hidden_units}-{self.model}-{self.input_struct}"

    @property
    def nested(self):
        return self.structure == "NEST"


def full_grid(hidden_units=(10, 50, 100), **overrides):
    """The nine model/structure combinations per width, in the results-table order."""
    grid = []
    for hu in hidden_units:
        for s in ("NEST", "MARKOV", "CONCAT"):
            grid.append(TrialConfig("RNN", s, None, hu, **overrides))
        for agg in ("MAX", "MEAN", "SUM"):
            for s in ("MARKOV", "CONCAT"):
                grid.append(TrialConfig("MLP", s, agg, hu, **overrides))
    return grid


def init_params(cfg, D=1):
    rng = SeededRng(cfg.trial_seed).spawn(0)
    if cfg.model == "MLP":
        return MlpParams.init(rng, cfg.hidden_units, D, cfg.init_sd)
    return RnnParams.init(rng, cfg.hidden_units, D, cfg.init_sd, nested=cfg.nested)


def prepare_samples(cohort, cfg):
    return build_samples(cohort, cfg.structure, cfg.aggregation)


def _loss_grad(sample, params, cfg):
    if cfg.model == "MLP":
        y, tr = mlp_forward(sample, params)
        return bce_loss(y, sample.label), mlp_backward(tr, sample, sample.label, params)
    if cfg.nested:
        logits, tr = nest_forward(sample, params)
        loss = sum(bce_loss(logits[i], l) for i, l in zip(sample.label_index, sample.labels))
        return loss, nest_backward(tr, sample, None, params)
    y, tr = rnn_forward(sample, params)
    return bce_loss(y, sample.label), rnn_backward(tr, sample, sample.label, params)


def score_samples(samples, params, cfg):
    """Hospitalization-level ``(probabilities, labels)``."""
    probs, labels = [], []
    for s in samples:
        if cfg.model == "MLP":
            y, _ = mlp_forward(s, params)
            probs.append(y)
            labels.append(s.label)
        elif cfg.nested:
            logits, _ = nest_forward(s, params)
            probs.extend(logits[i] for i in s.label_index)
            labels.extend(s.labels)
        else:
            y, _ = rnn_forward(s, params)
            probs.append(y)
            labels.append(s.label)
    return sigmoid(np.asarray(probs, dtype=np.float64)), np.asarray(labels, dtype=bool)


def _val_metrics(samples, params, cfg):
    p, y = score_samples(samples, params, cfg)
    if not np.all(np.isfinite(p)):
        raise DivergedError("non-finite validation scores")
    m = summarize(p, y)
    return {"auroc": m["auroc"], "auprc": m["auprc"], "log_loss": m["log_loss"]}


# ----------------------------------------------------------------------------
# single trial


@dataclass
class TrialResult:
    config: TrialConfig
    initial_validation: dict
    history: list  # one dict per completed epoch
    params: object
    diverged: bool = False
    message: str = ""
    trial_index: int = 0
    wall_clock: float = field(default=0.0, compare=False)

    @property
    def final_validation(self):
        return self.history[-1] if self.history else self.initial_validation

    @property
    def selection_score(self):
        s = self.final_validation.get("auroc", float("nan"))
        return -math.inf if self.diverged or not math.isfinite(s) else s

    def to_dict(self, include_timing=False):
        d = {
            "config": asdict(self.config),
            "name": self.config.name,
            "trial_index": self.trial_index,
            "diverged": self.diverged,
            "message": self.message,
            "initial_validation": self.initial_validation,
            "history": self.history,
            "params": params_to_dict(self.params),
        }
        if include_timing:
            d["wall_clock"] = self.wall_clock
        return d


def train_one(cfg, train, validation, trial_index=0):
    """Train one model for exactly ``cfg.epochs`` epochs of per-sample AdaGrad updates.

    Initial parameters come from ``cfg.trial_seed``; the per-epoch shuffling of
    training samples comes from a separate stream of the same seed. A NEST
    sample is one whole patient. Validation metrics are recorded before
    training and after every epoch. Divergence stops the trial and flags it.
    """
    t0 = time.perf_counter()
    tr_samples = prepare_samples(train, cfg)
    va_samples = prepare_samples(validation, cfg)
    if not tr_samples or not va_samples:
        raise TrainingError(f"{cfg.name}: empty training or validation samples")

    params = init_params(cfg)
    opt = AdaGradState.for_params(params, cfg.learning_rate, cfg.epsilon)
    order_rng = SeededRng(cfg.trial_seed).spawn(1)

    history = []
    diverged, message = False, ""
    initial = _val_metrics(va_samples, params, cfg)
    for epoch in range(1, cfg.epochs + 1):
        total = 0.0
        try:
            for i in order_rng.permutation(len(tr_samples)):
                loss, grads = _loss_grad(tr_samples[i], params, cfg)
                if not math.isfinite(loss):
                    raise DivergedError(f"non-finite training loss in epoch {epoch}")
                adagrad_step(params, grads, opt)
                total += loss
            row = {"epoch": epoch, "train_loss": total / len(tr_samples)}
            row.update(_val_metrics(va_samples, params, cfg))
        except DivergedError as exc:
            diverged, message = True, str(exc)
            break
        history.append(row)
    return TrialResult(cfg, initial, history, params, diverged, message, trial_index,
                       time.perf_counter() - t0)


def evaluate_test(params, test, cfg):
    """AUROC, AUPRC, log loss and prevalence over every labeled test stay."""
    samples = prepare_samples(test, cfg)
    if not samples:
        raise TrainingError("test set has no labeled hospitalizations")
    p, y = score_samples(samples, params, cfg)
    return summarize(p, y)


# ----------------------------------------------------------------------------
# multi-trial protocol


def trial_seed(master_seed, t):
    """Seed shared by trial ``t`` of every configuration."""
    return SeededRng(master_seed).spawn(1_000_003 + t).seed


@dataclass
class ExperimentResult:
    grid: list
    trials: dict  # config name -> list[TrialResult]
    selected: dict  # config name -> trial index (absent when every trial diverged)
    test: dict  # config name -> test metrics
    failed: list


def _run(job):
    cfg, t, train, validation = job
    return train_one(cfg, train, validation, t)


def select_trial(results):
    """Index of the best finite final validation AUROC; lowest index wins ties."""
    best, best_score = None, -math.inf
    for r in results:
        if r.selection_score > best_score:
            best, best_score = r.trial_index, r.selection_score
    return best


def run_trials(grid, n_trials, train, validation, test=None, seed=0, workers=1, progress=None):
    """Run ``n_trials`` trials of every config and pick each config's best trial.

    Trial ``t`` of every config uses the same seed, so configs with the same
    parameter shapes start from the same weights. If ``test`` is given, the
    selected model of each config is scored on it.
    """
    if not grid:
        raise TrainingError("empty configuration grid")
    names = [c.name for c in grid]
    if len(set(names)) != len(names):
        raise TrainingError("duplicate configurations in grid")
    jobs = [(replace(cfg, trial_seed=trial_seed(seed, t)), t, train, validation)
            for cfg in grid for t in range(n_trials)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_run(job))
            if progress:
                progress(results[-1])

    trials = {n: [] for n in names}
    for r in results:
        trials[r.config.name].append(r)
    selected, tests, failed = {}, {}, []
    for cfg in grid:
        idx = select_trial(trials[cfg.name])
        if idx is None:
            failed.append(cfg.name)
            continue
        selected[cfg.name] = idx
        if test is not None:
            chosen = trials[cfg.name][idx]
            tests[cfg.name] = evaluate_test(chosen.params, test, chosen.config)
    return ExperimentResult(list(grid), trials, selected, tests, failed)


def default_workers():
    try:
        return max(1, int(os.environ.get("NESTSEQ_THREADS", "1")))
    except ValueError:
        return 1
