"""Seeded synthetic cohort shaped like a rehospitalization creatinine dataset.

Generative story, per patient:

1. Number of stays: ``1 + NegBin`` with mean/sd matched to ``hosp_mean``/``hosp_sd``.
2. Per stay, number of measurements: ``1 + NegBin`` matched to ``meas_mean``/``meas_sd``.
3. Values: patient baseline (lognormal) x stay factor (lognormal) x per-draw
   multiplicative noise, plus, with probability ``episode_rate``, a linear
   elevation episode that ramps up from a random measurement onwards.
4. ``missing_rate`` of the non-first values are blanked (MISSING).
5. Label of stay ``a`` (AKI at the next stay) ~ Bernoulli(sigmoid(alpha + s z_a))
   where ``z_a`` is the standardized sum of stay ``a``'s forward-filled values
   and ``alpha`` is calibrated to hit ``target_prevalence``.

The sum is the causal feature on purpose: at strong signal a MARKOV-SUM model
is the best achievable one by construction.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .cohort import (
    Cohort,
    CohortError,
    Hospitalization,
    Measurement,
    Patient,
    cohort_stats,
    fill_cohort,
)
from .metrics import auroc
from .numerics import SeededRng, logit, sigmoid

SIGNAL_PRESETS = {"none": 0.0, "weak": 0.75, "strong": 3.0}

_T0 = 1_500_000_000.0  # epoch seconds of the first admission
_MAX_COUNT = 1000


@dataclass(frozen=True)
class GeneratorConfig:
    n_patients: int = 2000
    hosp_mean: float = 2.1
    hosp_sd: float = 2.4
    meas_mean: float = 5.1
    meas_sd: float = 9.9
    baseline_scr_median: float = 1.0
    baseline_scr_log_sd: float = 0.3
    stay_log_sd: float = 0.15
    noise_log_sd: float = 0.08
    episode_rate: float = 0.2
    episode_rise_min: float = 0.3
    episode_rise_max: float = 2.0
    signal_strength: float = SIGNAL_PRESETS["strong"]
    target_prevalence: float = 0.157
    missing_rate: float = 0.02
    calibration_tolerance: float = 0.002
    seed: int = 1

    def __post_init__(self):
        if self.n_patients < 1:
            raise ValueError("n_patients must be >= 1")
        for name in ("episode_rate", "missing_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 < self.target_prevalence < 1.0:
            raise ValueError("target_prevalence must lie in (0, 1)")
        if self.signal_strength < 0:
            raise ValueError("signal_strength must be >= 0")
        if self.hosp_mean <= 1.0 or self.meas_mean <= 1.0:
            raise ValueError("count means must exceed 1 (support starts at 1)")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if isinstance(d.get("signal_strength"), str):
            d["signal_strength"] = SIGNAL_PRESETS[d["signal_strength"]]
        return cls(**d)


def shifted_negbin_params(mean, sd):
    """(n, p) of scipy's nbinom so that ``1 + X`` has the requested mean and sd.

    Needs ``sd**2 > mean - 1`` (overdispersion); otherwise use a Poisson.
    """
    mu = mean - 1.0
    var = sd * sd
    if var <= mu:
        raise ValueError(f"sd={sd} too small for a negative binomial with mean {mean}")
    n = mu * mu / (var - mu)
    return n, n / (n + mu)


def _counts(rng, size, mean, sd):
    n, p = shifted_negbin_params(mean, sd)
    u = rng.uniform(size) + 2.0 ** -54  # strictly inside (0, 1)
    k = stats.nbinom.ppf(u, n, p)
    return 1 + np.minimum(k, _MAX_COUNT - 1).astype(np.int64)


@dataclass
class _Draft:
    """Trajectories before labeling (values already carry MISSING as nan)."""

    ids: list
    raw: list  # per patient: list of value arrays (nan = missing)
    times: list  # per patient: list of timestamp arrays
    sums: np.ndarray  # filled sum per labeled stay, patient-major order
    owners: list  # (patient index, stay index) per labeled stay
    label_u: np.ndarray  # uniforms deciding labels (common random numbers)
    first_aki_u: np.ndarray  # per patient, AKI flag of the first stay

    @property
    def z(self):
        if self.sums.size < 2:
            return np.zeros_like(self.sums)
        sd = self.sums.std()
        return (self.sums - self.sums.mean()) / (sd if sd > 0 else 1.0)


def _draft(cfg):
    root = SeededRng(cfg.seed)
    r_counts, r_values, r_missing, r_times, r_labels = (root.spawn(i) for i in range(5))

    n_hosp = _counts(r_counts, cfg.n_patients, cfg.hosp_mean, cfg.hosp_sd)
    n_meas = _counts(r_counts, int(n_hosp.sum()), cfg.meas_mean, cfg.meas_sd)
    total = int(n_meas.sum())

    baseline = cfg.baseline_scr_median * np.exp(r_values.normal(cfg.n_patients, 0.0, cfg.baseline_scr_log_sd))
    stay_factor = np.exp(r_values.normal(n_hosp.sum(), 0.0, cfg.stay_log_sd))
    noise = np.exp(r_values.normal(total, 0.0, cfg.noise_log_sd))
    has_episode = r_values.uniform(n_hosp.sum()) < cfg.episode_rate
    ep_start_u = r_values.uniform(n_hosp.sum())
    ep_rise = r_values.uniform(n_hosp.sum()) * (cfg.episode_rise_max - cfg.episode_rise_min) + cfg.episode_rise_min
    missing = r_missing.uniform(total) < cfg.missing_rate
    gap_days = 30.0 + r_times.uniform(n_hosp.sum()) * 365.0
    step_hours = 6.0 + r_times.uniform(total) * 18.0

    raw, times, sums, owners = [], [], [], []
    k = 0  # stay cursor
    j = 0  # measurement cursor
    for i in range(cfg.n_patients):
        p_raw, p_times = [], []
        clock = _T0 + i * 3600.0
        for a in range(n_hosp[i]):
            tau = int(n_meas[k])
            vals = baseline[i] * stay_factor[k] * noise[j:j + tau]
            if has_episode[k]:
                start = int(ep_start_u[k] * tau)
                ramp = np.clip(np.arange(tau) - start + 1, 0, None) / max(tau - start, 1)
                vals = vals + ep_rise[k] * ramp
            clock += gap_days[k] * 86400.0
            ts = clock + np.cumsum(step_hours[j:j + tau]) * 3600.0
            clock = ts[-1]
            miss = missing[j:j + tau].copy()
            miss[0] = False
            shown = np.where(miss, np.nan, vals)
            # forward fill for the causal sum
            idx = np.where(miss, 0, np.arange(tau))
            np.maximum.accumulate(idx, out=idx)
            filled = vals[idx]
            if a < n_hosp[i] - 1:
                sums.append(filled.sum())
                owners.append((i, a))
            p_raw.append(shown)
            p_times.append(ts)
            k += 1
            j += tau
        raw.append(p_raw)
        times.append(p_times)

    return _Draft(
        ids=[f"P{i:06d}" for i in range(cfg.n_patients)],
        raw=raw,
        times=times,
        sums=np.asarray(sums, dtype=np.float64),
        owners=owners,
        label_u=r_labels.uniform(len(sums)),
        first_aki_u=r_labels.uniform(cfg.n_patients),
    )


def _prevalence(alpha, draft, s):
    return float(np.mean(draft.label_u < sigmoid(alpha + s * draft.z)))


def _calibrate(draft, cfg, tolerance):
    target = cfg.target_prevalence
    if cfg.signal_strength == 0.0:
        return logit(target)
    if draft.sums.size == 0:
        raise CohortError("no labeled stays to calibrate on")
    # prevalence moves in steps of 1/n, so no tolerance below half a step is attainable
    tolerance = max(tolerance, 0.5 / draft.sums.size + 1e-12)
    lo, hi = -40.0, 40.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        prev = _prevalence(mid, draft, cfg.signal_strength)
        if abs(prev - target) <= tolerance:
            return mid
        if prev < target:
            lo = mid
        else:
            hi = mid
    raise CohortError(
        f"prevalence calibration did not converge: achieved {prev:.4f} vs target {target:.4f} (tolerance {tolerance})"
    )


def calibrate_prevalence(cfg, tolerance=None):
    """Intercept ``alpha`` giving the target prevalence on this config's own draws.

    Bisection on the empirical prevalence with the label uniforms held fixed
    (common random numbers), so the result is exact for the cohort the same
    config generates. Small cohorts widen the tolerance to half the 1/n
    prevalence grid. With zero signal the answer is ``logit(target)``.
    """
    tolerance = cfg.calibration_tolerance if tolerance is None else tolerance
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    return _calibrate(_draft(cfg), cfg, tolerance)


def generate_cohort(cfg, fill=False, return_info=False):
    """Generate a labeled cohort.

    The returned cohort keeps MISSING values (``fill=False``) so it can be
    written out verbatim; pass ``fill=True`` for a model-ready cohort. With
    ``return_info`` also returns a dict with the calibrated intercept and the
    config, suitable for a provenance manifest.
    """
    draft = _draft(cfg)
    alpha = _calibrate(draft, cfg, cfg.calibration_tolerance)
    labels = draft.label_u < sigmoid(alpha + cfg.signal_strength * draft.z)
    lab = {owner: bool(l) for owner, l in zip(draft.owners, labels)}
    first_aki = draft.first_aki_u < cfg.target_prevalence

    patients = []
    for i, pid in enumerate(draft.ids):
        hs = []
        n = len(draft.raw[i])
        for a in range(n):
            vals, ts = draft.raw[i][a], draft.times[i][a]
            ms = tuple(
                Measurement(None if np.isnan(v) else float(v), float(t)) for v, t in zip(vals, ts)
            )
            label = lab.get((i, a))
            aki = bool(first_aki[i]) if a == 0 else lab[(i, a - 1)]
            hs.append(Hospitalization(ms, label, aki))
        patients.append(Patient(pid, tuple(hs)))
    cohort = Cohort(tuple(patients), f"synth:seed={cfg.seed}")
    if fill:
        cohort = fill_cohort(cohort)
    if return_info:
        return cohort, {"config": asdict(cfg), "intercept": alpha, "generator": "nestseq.synth"}
    return cohort


def sum_feature_auroc(cohort):
    """AUROC of the raw per-stay sCr sum against the labels (a model-free yardstick)."""
    filled = fill_cohort(cohort) if any(
        m.value is None for p in cohort.patients for h in p.hospitalizations for m in h.measurements
    ) else cohort
    xs, ys = [], []
    for p in filled.patients:
        for h in p.hospitalizations:
            if h.label is not None:
                xs.append(sum(h.values))
                ys.append(h.label)
    return auroc(xs, ys)


def manifest_json(info, cohort):
    doc = dict(info, stats=cohort_stats(fill_cohort(cohort)))
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"
