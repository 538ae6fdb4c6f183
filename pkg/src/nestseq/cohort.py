"""Nested clinical records: patients -> hospitalizations -> sCr measurements.

Also handles file ingestion (CSV / JSONL), forward fill of missing values and
the configurable creatinine-trajectory AKI labeler.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Optional

import numpy as np

log = logging.getLogger(__name__)

CSV_COLUMNS = ("patient_id", "hosp_index", "meas_index", "scr_mg_dl", "timestamp", "aki_this_hosp")
_REQUIRED = CSV_COLUMNS[:4]


class CohortError(ValueError):
    """Invalid clinical data (bad file, impossible values, broken invariants)."""


@dataclass(frozen=True)
class Measurement:
    value: Optional[float]  # None marks MISSING
    timestamp: Optional[float] = None  # epoch seconds

    def __post_init__(self):
        if self.value is not None and not (math.isfinite(self.value) and self.value > 0):
            raise CohortError(f"sCr must be positive and finite, got {self.value}")

    @property
    def missing(self):
        return self.value is None


@dataclass(frozen=True)
class Hospitalization:
    """One inpatient stay.

    ``label`` is AKI in the *next* hospitalization (None = unlabeled) and
    ``aki`` is AKI during this stay, when known.
    """

    measurements: tuple[Measurement, ...]
    label: Optional[bool] = None
    aki: Optional[bool] = None

    def __post_init__(self):
        object.__setattr__(self, "measurements", tuple(self.measurements))
        ts = [m.timestamp for m in self.measurements if m.timestamp is not None]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise CohortError("measurement timestamps must be nondecreasing within a hospitalization")

    @property
    def values(self):
        return [m.value for m in self.measurements]

    @property
    def length(self):
        return len(self.measurements)


@dataclass(frozen=True)
class Patient:
    id: str
    hospitalizations: tuple[Hospitalization, ...]

    def __post_init__(self):
        object.__setattr__(self, "hospitalizations", tuple(self.hospitalizations))
        if not self.hospitalizations:
            raise CohortError(f"patient {self.id!r} has no hospitalizations")


@dataclass(frozen=True)
class Cohort:
    patients: tuple[Patient, ...]
    provenance: str = ""
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "patients", tuple(self.patients))
        ids = [p.id for p in self.patients]
        if len(set(ids)) != len(ids):
            raise CohortError("patient ids must be unique within a cohort")

    def __len__(self):
        return len(self.patients)

    def subset(self, ids, provenance=None):
        keep = set(ids)
        return Cohort(
            tuple(p for p in self.patients if p.id in keep),
            provenance if provenance is not None else self.provenance,
        )


@dataclass(frozen=True)
class AkiCriteria:
    """Creatinine-rise thresholds (windows in hours).

    Defaults follow the common guideline values (0.3 mg/dL in 48 h, or 1.5x
    within 7 days); they are configuration, not part of the model.
    """

    absolute_rise: float = 0.3
    absolute_window: float = 48.0
    relative_rise: float = 1.5
    relative_window: float = 168.0

    def __post_init__(self):
        for name in ("absolute_rise", "absolute_window", "relative_rise", "relative_window"):
            if not getattr(self, name) > 0:
                raise CohortError(f"AkiCriteria.{name} must be strictly positive")


# ----------------------------------------------------------------------------
# transforms


def forward_fill(h, warnings=None):
    """Replace MISSING values with the closest preceding observed value.

    Leading MISSING values have no predecessor; they are dropped (one warning
    each, appended to ``warnings`` if given) rather than back-filled, so no
    later information leaks backwards.
    """
    out = []
    last = None
    for i, m in enumerate(h.measurements):
        if m.value is None:
            if last is None:
                msg = f"dropped leading missing measurement at position {i}"
                log.warning(msg)
                if warnings is not None:
                    warnings.append(msg)
                continue
            out.append(Measurement(last, m.timestamp))
        else:
            last = m.value
            out.append(m)
    if not out:
        raise CohortError("hospitalization has no observed sCr values after forward fill")
    return replace(h, measurements=tuple(out))


def label_aki(h, criteria=AkiCriteria()):
    """True iff some later value rises enough over an earlier one within the window.

    Checks every pair ``i < j``; for the relative rule this is the same as
    comparing each value with the minimum prior value inside the window.
    """
    ms = h.measurements
    if any(m.timestamp is None for m in ms):
        raise CohortError(
            "label_aki needs timestamps on every measurement; supply aki_this_hosp labels at ingestion instead"
        )
    if any(m.value is None for m in ms):
        raise CohortError("label_aki expects a forward-filled hospitalization")
    hours = np.array([m.timestamp for m in ms]) / 3600.0
    vals = np.array([m.value for m in ms])
    for j in range(1, len(ms)):
        dt = hours[j] - hours[:j]
        rise = vals[j] - vals[:j]
        ratio = vals[j] / vals[:j]
        if np.any((rise >= criteria.absolute_rise) & (dt <= criteria.absolute_window)):
            return True
        if np.any((ratio >= criteria.relative_rise) & (dt <= criteria.relative_window)):
            return True
    return False


def attach_next_visit_labels(p, per_hosp_aki):
    """Set each stay's label to the AKI status of the stay that follows it.

    The final stay has no successor and is left unlabeled.
    """
    per_hosp_aki = list(per_hosp_aki)
    if len(per_hosp_aki) != len(p.hospitalizations):
        raise CohortError(
            f"patient {p.id!r}: got {len(per_hosp_aki)} AKI flags for {len(p.hospitalizations)} hospitalizations"
        )
    hs = []
    for a, h in enumerate(p.hospitalizations):
        nxt = bool(per_hosp_aki[a + 1]) if a + 1 < len(per_hosp_aki) else None
        aki = per_hosp_aki[a]
        hs.append(replace(h, label=nxt, aki=None if aki is None else bool(aki)))
    return replace(p, hospitalizations=tuple(hs))


def cohort_stats(c):
    """Summary counts of a cohort.

    Standard deviations are population SDs (ddof=0). Prevalence is over
    labeled hospitalizations only.
    """
    if not c.patients:
        raise CohortError("cohort_stats on an empty cohort")
    hosp_per_patient = np.array([len(p.hospitalizations) for p in c.patients], dtype=float)
    meas_per_hosp = np.array(
        [h.length for p in c.patients for h in p.hospitalizations], dtype=float
    )
    labels = [h.label for p in c.patients for h in p.hospitalizations if h.label is not None]
    return {
        "measurements": int(meas_per_hosp.sum()),
        "patients": len(c.patients),
        "hospitalizations": int(hosp_per_patient.sum()),
        "labeled_hospitalizations": len(labels),
        "positive_labels": int(sum(labels)),
        "prevalence": (sum(labels) / len(labels)) if labels else float("nan"),
        "hosp_per_patient_mean": float(hosp_per_patient.mean()),
        "hosp_per_patient_sd": float(hosp_per_patient.std()),
        "meas_per_hosp_mean": float(meas_per_hosp.mean()),
        "meas_per_hosp_sd": float(meas_per_hosp.std()),
    }


# ----------------------------------------------------------------------------
# ingestion


def _parse_timestamp(text, lineno):
    text = text.strip()
    if not text:
        return None
    try:
        return float(text)
    except ValueError:
        pass
    try:
        return datetime.fromisoformat(text.replace("Z", "+00:00")).timestamp()
    except ValueError:
        raise CohortError(f"line {lineno}: unparseable timestamp {text!r}") from None


def _finish_patient(pid, hosps, fill, warnings, criteria):
    """hosps: list of (measurements, aki flag or None)."""
    hs = []
    for a, (ms, _) in enumerate(hosps):
        h = Hospitalization(tuple(ms))
        if fill:
            local = []
            h = forward_fill(h, local)
            warnings.extend(f"patient {pid} hosp {a}: {w}" for w in local)
        hs.append(h)
    p = Patient(pid, tuple(hs))
    flags = [aki for _, aki in hosps]
    if all(f is not None for f in flags):
        p = attach_next_visit_labels(p, flags)
    elif any(f is not None for f in flags):
        raise CohortError(f"patient {pid!r}: aki_this_hosp must be given for all hospitalizations or none")
    elif criteria is not None:
        p = attach_next_visit_labels(p, [label_aki(h, criteria) for h in p.hospitalizations])
    return p


def _read_csv(path, fill, criteria):
    patients = []
    warnings = []
    seen = set()
    current = None  # (pid, hosps)

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in _REQUIRED if c not in (reader.fieldnames or [])]
        if missing:
            raise CohortError(f"{path}: header is missing required columns {missing}")
        for row in reader:
            lineno = reader.line_num
            try:
                pid = row["patient_id"].strip()
                hi = int(row["hosp_index"])
                mi = int(row["meas_index"])
                scr_text = (row["scr_mg_dl"] or "").strip()
                value = float(scr_text) if scr_text else None
            except (TypeError, ValueError, AttributeError) as exc:
                raise CohortError(f"line {lineno}: malformed row ({exc})") from None
            if not pid:
                raise CohortError(f"line {lineno}: empty patient_id")
            if value is not None and not (math.isfinite(value) and value > 0):
                raise CohortError(f"line {lineno}: sCr must be positive, got {scr_text}")
            ts = _parse_timestamp(row.get("timestamp") or "", lineno)
            aki_text = (row.get("aki_this_hosp") or "").strip()
            if aki_text not in ("", "0", "1"):
                raise CohortError(f"line {lineno}: aki_this_hosp must be 0, 1 or empty")
            aki = None if aki_text == "" else aki_text == "1"

            if current is None or current[0] != pid:
                if pid in seen:
                    raise CohortError(
                        f"line {lineno}: rows for patient {pid!r} are not contiguous; group rows by patient"
                    )
                if current is not None:
                    patients.append(_finish_patient(*current, fill, warnings, criteria))
                seen.add(pid)
                current = (pid, [])
            hosps = current[1]
            if hi == len(hosps) - 1:
                ms, prev_aki = hosps[-1]
                if mi < len(ms):
                    raise CohortError(f"line {lineno}: duplicate key ({pid}, {hi}, {mi})")
                if mi != len(ms):
                    raise CohortError(f"line {lineno}: meas_index {mi} out of order (expected {len(ms)})")
                if aki != prev_aki:
                    raise CohortError(f"line {lineno}: aki_this_hosp differs within hospitalization {hi}")
            elif hi == len(hosps):
                if mi != 0:
                    raise CohortError(f"line {lineno}: hospitalization {hi} must start at meas_index 0")
                hosps.append(([], aki))
            elif hi < len(hosps) - 1:
                raise CohortError(f"line {lineno}: hosp_index {hi} out of order; sort by (hosp_index, meas_index)")
            else:
                raise CohortError(f"line {lineno}: hosp_index {hi} skips ahead (expected {len(hosps)})")
            try:
                hosps[-1][0].append(Measurement(value, ts))
            except CohortError as exc:
                raise CohortError(f"line {lineno}: {exc}") from None

    if current is not None:
        patients.append(_finish_patient(*current, fill, warnings, criteria))
    return Cohort(tuple(patients), f"csv:{Path(path).name}", tuple(warnings))


def patient_from_dict(d):
    hs = []
    for h in d["hospitalizations"]:
        ms = []
        for m in h["measurements"]:
            if isinstance(m, dict):
                ms.append(Measurement(m.get("value"), m.get("timestamp")))
            else:
                ms.append(Measurement(m))
        hs.append(Hospitalization(tuple(ms), h.get("label"), h.get("aki")))
    return Patient(str(d["id"]), tuple(hs))


def patient_to_dict(p):
    return {
        "id": p.id,
        "hospitalizations": [
            {
                "measurements": [{"value": m.value, "timestamp": m.timestamp} for m in h.measurements],
                "label": h.label,
                "aki": h.aki,
            }
            for h in p.hospitalizations
        ],
    }


def _read_jsonl(path, fill, criteria):
    patients = []
    warnings = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                p = patient_from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CohortError(f"line {lineno}: malformed patient record ({exc})") from None
            except CohortError as exc:
                raise CohortError(f"line {lineno}: {exc}") from None
            if fill:
                hs = []
                for a, h in enumerate(p.hospitalizations):
                    local = []
                    hs.append(forward_fill(h, local))
                    warnings.extend(f"patient {p.id} hosp {a}: {w}" for w in local)
                p = replace(p, hospitalizations=tuple(hs))
            if criteria is not None and all(h.label is None for h in p.hospitalizations):
                p = attach_next_visit_labels(p, [label_aki(h, criteria) for h in p.hospitalizations])
            patients.append(p)
    try:
        return Cohort(tuple(patients), f"jsonl:{Path(path).name}", tuple(warnings))
    except CohortError as exc:
        raise CohortError(f"{path}: {exc}") from None


def ingest(path, format=None, fill=True, criteria=None):
    """Load a cohort from CSV or JSONL.

    Parameters
    ----------
    path : str or Path
    format : {"csv", "jsonl"}, optional
        Inferred from the file suffix when omitted.
    fill : bool
        Forward-fill missing values (leading gaps are dropped with a warning).
    criteria : AkiCriteria, optional
        When given, patients without AKI flags are labeled from their
        timestamped creatinine trajectories.
    """
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt == "csv":
        return _read_csv(path, fill, criteria)
    if fmt in ("jsonl", "json"):
        return _read_jsonl(path, fill, criteria)
    raise CohortError(f"unknown cohort format {fmt!r} (expected csv or jsonl)")


def _fmt_float(x):
    return repr(float(x))


def write_csv(c, path):
    """Write ``c`` in the ingestion CSV schema.

    ``aki_this_hosp`` is written when the per-stay AKI flags are known, so that
    re-ingesting reproduces the labels.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for p in c.patients:
            for a, h in enumerate(p.hospitalizations):
                aki = "" if h.aki is None else str(int(h.aki))
                for t, m in enumerate(h.measurements):
                    ts = "" if m.timestamp is None else repr(float(m.timestamp))
                    v = "" if m.value is None else _fmt_float(m.value)
                    w.writerow([p.id, a, t, v, ts, aki])


def write_jsonl(c, path):
    with open(path, "w") as fh:
        for p in c.patients:
            fh.write(json.dumps(patient_to_dict(p)) + "\n")


def fill_cohort(c):
    """Forward-fill every hospitalization; warnings are collected on the result."""
    warnings = list(c.warnings)
    patients = []
    for p in c.patients:
        hs = []
        for a, h in enumerate(p.hospitalizations):
            local = []
            hs.append(forward_fill(h, local))
            warnings.extend(f"patient {p.id} hosp {a}: {w}" for w in local)
        patients.append(replace(p, hospitalizations=tuple(hs)))
    return Cohort(tuple(patients), c.provenance, tuple(warnings))


def validate(c):
    """Raise ``CohortError`` unless every stay is nonempty with positive, filled sCr."""
    for p in c.patients:
        for a, h in enumerate(p.hospitalizations):
            if not h.measurements:
                raise CohortError(f"patient {p.id} hosp {a}: empty hospitalization")
            if any(m.value is None for m in h.measurements):
                raise CohortError(f"patient {p.id} hosp {a}: unfilled missing values")
    return c
