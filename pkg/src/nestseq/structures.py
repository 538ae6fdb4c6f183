"""Input structures: MARKOV, CONCAT and NEST samples, plus SUM/MEAN/MAX aggregation."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class Structure(str, Enum):
    MARKOV = "MARKOV"
    CONCAT = "CONCAT"
    NEST = "NEST"


class Aggregation(str, Enum):
    SUM = "SUM"
    MEAN = "MEAN"
    MAX = "MAX"


@dataclass(frozen=True)
class SequenceSample:
    features: tuple[float, ...]
    label: bool
    patient_id: str
    hosp_index: int

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        if not self.features:
            raise ValueError("SequenceSample needs at least one feature")


@dataclass(frozen=True)
class NestedSample:
    """All of one patient's stays as a nested sequence.

    ``feature_groups[a]`` holds the values of stay ``a``; ``labels[k]`` is the
    label of stay ``label_index[k]``.
    """

    feature_groups: tuple[tuple[float, ...], ...]
    labels: tuple[bool, ...]
    label_index: tuple[int, ...]
    patient_id: str

    def __post_init__(self):
        object.__setattr__(self, "feature_groups", tuple(tuple(g) for g in self.feature_groups))
        object.__setattr__(self, "labels", tuple(bool(x) for x in self.labels))
        object.__setattr__(self, "label_index", tuple(int(i) for i in self.label_index))
        if not self.feature_groups or any(len(g) == 0 for g in self.feature_groups):
            raise ValueError("NestedSample groups must be nonempty")
        if len(self.labels) != len(self.label_index):
            raise ValueError("labels and label_index must align")
        if any(not 0 <= i < len(self.feature_groups) for i in self.label_index):
            raise ValueError("label_index out of range")

    @property
    def n_features(self):
        return sum(len(g) for g in self.feature_groups)

    def per_hosp_labels(self):
        """Labels spread over all stays, ``None`` where unlabeled."""
        out = [None] * len(self.feature_groups)
        for i, l in zip(self.label_index, self.labels):
            out[i] = l
        return out


@dataclass(frozen=True)
class AggregatedSample:
    feature: float
    label: bool
    patient_id: str
    hosp_index: int


def _check_filled(p):
    for a, h in enumerate(p.hospitalizations):
        if not h.measurements:
            raise ValueError(f"patient {p.id} hosp {a} has no measurements")
        if any(m.value is None for m in h.measurements):
            raise ValueError(f"patient {p.id} hosp {a} has unfilled missing values; forward_fill first")


def build_markov(p):
    _check_filled(p)
    return [
        SequenceSample(tuple(h.values), h.label, p.id, a)
        for a, h in enumerate(p.hospitalizations)
        if h.label is not None
    ]


def build_concat(p):
    _check_filled(p)
    out = []
    history = []
    for a, h in enumerate(p.hospitalizations):
        history.extend(h.values)
        if h.label is not None:
            out.append(SequenceSample(tuple(history), h.label, p.id, a))
    return out


def build_nest(p):
    _check_filled(p)
    groups = tuple(tuple(h.values) for h in p.hospitalizations)
    idx = tuple(a for a, h in enumerate(p.hospitalizations) if h.label is not None)
    labels = tuple(p.hospitalizations[a].label for a in idx)
    return NestedSample(groups, labels, idx, p.id)


def aggregate(s, f):
    f = Aggregation(f)
    x = np.asarray(s.features, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot aggregate an empty feature list")
    if f is Aggregation.SUM:
        v = float(np.sum(x))
    elif f is Aggregation.MEAN:
        v = float(np.mean(x))
    else:
        v = float(np.max(x))
    return AggregatedSample(v, s.label, s.patient_id, s.hosp_index)


def build_samples(cohort, structure, aggregation=None):
    """Samples for a whole cohort in patient order.

    Returns ``NestedSample`` per patient (NEST), ``SequenceSample`` per labeled
    stay (MARKOV/CONCAT) or, with ``aggregation``, ``AggregatedSample``.
    Patients without labels contribute nothing.
    """
    structure = Structure(structure)
    if structure is Structure.NEST:
        if aggregation is not None:
            raise ValueError("NEST cannot be aggregated")
        return [ns for ns in (build_nest(p) for p in cohort.patients) if ns.labels]
    builder = build_markov if structure is Structure.MARKOV else build_concat
    seqs = [s for p in cohort.patients for s in builder(p)]
    if aggregation is None:
        return seqs
    return [aggregate(s, aggregation) for s in seqs]
