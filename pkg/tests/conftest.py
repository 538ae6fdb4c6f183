import numpy as np
import pytest

from nestseq.cohort import Cohort, Hospitalization, Measurement, Patient


def make_patient(pid, groups, labels=None, times=False):
    """Patient from nested value lists; ``labels`` per stay (None = unlabeled)."""
    labels = labels or [None] * len(groups)
    hs = []
    t = 0.0
    for vals, lab in zip(groups, labels):
        ms = []
        for v in vals:
            ms.append(Measurement(v, t if times else None))
            t += 3600.0
        hs.append(Hospitalization(tuple(ms), lab))
    return Patient(pid, tuple(hs))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_cohort():
    pats = [make_patient(f"p{i}", [[1.0 + 0.1 * i], [1.2, 1.3], [0.9]], [i % 2 == 0, i % 3 == 0, None])
            for i in range(10)]
    return Cohort(tuple(pats), "fixture")
