"""End-to-end acceptance checks.

Run with ``pytest tests/test_acceptance.py -v`` or directly with
``python3 tests/test_acceptance.py``; each check prints one
``ACCEPTANCE PASS|FAIL <name>: <detail>`` line.
"""
import contextlib
import filecmp
import io
import itertools
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from nestseq.cli import main as cli_main
from nestseq.cohort import Cohort
from nestseq.metrics import auprc, auroc, log_loss
from nestseq.models import RnnParams, nest_forward, rnn_forward
from nestseq.models.gradcheck import gradcheck_suite
from nestseq.numerics import SeededRng
from nestseq.structures import build_concat, build_nest
from nestseq.synth import SIGNAL_PRESETS, GeneratorConfig, generate_cohort
from nestseq.training import (
    SplitSpec,
    TrainingError,
    TrialConfig,
    patient_split,
    run_trials,
)

sys.path.insert(0, str(Path(__file__).parent))
from conftest import make_patient  # noqa: E402

# -- independent oracles -----------------------------------------------------


def pairwise_auroc(s, y):
    pos = [a for a, l in zip(s, y) if l]
    neg = [a for a, l in zip(s, y) if not l]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def exact_ap(s, y):
    """Step-interpolated average precision in rational arithmetic."""
    order = sorted(range(len(s)), key=lambda i: (-s[i], i))
    tp, total = 0, Fraction(0)
    for k, i in enumerate(order, 1):
        if y[i]:
            tp += 1
            total += Fraction(tp, k)
    return total / sum(y)


def direct_log_loss(p, y):
    tot = 0.0
    for pi, yi in zip(p, y):
        q = min(max(pi, 1e-15), 1 - 1e-15)
        tot -= math.log(q) if yi else math.log(1 - q)
    return tot / len(p)


def half_even(x):
    """Round a Fraction to the nearest integer, ties to even."""
    fl = x.numerator // x.denominator
    rem = x - fl
    if rem > Fraction(1, 2) or (rem == Fraction(1, 2) and fl % 2):
        return fl + 1
    return fl


# -- checks ------------------------------------------------------------------


def check_gradient_soundness():
    t0 = time.perf_counter()
    res = gradcheck_suite(("MLP", "RNN", "NEST"), n_cases=50, seed=0, tolerance=1e-6,
                          hidden=(1, 3, 10), dims=(1, 3), max_len=6, max_hosp=4)
    elapsed = time.perf_counter() - t0
    worst = max(max(r["worst"].values()) for r in res.values())
    has_r = all(k in res["NEST"]["worst"] for k in ("R", "r"))
    ok = all(not r["failures"] and r["cases"] >= 50 for r in res.values()) and has_r and elapsed < 120
    return ok, f"3 models x 50 cases, worst relative error {worst:.2e}, {elapsed:.1f}s"


def check_nest_concat_tie():
    rng = SeededRng(2718)
    worst = 0.0
    for i in range(100):
        A = 1 + int(rng.integers(1, 5)[0])
        groups = [list(0.5 + rng.uniform(1 + int(rng.integers(1, 6)[0])) * 2) for _ in range(A)]
        labels = [bool(u < 0.5) for u in rng.uniform(A - 1)] + [None]
        pat = make_patient(f"p{i}", groups, labels)
        H = int([1, 3, 10][int(rng.integers(1, 3)[0])])
        base = RnnParams.init(rng, H, 1, 0.7, nested=True)
        p = RnnParams(base.W, base.U, base.V, base.b, base.c, base.U.copy(), base.b.copy())
        logits, _ = nest_forward(build_nest(pat), p)
        for s in build_concat(pat):
            worst = max(worst, abs(logits[s.hosp_index] - rnn_forward(s, p)[0]))
    return worst <= 1e-12, f"100 patients, max |NEST - CONCAT| logit gap {worst:.1e}"


def check_metric_oracles():
    rng = np.random.default_rng(31415)
    worst_roc = 0.0
    done = 0
    while done < 1000:
        n = int(rng.integers(2, 51))
        s = rng.integers(0, max(2, n // 3), n) / 7.0  # coarse grid forces ties
        y = rng.random(n) < rng.uniform(0.1, 0.9)
        if y.all() or not y.any():
            continue
        worst_roc = max(worst_roc, abs(auroc(s, y) - pairwise_auroc(s.tolist(), y.tolist())))
        done += 1
    worst_ap, n_ap = 0.0, 0
    for n in range(1, 13):
        s = (rng.integers(0, 4, n) / 3.0).tolist()
        for y in itertools.product([0, 1], repeat=n):
            if sum(y):
                worst_ap = max(worst_ap, abs(auprc(s, y) - float(exact_ap(s, y))))
                n_ap += 1
    worst_ll = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 50))
        p = rng.random(n)
        p[rng.random(n) < 0.05] = 0.0
        p[rng.random(n) < 0.05] = 1.0
        y = rng.random(n) < 0.5
        worst_ll = max(worst_ll, abs(log_loss(p, y) - direct_log_loss(p.tolist(), y.tolist())))
    ok = worst_roc <= 1e-12 and worst_ap <= 1e-15 and worst_ll <= 1e-12
    return ok, (f"AUROC 1000 tied instances max err {worst_roc:.1e}; AUPRC {n_ap} exhaustive "
                f"instances (n<=12) max err {worst_ap:.1e}; log loss max err {worst_ll:.1e}")


def _learn(signal):
    c = generate_cohort(GeneratorConfig(n_patients=2000, signal_strength=signal, seed=1), fill=True)
    tr, va, te = patient_split(c, SplitSpec(0.2, 0.2, seed=1))
    cfg = TrialConfig("MLP", "MARKOV", "SUM", 10, epochs=20)
    res = run_trials([cfg], 10, tr, va, te, seed=1)
    return res.test[cfg.name]


def check_learnability():
    t0 = time.perf_counter()
    strong = _learn(SIGNAL_PRESETS["strong"])
    null = _learn(0.0)
    elapsed = time.perf_counter() - t0
    ok = (strong["auroc"] >= 0.80 and strong["auprc"] >= 2 * strong["prevalence"]
          and 0.45 <= null["auroc"] <= 0.55 and elapsed < 300)
    return ok, (f"strong: AUROC {strong['auroc']:.4f}, AUPRC {strong['auprc']:.4f} "
                f"(prevalence {strong['prevalence']:.4f}); null: AUROC {null['auroc']:.4f}; {elapsed:.1f}s")


def _run_experiment(cfg_path, out):
    with contextlib.redirect_stdout(io.StringIO()):
        code = cli_main(["experiment", "--config", str(cfg_path), "--out", str(out)])
    assert code == 0, f"experiment exited with {code}"


def check_protocol_fidelity(workdir):
    workdir = Path(workdir)
    cfg = {"seed": 1, "n_trials": 5, "grid": "full", "hidden_units": [10, 50, 100],
           "generator": {"n_patients": 200, "seed": 1}, "split": {"seed": 1}}
    path = workdir / "full_grid.json"
    path.write_text(json.dumps(cfg))
    t0 = time.perf_counter()
    _run_experiment(path, workdir / "run1")
    _run_experiment(path, workdir / "run2")
    elapsed = time.perf_counter() - t0
    a, b = workdir / "run1", workdir / "run2"
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    same = [p for p in files if (b / p).exists() and filecmp.cmp(a / p, b / p, shallow=False)]
    n_b = sum(1 for p in b.rglob("*") if p.is_file())
    rows = (a / "table.csv").read_text().splitlines()
    dist = (a / "validation_distributions.csv").read_text().splitlines()
    summary = json.loads((a / "summary.json").read_text())
    counts = {e["validation_distribution"]["auroc"]["n"] for e in summary["configs"]}
    ok = (rows[0] == "HU,Model,Input Struct,LL,AUPRC,AUROC" and len(rows) == 28
          and len(dist) == 1 + 27 * 3 and counts <= {5} | set(range(1, 5))
          and len(same) == len(files) == n_b)
    return ok, (f"{len(rows) - 1} table rows, {len(dist) - 1} distribution rows, "
                f"{len(same)}/{len(files)} files byte-identical on rerun, {elapsed:.1f}s for two runs")


def check_split_safety():
    bad = 0
    for seed in range(1000):
        n = 3 + seed % 97
        pats = tuple(make_patient(f"q{seed}_{i}", [[1.0], [1.1]], [True, None]) for i in range(n))
        c = Cohort(pats, "split-check")
        try:
            parts = patient_split(c, SplitSpec(0.2, 0.2, seed=seed))
        except TrainingError:
            n_test = half_even(Fraction(n, 5))
            n_val = half_even(Fraction(n - n_test, 5))
            bad += min(n - n_test - n_val, n_val, n_test) >= 1
            continue
        ids = [{p.id for p in part.patients} for part in parts]
        n_test = half_even(Fraction(n, 5))
        n_val = half_even(Fraction(n - n_test, 5))
        disjoint = not (ids[0] & ids[1] or ids[0] & ids[2] or ids[1] & ids[2])
        cover = set().union(*ids) == {p.id for p in pats}
        sizes = [len(s) for s in ids] == [n - n_test - n_val, n_val, n_test]
        bad += not (disjoint and cover and sizes)
    return bad == 0, f"1000 seeds (cohort sizes 3..99), {bad} violations"


# -- reporting ---------------------------------------------------------------


def _report(name, outcome, capsys=None):
    ok, detail = outcome
    line = f"ACCEPTANCE {'PASS' if ok else 'FAIL'} {name}: {detail}"
    if capsys is not None:
        with capsys.disabled():
            print("\n" + line)
    else:
        print(line)
    return ok


def test_gradient_soundness(capsys):
    assert _report("gradient-soundness", check_gradient_soundness(), capsys)


def test_nest_concat_tie_equivalence(capsys):
    assert _report("nest-concat-tie", check_nest_concat_tie(), capsys)


def test_metric_oracles(capsys):
    assert _report("metric-oracles", check_metric_oracles(), capsys)


@pytest.mark.slow
def test_synthetic_learnability(capsys):
    assert _report("synthetic-learnability", check_learnability(), capsys)


@pytest.mark.slow
def test_protocol_fidelity(tmp_path, capsys):
    assert _report("protocol-fidelity", check_protocol_fidelity(tmp_path), capsys)


def test_split_safety(capsys):
    assert _report("split-safety", check_split_safety(), capsys)


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        results = [
            _report("gradient-soundness", check_gradient_soundness()),
            _report("nest-concat-tie", check_nest_concat_tie()),
            _report("metric-oracles", check_metric_oracles()),
            _report("synthetic-learnability", check_learnability()),
            _report("protocol-fidelity", check_protocol_fidelity(tmp)),
            _report("split-safety", check_split_safety()),
        ]
    sys.exit(0 if all(results) else 1)
