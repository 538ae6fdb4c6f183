"""
Multi-trial protocol and reports
================================

Run every model/structure combination at one width for a few trials, pick
each configuration's best trial by validation AUROC, and render the results
table and the validation distributions.
"""

import tempfile

from nestseq.experiment import resolve_config, run_experiment
from nestseq.report import render_distributions_md, render_table_md

cfg = resolve_config({
    "seed": 1,
    "n_trials": 3,
    "grid": "full",
    "hidden_units": [10],
    "training": {"epochs": 5},
    "generator": {"n_patients": 300, "seed": 1},
    "split": {"seed": 1},
})

with tempfile.TemporaryDirectory() as out:
    result, summary = run_experiment(cfg, out)
    print(render_table_md(summary))
    print(render_distributions_md(summary))
    print("selected trials:", result.selected)
