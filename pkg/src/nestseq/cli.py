"""``nestseq`` command line: generate, stats, train, experiment, report, gradcheck.

Exit codes: 0 success, 1 check failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .cohort import (
    CohortError,
    cohort_stats,
    fill_cohort,
    ingest,
    write_csv,
    write_jsonl,
)
from .experiment import (
    ConfigError,
    load_config,
    load_summary,
    run_experiment,
    write_reports,
)
from .models import save_params
from .models.gradcheck import gradcheck_suite
from .report import (
    render_distributions_csv,
    render_distributions_md,
    render_table_csv,
    render_table_md,
)
from .synth import SIGNAL_PRESETS, GeneratorConfig, generate_cohort, manifest_json
from .training import (
    SplitSpec,
    TrainingError,
    TrialConfig,
    default_workers,
    evaluate_test,
    patient_split,
    train_one,
)

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("nestseq")


def _signal(text):
    if text in SIGNAL_PRESETS:
        return SIGNAL_PRESETS[text]
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"signal must be a number or one of {sorted(SIGNAL_PRESETS)}") from None


def _workers(args):
    return args.threads if args.threads else default_workers()


def cmd_generate(args):
    cfg = GeneratorConfig(n_patients=args.patients, seed=args.seed, signal_strength=args.signal,
                          missing_rate=args.missing_rate)
    cohort, info = generate_cohort(cfg, return_info=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fmt = args.format or "csv"
    if fmt == "jsonl":
        write_jsonl(cohort, out / "cohort.jsonl")
    else:
        write_csv(cohort, out / "cohort.csv")
    info["tool_version"] = __version__
    (out / "manifest.json").write_text(manifest_json(info, cohort))
    print(f"wrote {len(cohort)} patients to {out}")
    return EXIT_OK


def cmd_stats(args):
    c = ingest(args.path)
    st = cohort_stats(fill_cohort(c))
    if args.format == "md":
        print("| statistic | value |\n|---|---|")
        for k, v in st.items():
            print(f"| {k} | {v} |")
    else:
        print(json.dumps(st, indent=1))
    if c.warnings:
        print(f"{len(c.warnings)} ingestion warnings (dropped leading missing values)", file=sys.stderr)
    return EXIT_OK


def cmd_train(args):
    cohort = fill_cohort(ingest(args.data))
    cfg = TrialConfig(args.model, args.structure, None if args.model.upper() == "RNN" else args.aggregation,
                      args.hidden_units, args.epochs, args.lr, 1e-8, args.init_sd, args.seed)
    train, val, test = patient_split(cohort, SplitSpec(seed=args.split_seed))
    res = train_one(cfg, train, val)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trial.json").write_text(json.dumps(res.to_dict(), indent=1, sort_keys=True) + "\n")
    save_params(res.params, out / "params.json")
    test_metrics = evaluate_test(res.params, test, cfg)
    manifest = {"tool": "nestseq", "version": __version__, "config": asdict(cfg), "data": str(args.data),
                "split_seed": args.split_seed, "test": test_metrics}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    print(json.dumps({"final_validation": res.final_validation, "test": test_metrics,
                      "diverged": res.diverged}, indent=1))
    return EXIT_OK


def cmd_experiment(args):
    cfg = load_config(args.config)
    if args.trials is not None:
        cfg["n_trials"] = args.trials
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = args.out or cfg.get("out") or "results"

    def progress(r):
        log.info("%s trial %d: val AUROC %.4f%s", r.config.name, r.trial_index,
                 r.final_validation.get("auroc", float("nan")), " (diverged)" if r.diverged else "")

    result, summary = run_experiment(cfg, out, workers=_workers(args), progress=progress)
    if args.svg:
        write_reports(out, summary, result, svg=True)
    print(render_table_md(summary))
    if result.failed:
        print("failed configurations: " + ", ".join(result.failed), file=sys.stderr)
    return EXIT_OK


def cmd_report(args):
    summary = load_summary(args.dir)
    write_reports(args.dir, summary)
    if args.format == "csv":
        print(render_table_csv(summary), end="")
        print(render_distributions_csv(summary), end="")
    else:
        print(render_table_md(summary))
        print(render_distributions_md(summary))
    return EXIT_OK


def cmd_gradcheck(args):
    models = ("MLP", "RNN", "NEST") if args.model == "all" else (args.model.upper(),)
    if args.cases == 0:
        print("warning: --cases 0, nothing checked (vacuous pass)", file=sys.stderr)
        return EXIT_OK
    res = gradcheck_suite(models, args.cases, args.seed, args.tolerance, corrupt=args.inject_fault,
                          hidden=tuple(args.hidden), dims=tuple(args.dims), max_len=args.max_len,
                          max_hosp=args.max_hosp)
    ok = True
    for model, r in res.items():
        worst = ", ".join(f"{k}={v:.2e}" for k, v in r["worst"].items())
        status = "PASS" if not r["failures"] else "FAIL"
        print(f"{model:4s} {status} cases={r['cases']} worst relative error: {worst}")
        if r["failures"]:
            ok = False
            print(f"     failing case seeds: {r['failures'][:10]}")
    return EXIT_OK if ok else EXIT_CHECK


def _int_list(text):
    return [int(x) for x in text.split(",") if x]


def build_parser():
    p = argparse.ArgumentParser(prog="nestseq", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"nestseq {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic cohort")
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--patients", type=int, default=2000)
    g.add_argument("--signal", type=_signal, default=SIGNAL_PRESETS["strong"],
                   help="signal strength: number or none/weak/strong")
    g.add_argument("--missing-rate", type=float, default=0.02)
    g.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("stats", help="cohort summary statistics")
    s.add_argument("path")
    s.add_argument("--format", choices=["json", "md"], default="json")
    s.set_defaults(func=cmd_stats)

    t = sub.add_parser("train", help="train one model on a cohort file")
    t.add_argument("--data", required=True)
    t.add_argument("--model", choices=["MLP", "RNN", "mlp", "rnn"], default="MLP")
    t.add_argument("--structure", default="MARKOV")
    t.add_argument("--aggregation", default="SUM")
    t.add_argument("--hidden-units", type=int, default=10)
    t.add_argument("--epochs", type=int, default=20)
    t.add_argument("--lr", type=float, default=0.01)
    t.add_argument("--init-sd", type=float, default=0.01)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--split-seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("experiment", help="run a trial grid from a JSON config")
    e.add_argument("--config", required=True)
    e.add_argument("--out")
    e.add_argument("--trials", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--threads", type=int, default=0, help="worker processes (default: $NESTSEQ_THREADS or 1)")
    e.add_argument("--svg", action="store_true", help="also write SVG histograms")
    e.set_defaults(func=cmd_experiment)

    r = sub.add_parser("report", help="re-render tables from an experiment directory")
    r.add_argument("dir")
    r.add_argument("--format", choices=["md", "csv"], default="md")
    r.set_defaults(func=cmd_report)

    c = sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients")
    c.add_argument("--model", choices=["all", "MLP", "RNN", "NEST", "mlp", "rnn", "nest"], default="all")
    c.add_argument("--cases", type=int, default=50)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--tolerance", type=float, default=1e-6)
    c.add_argument("--hidden", type=_int_list, default=[1, 3, 10])
    c.add_argument("--dims", type=_int_list, default=[1, 3])
    c.add_argument("--max-len", type=int, default=6)
    c.add_argument("--max-hosp", type=int, default=4)
    c.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    c.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, CohortError, TrainingError, ValueError, OSError) as exc:
        print(f"nestseq {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
