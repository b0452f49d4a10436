"""Command-line front end.

Subcommands: simulate, train, evaluate, attack, report. Exit codes:
0 success, 2 validation error, 3 I/O error, 4 acceptance-gate failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import load_scenario
from .errors import EcuPrintError
from .evaluation import write_matrix_csv, write_report
from .features import read_dataset
from .forest import load_model, save_model
from .pipeline import (
    run_attack_campaign,
    run_kfold_experiment,
    run_split_experiment,
    simulate_to_file,
    train_model,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_GATE = 4


def _progress(done, total):
    print(f"  {done}/{total} messages", file=sys.stderr)


def _cmd_simulate(args) -> int:
    scenario = load_scenario(args.config)
    dataset = simulate_to_file(scenario, args.out, seed=args.seed,
                               progress=_progress if args.verbose else None)
    print(f"wrote {len(dataset)} rows to {args.out}")
    if args.trace_dir:
        from .acquisition import capture_seed, synthesize_capture, write_trace
        from .frames import CanFrame, encode_frame

        trace_dir = Path(args.trace_dir)
        trace_dir.mkdir(parents=True, exist_ok=True)
        seed = args.seed if args.seed is not None else scenario.experiment.seed
        for profile in scenario.profiles:
            mid = sorted(profile.owned_mids)[0]
            bits = encode_frame(CanFrame(mid, scenario.experiment.dlc,
                                         bytes(scenario.experiment.dlc)))
            capture = synthesize_capture(
                scenario.topology, profile, scenario.taps[profile.ecu_id],
                bits, mid, scenario.acquisition, capture_seed(seed, profile.ecu_id))
            write_trace(capture, trace_dir / f"trace_ecu{profile.ecu_id}.csv")
        print(f"wrote {len(scenario.profiles)} traces to {trace_dir}")
    return EXIT_OK


def _cmd_train(args) -> int:
    scenario = load_scenario(args.config)
    dataset = read_dataset(args.dataset)
    seed = args.seed if args.seed is not None else scenario.experiment.seed
    model = train_model(dataset, seed=seed, train_fraction=args.train_frac)
    save_model(model, args.out)
    print(f"trained {len(model.trees)} trees on {len(dataset)} rows "
          f"(seed {seed}) -> {args.out}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    scenario = load_scenario(args.config)
    dataset = read_dataset(args.dataset)
    seed = args.seed if args.seed is not None else scenario.experiment.seed
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.mode == "split":
        fraction = args.train_frac or scenario.experiment.train_fraction
        model, report, _ = run_split_experiment(dataset, fraction, seed)
        save_model(model, out_dir / "model.json")
        write_report(report, out_dir / "report.json",
                     config_hash=scenario.config_hash, timestamp=args.timestamps)
        write_matrix_csv(report.matrix, out_dir / "confusion_matrix.csv")
        print(f"split evaluation: macro F1 = {report.macro_f1:.6f}")
        macro = report.macro_f1
    else:
        k = args.kfold or scenario.experiment.kfold
        result = run_kfold_experiment(dataset, k, seed)
        for i, fold in enumerate(result.fold_reports, start=1):
            write_report(fold, out_dir / f"fold_{i:02d}_report.json",
                         config_hash=scenario.config_hash, timestamp=args.timestamps)
        write_report(result.pooled, out_dir / "report.json",
                     config_hash=scenario.config_hash, timestamp=args.timestamps)
        write_matrix_csv(result.pooled.matrix, out_dir / "confusion_matrix.csv")
        print(f"{k}-fold evaluation: pooled macro F1 = {result.pooled.macro_f1:.6f}")
        macro = result.pooled.macro_f1

    if args.gate_f1 is not None and macro < args.gate_f1:
        print(f"gate failure: macro F1 {macro:.6f} < {args.gate_f1}", file=sys.stderr)
        return EXIT_GATE
    return EXIT_OK


def _cmd_attack(args) -> int:
    scenario = load_scenario(args.config)
    model = load_model(args.model)
    seed = args.seed if args.seed is not None else scenario.experiment.seed
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    report, alert_rate, _ = run_attack_campaign(scenario, model, seed=seed)
    attacker = scenario.attack.attacker_ecu_id
    recall = report.recall[attacker]
    write_report(report, out_dir / "attack_report.json",
                 config_hash=scenario.config_hash,
                 extra={"alert_rate": alert_rate,
                        "attacker_ecu_id": attacker,
                        "attacker_recall": recall,
                        "mode": scenario.attack.mode},
                 timestamp=args.timestamps)
    write_matrix_csv(report.matrix, out_dir / "attack_matrix.csv")
    print(f"attack campaign ({scenario.attack.mode}): attacker recall "
          f"{recall:.6f}, alert rate {alert_rate:.6f}")
    if args.gate_recall is not None and recall < args.gate_recall:
        print(f"gate failure: attacker recall {recall:.6f} < {args.gate_recall}",
              file=sys.stderr)
        return EXIT_GATE
    return EXIT_OK


def _cmd_report(args) -> int:
    from . import plotting
    from .evaluation import ConfusionMatrix

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    made = []
    if args.dataset:
        dataset = read_dataset(args.dataset)
        plotting.plot_ratio_separation(dataset, out_dir / "ratio_separation.png")
        made.append("ratio_separation.png")
    if args.eval_report:
        with open(args.eval_report, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        matrix = ConfusionMatrix(doc["classes"], doc["confusion"])
        title = doc.get("split") or "Confusion matrix"
        plotting.plot_confusion_matrix(matrix, out_dir / "confusion_matrix.png",
                                       title=title)
        made.append("confusion_matrix.png")
        f1 = {int(c): v["f1"] for c, v in doc["per_class"].items()}
        plotting.plot_class_f1(f1, out_dir / "class_f1.png")
        made.append("class_f1.png")
    if args.trace:
        plotting.plot_trace(args.trace, out_dir / "trace.png")
        made.append("trace.png")
    if not made:
        print("nothing to render: pass --dataset, --eval-report and/or --trace",
              file=sys.stderr)
        return EXIT_VALIDATION
    print(f"wrote {', '.join(made)} to {out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecuprint",
        description="Two-point CAN voltage fingerprinting simulator and IDS toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize the benign feature dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--trace-dir", help="also export one waveform trace per ECU")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("train", help="train a forest model from a dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--train-frac", type=float,
                   help="train on a stratified fraction instead of all rows")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="run a split or k-fold experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("split", "kfold"), default="split")
    p.add_argument("--train-frac", type=float)
    p.add_argument("--kfold", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--gate-f1", type=float,
                   help="exit 4 if macro F1 falls below this value")
    p.add_argument("--timestamps", action="store_true")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("attack", help="run the configured masquerade campaign")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--gate-recall", type=float,
                   help="exit 4 if attacker recall falls below this value")
    p.add_argument("--timestamps", action="store_true")
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("report", help="render figures for datasets and reports")
    p.add_argument("--out", required=True)
    p.add_argument("--dataset")
    p.add_argument("--eval-report", help="report.json from evaluate/attack")
    p.add_argument("--trace", help="trace csv from simulate --trace-dir")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EcuPrintError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
