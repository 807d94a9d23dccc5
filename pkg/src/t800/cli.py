"""Command-line entry point: ``t800 {train,eval,synth,filter,bench,analyze}``.

Exit codes: 0 success, 1 runtime error, 2 usage error. Diagnostics go to
standard error; data goes to files or standard output.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Optional, Sequence

from . import __version__
from .analysis import AnalysisError, influence_report
from .filter import PolicyCode, T800Config, filter_pcap
from .harness import (
    DESK_DURATION,
    DESK_REPLICAS,
    HARNESS_SCAN_RATE,
    FULL_DURATION,
    FULL_REPLICAS,
    CostModel,
    HarnessError,
    build_workload,
    calibrate_cost,
    default_policies,
    read_metrics_csv,
    run_campaign,
    write_metrics_csv,
    Scenario,
)
from .packet import PacketError, PcapError, PcapWriter, LINKTYPE_RAW
from .policy import PolicyError, load_model, quantize_mlp, save_model
from .synth import build_training_dataset
from .trainer import (
    DEFAULT_LOGISTIC,
    DEFAULT_MIN_LEAF,
    DEFAULT_MLP,
    DEFAULT_SVM,
    TrainingError,
    evaluate,
    read_dataset_csv,
    stratified_split,
    train_dt,
    train_logistic,
    train_mlp,
    train_svm,
    write_dataset_csv,
)

log = logging.getLogger("t800")

KINDS = ("dt", "logreg", "svm", "mlp", "mlp_q8")
KIND_TO_CODE = {"dt": PolicyCode.DT, "logreg": PolicyCode.LR, "svm": PolicyCode.SVM,
                "mlp": PolicyCode.MLP, "mlp_q8": PolicyCode.MLP}
RUNTIME_ERRORS = (PacketError, PcapError, PolicyError, TrainingError, HarnessError, AnalysisError,
                  OSError, ValueError, NotImplementedError)


def _out(args, name: str) -> str:
    return name if os.path.isabs(name) else os.path.join(args.output_dir, name)


def _pick(value, default):
    return default if value is None else value


def _load_dataset(args):
    if args.dataset:
        with open(args.dataset, newline="") as f:
            return read_dataset_csv(f)
    log.info("no --dataset given; synthesizing %d + %d packets", args.n_benign, args.n_malicious)
    return build_training_dataset(args.n_benign, args.n_malicious, args.seed)


# --- subcommands ----------------------------------------------------------------


def cmd_train(args) -> int:
    data = _load_dataset(args)
    train, test = stratified_split(data, args.train_fraction, args.seed)
    kind = args.kind
    if kind == "dt":
        model = train_dt(train, args.max_depth, args.min_leaf)
    elif kind == "logreg":
        model = train_logistic(train, epochs=_pick(args.epochs, DEFAULT_LOGISTIC["epochs"]),
                               lr=_pick(args.lr, DEFAULT_LOGISTIC["lr"]), batch_size=args.batch_size,
                               seed=args.seed)
    elif kind == "svm":
        model = train_svm(train, epochs=_pick(args.epochs, DEFAULT_SVM["epochs"]), lr=_pick(args.lr, DEFAULT_SVM["lr"]),
                          c=args.c, batch_size=args.batch_size, seed=args.seed)
    else:
        model = train_mlp(train, epochs=_pick(args.epochs, DEFAULT_MLP["epochs"]), lr=_pick(args.lr, DEFAULT_MLP["lr"]),
                          batch_size=args.batch_size, seed=args.seed)
        if kind == "mlp_q8":
            model = quantize_mlp(model)
    path = _out(args, args.out or f"{kind}.json")
    with open(path, "w") as f:
        save_model(model, f)
    report = {"model": path, "kind": kind, "train": len(train), "test": len(test),
              **evaluate(model, test).as_dict()}
    print(json.dumps(report, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    with open(args.model) as f:
        model = load_model(f)
    data = _load_dataset(args)
    if not args.all:
        _, data = stratified_split(data, args.train_fraction, args.seed)
    print(json.dumps({"model": args.model, "n": len(data), **evaluate(model, data).as_dict()}, sort_keys=True))
    return 0


def cmd_synth(args) -> int:
    path = _out(args, args.out)
    if args.format == "csv":
        data = build_training_dataset(args.n_benign, args.n_malicious, args.seed)
        with open(path, "w", newline="") as f:
            write_dataset_csv(data, f)
        b, m = data.counts()
        print(json.dumps({"out": path, "benign": b, "malicious": m}, sort_keys=True))
        return 0
    s = Scenario(PolicyCode.DISABLED, args.intensity, args.malicious, args.duration)
    frames, is_scan = build_workload(s, args.seed, args.scan_rate)
    with open(path, "wb") as f:
        w = PcapWriter(f, LINKTYPE_RAW, nanosecond=True)
        for t, frame in frames:
            w.write(frame, t)
    n_scan = sum(is_scan)
    print(json.dumps({"out": path, "packets": len(frames), "scan": n_scan,
                      "benign": len(frames) - n_scan}, sort_keys=True))
    return 0


def cmd_filter(args) -> int:
    if args.disabled:
        config = T800Config.disabled()
    else:
        with open(args.model) as f:
            model = load_model(f)
        config = T800Config.stateless(model, KIND_TO_CODE[model.kind])
    with open(args.input, "rb") as src, open(_out(args, args.out), "wb") as sink:
        counters = filter_pcap(src, config, sink)
    print(counters.line())
    return 0


def cmd_bench(args) -> int:
    replicas = FULL_REPLICAS if args.full_scale and args.replicas is None else (args.replicas or DESK_REPLICAS)
    duration = FULL_DURATION if args.full_scale and args.duration is None else (args.duration or DESK_DURATION)
    policies = {}
    for path in args.model or []:
        with open(path) as f:
            m = load_model(f)
        policies[KIND_TO_CODE[m.kind]] = m
    if len(policies) < 4:
        log.info("training default policies for missing codes (seed %d)", args.seed)
        for code, m in default_policies(args.seed).items():
            policies.setdefault(code, m)
    if args.stack_cost_ns is not None:
        cost = CostModel(args.stack_cost_ns, args.per_byte_ns, args.clock)
    else:
        cost = calibrate_cost(policies, args.scan_rate, per_byte_ns=args.per_byte_ns, clock=args.clock)
    log.info("stack cost %s; %d replicas x %.0f s", cost, replicas, duration)

    def progress(run):
        log.info("%s %-8s replica %d done", run.scenario.code, run.scenario.policy_name, run.scenario.replica_index)

    runs = run_campaign(policies, replicas, duration, args.seed, cost, scan_rate=args.scan_rate, progress=progress)
    path = _out(args, args.out)
    with open(path, "w", newline="") as f:
        rows = write_metrics_csv(runs, f)
    aborted = sum(not r.completed for r in runs)
    print(json.dumps({"out": path, "rows": rows, "runs": len(runs) - aborted, "aborted": aborted,
                      "stack_cost_ns": cost.base_ns, "clock": cost.clock}, sort_keys=True))
    return 0


def cmd_analyze(args) -> int:
    with open(args.metrics, newline="") as f:
        runs = read_metrics_csv(f)
    report = influence_report(runs, args.metric)
    sys.stdout.write(report.to_text(args.delimiter))
    if args.json:
        with open(_out(args, args.json), "w") as f:
            f.write(report.to_json())
    return 0


# --- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for every random choice (default 0)")
    common.add_argument("--output-dir", default=".", help="directory for relative output paths")
    common.add_argument("-v", "--verbose", action="count", default=0, help="more diagnostics on stderr")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--dataset", help="labeled CSV; synthesized from --seed when omitted")
    data.add_argument("--n-benign", type=int, default=10_900)
    data.add_argument("--n-malicious", type=int, default=9_100)
    data.add_argument("--train-fraction", type=float, default=0.7)

    p = argparse.ArgumentParser(prog="t800", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", parents=[common, data], help="train a policy model")
    t.add_argument("kind", choices=KINDS)
    t.add_argument("--out", help="model file (default <kind>.json)")
    t.add_argument("--max-depth", type=int, default=12)
    t.add_argument("--min-leaf", type=int, default=DEFAULT_MIN_LEAF)
    t.add_argument("--epochs", type=int, help="default 200 for linear models, 2000 for the MLP")
    t.add_argument("--lr", type=float, help="learning rate (per-kind default)")
    t.add_argument("--batch-size", type=int, default=DEFAULT_MLP["batch_size"])
    t.add_argument("--c", type=float, default=DEFAULT_SVM["c"], help="SVM hinge weight")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", parents=[common, data], help="evaluate a model file")
    e.add_argument("--model", required=True)
    e.add_argument("--all", action="store_true", help="score the whole dataset, not the held-out split")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", parents=[common], help="synthesize traffic (pcap) or a training set (csv)")
    s.add_argument("--format", choices=("pcap", "csv"), default="pcap")
    s.add_argument("--out", required=True)
    s.add_argument("--intensity", choices=("I0", "I1"), default="I0")
    s.add_argument("--malicious", choices=("M0", "M1"), default="M1")
    s.add_argument("--duration", type=float, default=DESK_DURATION)
    s.add_argument("--scan-rate", type=float, default=HARNESS_SCAN_RATE)
    s.add_argument("--n-benign", type=int, default=10_900)
    s.add_argument("--n-malicious", type=int, default=9_100)
    s.set_defaults(func=cmd_synth)

    f = sub.add_parser("filter", parents=[common], help="filter a pcap through a model")
    f.add_argument("--input", required=True)
    f.add_argument("--out", required=True)
    g = f.add_mutually_exclusive_group(required=True)
    g.add_argument("--model")
    g.add_argument("--disabled", action="store_true", help="pass every TCP record")
    f.set_defaults(func=cmd_filter)

    b = sub.add_parser("bench", parents=[common], help="run the factorial benchmark campaign")
    b.add_argument("--out", default="metrics.csv")
    b.add_argument("--model", action="append", help="model file; repeat per policy (others are trained)")
    b.add_argument("--replicas", type=int)
    b.add_argument("--duration", type=float)
    b.add_argument("--full-scale", action="store_true", help=f"{FULL_DURATION:.0f} s, {FULL_REPLICAS} replicas")
    b.add_argument("--clock", choices=("virtual", "wall"), default="virtual",
                   help="virtual: nominal costs, byte-identical output; wall: measured time")
    b.add_argument("--stack-cost-ns", type=int, help="per-packet stack cost (default: calibrated)")
    b.add_argument("--per-byte-ns", type=float, default=0.0)
    b.add_argument("--scan-rate", type=float, default=HARNESS_SCAN_RATE)
    b.set_defaults(func=cmd_bench)

    a = sub.add_parser("analyze", parents=[common], help="influence-of-factors report from metrics CSV")
    a.add_argument("metrics")
    a.add_argument("--metric", default="cpu_busy_fraction")
    a.add_argument("--delimiter", default=",")
    a.add_argument("--json", help="also write the machine-readable report here")
    a.set_defaults(func=cmd_analyze)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    if getattr(args, "replicas", None) is not None and args.replicas < 1:
        parser.print_usage(sys.stderr)
        print("t800: error: --replicas must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except RUNTIME_ERRORS as exc:
        print(f"t800: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
