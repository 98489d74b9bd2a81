"""Command-line entry point: ``provsketch <subcommand> ...``.

Exit codes: 0 ok, 1 validation error (bad flags, config or input), 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from . import detect as det
from .authtrace import temporal_traverse
from .events import ParseError, parse_sessions
from .kernels import KINDS, kernel_kind
from .pipeline import (BENCH_COLUMNS, ConfigError, PipelineConfig, StageError, bench, config_hash,
                       evaluate, load_config_file, load_partitions, load_sketch_dir,
                       parse_h_range, run_pipeline, stage_build, stage_featurize, stage_ingest,
                       write_csv_rows, write_report)
from .sketch import SketchMismatch
from .synth import SynthSpec, synth_generate

log = logging.getLogger("provsketch")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _nonneg_int(s: str) -> int:
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or YAML file; its keys override flags")
    common.add_argument("--seed", type=int, default=0, help="global seed recorded in every artifact")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = _Parser(prog="provsketch", description="Provenance-graph sketching and anomaly detection.")
    p.add_argument("--version", action="version", version=f"provsketch {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", parents=[common], help="parse raw logs into canonical JSONL")
    s.add_argument("--format", choices=["streamspot", "jsonl", "canonical"], default="streamspot")
    s.add_argument("--input", required=True)
    s.add_argument("--output", required=True)
    s.add_argument("--lenient", action="store_true", help="skip and count malformed lines")

    s = sub.add_parser("build", parents=[common], help="partition events and build graphs")
    s.add_argument("--events", required=True, help="canonical JSONL file or directory")
    s.add_argument("--partition", choices=["graph_id", "host"], default="graph_id")
    s.add_argument("--snapshot-every", default="graph", help="graph | N[e] events | Ns seconds")
    s.add_argument("--output", required=True)

    s = sub.add_parser("featurize", parents=[common], help="kernel histograms and sketches")
    s.add_argument("--kernel", default="prov", help=f"one of {', '.join(KINDS)}")
    s.add_argument("--h", type=_nonneg_int, default=3)
    s.add_argument("--input", required=True, help="output directory of build")
    s.add_argument("--output", required=True)
    s.add_argument("--sketch-size", type=_positive_int, default=2048)
    s.add_argument("--sketch-mode", choices=["snapshot", "stream"], default="snapshot")
    s.add_argument("--opaque-versions", action="store_true", help="walks stop at version links")
    s.add_argument("--workers", type=_positive_int, default=1)

    s = sub.add_parser("train", parents=[common], help="fit the medoid model on benign sketches")
    s.add_argument("--sketches", required=True)
    s.add_argument("--k", default="auto")
    s.add_argument("--threshold-sigma", type=float, default=2.0)
    s.add_argument("--out", required=True)
    s.add_argument("--exclude", help="ground-truth file; listed hosts are left out of training")
    s.add_argument("--fold", type=int, default=None, help="hold out this benign fold (0..4)")

    s = sub.add_parser("detect", parents=[common], help="score sketches against a model")
    s.add_argument("--model", required=True)
    s.add_argument("--sketches", required=True)
    s.add_argument("--ground-truth")
    s.add_argument("--report", required=True)
    s.add_argument("--threshold-sigma", type=float, default=None,
                   help="override the model's d at scoring time")
    s.add_argument("--window-seconds", type=_nonneg_int, default=0)

    s = sub.add_parser("trace", parents=[common], help="temporal traversal over session logs")
    s.add_argument("--sessions", required=True)
    s.add_argument("--seed-host", required=True)
    s.add_argument("--seed-user", default="")
    s.add_argument("--seed-time", type=int, required=True)
    s.add_argument("--users", help="comma-separated users allowed to propagate")
    s.add_argument("--output", help="directory for flagged.csv and edges.csv")
    s.add_argument("--lenient", action="store_true")

    s = sub.add_parser("bench", parents=[common], help="histogram size, vocabulary and runtime per kernel and h")
    s.add_argument("--input", required=True)
    s.add_argument("--format", choices=["streamspot", "jsonl", "canonical"], default="streamspot")
    s.add_argument("--partition", choices=["graph_id", "host"], default="graph_id")
    s.add_argument("--kernels", default="all")
    s.add_argument("--h", default="0..5")
    s.add_argument("--emit", choices=["csv"], default="csv")
    s.add_argument("--output", help="CSV path (stdout if omitted)")
    s.add_argument("--per-graph", help="optional CSV of per-partition histogram growth")
    s.add_argument("--opaque-versions", action="store_true")

    s = sub.add_parser("synth", parents=[common], help="write the synthetic corpus")
    s.add_argument("--output", required=True)
    s.add_argument("--runs", type=_positive_int, default=20)

    s = sub.add_parser("run", parents=[common], help="full pipeline from a config file")
    s.add_argument("--input")
    s.add_argument("--workdir")
    s.add_argument("--ground-truth")
    s.add_argument("--force", action="store_true", help="rerun stages even if outputs exist")
    s.add_argument("--cv", action="store_true")
    return p


# config keys accepted per subcommand, mapped to argparse dests
_CONFIG_KEYS = {
    "seed": "seed", "kernel": "kernel", "h": "h", "K": "sketch_size", "sketch_mode": "sketch_mode",
    "k": "k", "d": "threshold_sigma", "partition": "partition", "snapshot": "snapshot_every",
    "lenient": "lenient", "workers": "workers", "users": "users",
}


def _apply_config(args) -> None:
    if not args.config or args.command == "run":
        return
    data = load_config_file(args.config)
    for key, val in data.items():
        dest = _CONFIG_KEYS.get(key, key)
        if key == "transparent":
            if hasattr(args, "opaque_versions"):
                args.opaque_versions = not val
            continue
        if hasattr(args, dest):
            setattr(args, dest, val)


def _header(stage: str, args, chash: str) -> str:
    return f"provsketch stage={stage} config_hash={chash} seed={args.seed}"


def _arg_hash(args) -> str:
    from .pipeline import _digest
    d = {k: v for k, v in vars(args).items() if k not in ("verbose", "config")}
    return _digest(d)


def cmd_ingest(args) -> int:
    chash = _arg_hash(args)
    out = Path(args.output)
    summary = stage_ingest(args.input, args.format, out, args.lenient, chash, args.seed)
    print(f"ingested {len(summary['files'])} file(s), {summary['lines']} line(s), "
          f"{summary['skipped']} skipped -> {out}")
    return EXIT_OK


def cmd_build(args) -> int:
    index = stage_build(args.events, args.output, args.partition, args.snapshot_every,
                        _arg_hash(args), args.seed)
    print(f"built {len(index)} partition(s) -> {args.output}")
    return EXIT_OK


def cmd_featurize(args) -> int:
    feats = stage_featurize(args.input, args.output, kernel_kind(args.kernel), args.h,
                            args.sketch_size, args.seed, args.sketch_mode, not args.opaque_versions,
                            args.workers, _arg_hash(args))
    print(f"featurized {len(feats)} snapshot(s) -> {args.output}")
    return EXIT_OK


def _sketch_stamp(items):
    kernels = {hdr["kernel"] for _, hdr in items}
    hs = {hdr["h"] for _, hdr in items}
    if len(kernels) > 1 or len(hs) > 1:
        raise SketchMismatch(f"sketches mix kernels {sorted(kernels)} or depths {sorted(hs)}")
    return (kernels.pop(), hs.pop()) if items else ("", 0)


def cmd_train(args) -> int:
    items = load_sketch_dir(args.sketches)
    if not items:
        raise ConfigError(f"no sketches in {args.sketches}")
    kernel, h = _sketch_stamp(items)
    sks = [sk for sk, _ in items]
    truth = det.read_ground_truth(args.exclude) if args.exclude else set()
    from .pipeline import training_split
    if args.fold is not None:
        sks, _ = training_split(sks, truth, args.fold, 5)
    elif truth:
        sks = [s for s in sks if not det.is_positive(truth, str(s.meta.get("host", "")))
               and not det.is_positive(truth, str(s.meta.get("partition", "")))]
    k = "auto" if str(args.k) == "auto" else int(args.k)
    if k != "auto" and k < 1:
        raise ConfigError("k must be >= 1")
    model = det.train(sks, k=k, d=args.threshold_sigma, kernel=kernel, h=h, config_hash=_arg_hash(args))
    model.save(args.out)
    print(f"trained k={model.k} on {len(sks)} sketch(es) -> {args.out}")
    return EXIT_OK


def cmd_detect(args) -> int:
    model = det.MedoidModel.load(args.model)
    items = load_sketch_dir(args.sketches)
    kernel, h = _sketch_stamp(items)
    truth = det.read_ground_truth(args.ground_truth) if args.ground_truth else None
    reports, verdicts, metrics = evaluate(model, [sk for sk, _ in items], truth, args.window_seconds,
                                          kernel, h, args.threshold_sigma)
    write_report(verdicts, reports, args.report, metrics, _header("detect", args, _arg_hash(args)))
    flagged = sum(v.compromised for v in verdicts)
    print(f"{flagged}/{len(verdicts)} host window(s) flagged -> {args.report}")
    if metrics:
        m = metrics
        print(f"precision={m.precision:.4f} recall={m.recall:.4f} accuracy={m.accuracy:.4f} f1={m.f1:.4f}")
    return EXIT_OK


def cmd_trace(args) -> int:
    edges = parse_sessions(args.sessions, lenient=args.lenient)
    users = args.users
    if isinstance(users, str):
        users = [u.strip() for u in users.split(",") if u.strip()]
    res = temporal_traverse(edges, args.seed_host, args.seed_user, args.seed_time, users)
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        res.write_flagged_csv(out / "flagged.csv")
        res.write_edges_csv(out / "edges.csv")
    for hname, t in sorted(res.hosts.items(), key=lambda x: (x[1], x[0])):
        print(f"host\t{hname}\t{t}")
    for u, t in sorted(res.users.items(), key=lambda x: (x[1], x[0])):
        print(f"user\t{u}\t{t}")
    return EXIT_OK


def cmd_bench(args) -> int:
    kernels = KINDS if args.kernels == "all" else [kernel_kind(k) for k in str(args.kernels).split(",")]
    hs = parse_h_range(args.h)
    parts = load_partitions(args.input, args.format, args.partition)
    per = [] if args.per_graph else None
    rows = bench(parts, kernels, hs, transparent=not args.opaque_versions, per_snapshot=per)
    header = _header("bench", args, _arg_hash(args))
    if args.output:
        write_csv_rows(rows, args.output, BENCH_COLUMNS, header)
    else:
        import csv
        w = csv.DictWriter(sys.stdout, fieldnames=list(BENCH_COLUMNS))
        w.writeheader()
        w.writerows(rows)
    if per is not None:
        write_csv_rows(per, args.per_graph, ["kernel", "h", "partition", "histogram_size",
                                             "cumulative_vocab"], header)
    return EXIT_OK


def cmd_synth(args) -> int:
    paths = synth_generate(args.output, args.seed, SynthSpec(runs=args.runs))
    print(f"wrote {len(paths)} graph file(s) -> {args.output}")
    return EXIT_OK


def cmd_run(args) -> int:
    data = load_config_file(args.config) if args.config else {}
    cfg = PipelineConfig.from_dict(data)
    for flag, key in (("input", "input"), ("workdir", "workdir"), ("ground_truth", "ground_truth")):
        if getattr(args, flag) and key not in data:
            setattr(cfg, key, getattr(args, flag))
    if args.cv:
        cfg.cv = True
    if "seed" not in data:
        cfg.seed = args.seed
    cfg.validate()
    res = run_pipeline(cfg, force=args.force)
    print(f"config_hash={config_hash(cfg)} report={res.report_path}")
    if res.metrics:
        m = res.metrics
        print(f"precision={m.precision:.4f} recall={m.recall:.4f} accuracy={m.accuracy:.4f} f1={m.f1:.4f}")
    if res.cv_pooled:
        m = res.cv_pooled
        print(f"cv pooled: precision={m.precision:.4f} recall={m.recall:.4f} f1={m.f1:.4f}")
    return EXIT_OK


COMMANDS = {"ingest": cmd_ingest, "build": cmd_build, "featurize": cmd_featurize, "train": cmd_train,
            "detect": cmd_detect, "trace": cmd_trace, "bench": cmd_bench, "synth": cmd_synth,
            "run": cmd_run}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"provsketch: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        _apply_config(args)
        return COMMANDS[args.command](args)
    except (ConfigError, ParseError, SketchMismatch, det.StampMismatch, det.InsufficientSamples,
            FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(f"provsketch {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except StageError as exc:
        print(f"provsketch {args.command}: {exc}", file=sys.stderr)
        cause = exc.cause
        validation = (ConfigError, ParseError, FileNotFoundError, SketchMismatch, det.StampMismatch)
        return EXIT_VALIDATION if isinstance(cause, validation) else EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled", exc_info=True)
        print(f"provsketch {args.command}: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
