"""Stage orchestration: ingest, build, featurize, train, detect, bench.

Each stage writes into ``<workdir>/<stage>-<hash>/`` where the hash covers
only the configuration fields the stage (and its upstream stages) depend on,
so changing ``d`` reruns training and detection but reuses the sketches.
"""
from __future__ import annotations

import csv
import json
import logging
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from hashlib import blake2b
from pathlib import Path

from . import detect as det
from .events import (EventVocab, ParseStats, iter_event_files, load_events, partition,
                     read_events, write_events)
from .graph import INBOUND_ACTIONS, ProvGraph
from .kernels import KINDS, LabelHistogram, kernel_kind, make_kernel
from .sketch import (empty_sketch, read_sketch, sketch_from_histogram, sketch_update,
                     sparse_vectorize, write_sketch, write_sketch_csv, write_sparse_csv)

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage} failed: {cause}")


# -- configuration --------------------------------------------------------
@dataclass
class PipelineConfig:
    input: str = ""
    input_format: str = "streamspot"  # streamspot | jsonl | canonical
    workdir: str = "runs"
    ground_truth: str = ""
    kernel: str = "prov"
    h: int = 3
    snapshot: str = "graph"  # graph | <N>e | <N>s
    K: int = 2048
    seed: int = 0
    sketch_mode: str = "snapshot"  # snapshot | stream
    k: str = "auto"
    d: float = 2.0
    partition: str = "graph_id"
    transparent: bool = True
    lenient: bool = False
    fold: int = 0  # benign partitions in this fold are held out of training
    folds: int = 5
    window_seconds: int = 0
    workers: int = 1
    cv: bool = False  # also pool metrics over every benign fold

    def validate(self) -> "PipelineConfig":
        if not isinstance(self.h, int) or self.h < 0:
            raise ConfigError(f"h must be a non-negative integer, got {self.h!r}")
        if not isinstance(self.K, int) or self.K < 1:
            raise ConfigError(f"K must be a positive integer, got {self.K!r}")
        try:
            self.kernel = kernel_kind(self.kernel)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.input_format not in ("streamspot", "jsonl", "canonical"):
            raise ConfigError(f"unknown input format {self.input_format!r}")
        if self.sketch_mode not in ("snapshot", "stream"):
            raise ConfigError(f"sketch_mode must be snapshot or stream, got {self.sketch_mode!r}")
        if self.partition not in ("graph_id", "host"):
            raise ConfigError(f"partition must be graph_id or host, got {self.partition!r}")
        parse_snapshot_policy(self.snapshot)
        k = str(self.k)
        if k != "auto" and not (k.isdigit() and int(k) >= 1):
            raise ConfigError(f"k must be 'auto' or a positive integer, got {self.k!r}")
        if self.d < 0:
            raise ConfigError("d must be >= 0")
        if not 0 <= self.fold < self.folds:
            raise ConfigError(f"fold must lie in 0..{self.folds - 1}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_dict(load_config_file(path))

    def to_dict(self) -> dict:
        return asdict(self)


def load_config_file(path) -> dict:
    """JSON, or YAML when the suffix says so."""
    text = Path(path).read_text(encoding="utf-8")
    if str(path).endswith((".yaml", ".yml")):
        import yaml
        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return data


STAGE_FIELDS = {
    "ingest": ("input", "input_format", "lenient"),
    "build": ("partition", "snapshot"),
    "featurize": ("kernel", "h", "K", "seed", "sketch_mode", "transparent"),
    "train": ("k", "d", "fold", "folds", "ground_truth"),
    "detect": ("window_seconds", "cv"),
}
STAGES = tuple(STAGE_FIELDS)


def _digest(obj) -> str:
    return blake2b(json.dumps(obj, sort_keys=True).encode("utf-8"), digest_size=8).hexdigest()


def config_hash(cfg: PipelineConfig, upto: str = "detect") -> str:
    """Hash of the fields that ``upto`` and every stage before it depend on."""
    keys = []
    for stage in STAGES:
        keys.extend(STAGE_FIELDS[stage])
        if stage == upto:
            break
    d = cfg.to_dict()
    return _digest({k: d[k] for k in keys})


def parse_snapshot_policy(spec: str) -> tuple[str, int]:
    """``graph`` -> one snapshot at the end; ``500`` / ``500e`` every 500 events; ``3600s`` by time."""
    s = str(spec).strip().lower()
    if s == "graph":
        return ("graph", 0)
    m = re.fullmatch(r"(\d+)\s*(e|events?|s|sec|seconds?)?", s)
    if not m or int(m.group(1)) < 1:
        raise ConfigError(f"bad snapshot policy {spec!r}; use graph, N-events (e.g. 500e) or N-seconds (e.g. 3600s)")
    unit = m.group(2) or "e"
    return ("seconds" if unit.startswith("s") else "events", int(m.group(1)))


def snapshot_ends(events, policy) -> list[int]:
    """Exclusive end indices of each snapshot over an ordered event list."""
    kind, n = parse_snapshot_policy(policy) if isinstance(policy, str) else policy
    total = len(events)
    if total == 0:
        return []
    if kind == "graph":
        return [total]
    if kind == "events":
        ends = list(range(n, total, n))
    else:
        ends, boundary = [], events[0].timestamp + n
        for i, ev in enumerate(events):
            while ev.timestamp >= boundary:
                if not ends or ends[-1] != i:
                    ends.append(i)
                boundary += n
    ends = [e for e in ends if 0 < e < total]
    ends.append(total)
    return ends


def safe_name(name: str) -> str:
    clean = re.sub(r"[^A-Za-z0-9_.-]", "_", name) or "_default"
    if clean != name:
        clean += "-" + blake2b(name.encode("utf-8"), digest_size=3).hexdigest()
    return clean


def _most_common(values) -> str:
    counts: dict[str, int] = {}
    for v in values:
        if v:
            counts[v] = counts.get(v, 0) + 1
    return min(counts, key=lambda x: (-counts[x], x)) if counts else ""


# -- replay ---------------------------------------------------------------
@dataclass
class SnapshotFeatures:
    partition: str
    snapshot_id: int
    timestamp: int
    host: str
    user: str
    histogram: LabelHistogram
    sketch: object
    nodes: int = 0
    edges: int = 0
    meta: dict = field(default_factory=dict)


def replay_partition(events, part: str, kernel: str, h: int, K: int, seed: int,
                     ends=None, sketch_mode: str = "snapshot", transparent: bool = True,
                     inbound_actions=INBOUND_ACTIONS) -> tuple[list[SnapshotFeatures], ProvGraph]:
    """Stream a partition's events through graph, kernel and sketch; emit one record per snapshot."""
    events = list(events)
    ends = snapshot_ends(events, "graph") if ends is None else list(ends)
    g = ProvGraph(EventVocab(), inbound_actions=inbound_actions)
    kern = make_kernel(kernel, h, g.vocab, transparent=transparent)
    sk = empty_sketch(K, seed)
    out = []
    start = 0
    for end in ends:
        window = events[start:end]
        for ev in window:
            outcome = g.insert_event(ev)
            if outcome.inserted or outcome.new_nodes:
                change = kern.apply(g, outcome)
                if sketch_mode == "stream" and change:
                    sk = sketch_update(sk, change, kern.histogram)
        mark = g.snapshot()
        meta = {"partition": part, "snapshot_id": mark.snapshot_id, "timestamp": mark.timestamp,
                "host": _most_common(ev.host for ev in window) or part,
                "user": _most_common(ev.user for ev in window)}
        if sketch_mode == "stream":
            snap = sk.copy()
            snap.meta = dict(meta)
        else:
            snap = sketch_from_histogram(kern.histogram, K, seed, meta)
        out.append(SnapshotFeatures(part, mark.snapshot_id, mark.timestamp, meta["host"], meta["user"],
                                    kern.histogram.copy(), snap, mark.node_count, mark.edge_count,
                                    meta))
        start = end
    return out, g


# -- stages ---------------------------------------------------------------
def _header(stage: str, h: str, seed: int) -> str:
    return f"provsketch stage={stage} config_hash={h} seed={seed}"


def stage_ingest(inputs, fmt: str, out_dir, lenient: bool = False, chash: str = "", seed: int = 0) -> dict:
    """Parse raw logs into one canonical JSONL per input file plus the type vocabularies."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    vocab, stats = EventVocab(), ParseStats()
    files = []
    for src in iter_event_files(inputs):
        if src.suffix in (".json",) or src.name in ("ground_truth.txt",):
            continue
        kw = {"lenient": lenient, "vocab": vocab, "stats": stats} if fmt != "canonical" else {}
        evs = load_events(src, fmt, **kw)
        if fmt == "canonical":
            for ev in evs:
                vocab.register(ev)
        dst = out / (src.stem + ".jsonl")
        write_events(evs, dst, header=_header("ingest", chash, seed))
        files.append(dst.name)
    summary = {"config_hash": chash, "files": files, "lines": stats.lines, "skipped": stats.skipped,
               "vocab": vocab.to_json()}
    (out / "ingest.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return summary


def stage_build(events_path, out_dir, by: str = "graph_id", snapshot: str = "graph",
                chash: str = "", seed: int = 0, transparent: bool = True) -> dict:
    """Partition canonical events, record snapshot boundaries, dump each graph and its stats."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    events = []
    for f in iter_event_files(events_path):
        if f.suffix == ".jsonl":
            events.extend(read_events(f))
    parts = partition(events, by)
    index = {}
    for part in sorted(parts):
        evs = sorted(parts[part], key=lambda e: (e.timestamp, e.seq))
        name = safe_name(part)
        ends = snapshot_ends(evs, snapshot)
        write_events(evs, out / f"{name}.events.jsonl", header=_header("build", chash, seed))
        g = ProvGraph(EventVocab())
        for ev in evs:
            g.insert_event(ev)
        with open(out / f"{name}.graph.tsv", "w", encoding="utf-8") as fh:
            fh.write(f"# {_header('build', chash, seed)}\n")
            for line in g.dump_lines():
                fh.write(line + "\n")
        index[name] = {"partition": part, "ends": ends, "stats": g.reduction_stats()}
    (out / "partitions.json").write_text(
        json.dumps({"config_hash": chash, "partitions": index}, indent=1, sort_keys=True) + "\n")
    return index


def _featurize_one(args):
    name, part, path, ends, kernel, h, K, seed, mode, transparent = args
    evs = read_events(path)
    feats, _ = replay_partition(evs, part, kernel, h, K, seed, ends, mode, transparent)
    return name, feats


def stage_featurize(build_dir, out_dir, kernel: str = "prov", h: int = 3, K: int = 2048,
                    seed: int = 0, sketch_mode: str = "snapshot", transparent: bool = True,
                    workers: int = 1, chash: str = "") -> list[SnapshotFeatures]:
    """Histograms, binary sketches, the sketch CSV and the sparse-vector CSV for every snapshot."""
    bdir, out = Path(build_dir), Path(out_dir)
    kernel = kernel_kind(kernel)
    idx_path = bdir / "partitions.json"
    index = json.loads(idx_path.read_text())["partitions"] if idx_path.exists() else {}
    jobs = []
    for path in sorted(bdir.glob("*.events.jsonl")):
        name = path.name[: -len(".events.jsonl")]
        info = index.get(name, {})
        jobs.append((name, info.get("partition", name), str(path), info.get("ends"),
                     kernel, h, K, seed, sketch_mode, transparent))
    if not jobs:  # plain canonical files, one partition each
        for path in sorted(bdir.glob("*.jsonl")):
            jobs.append((path.stem, path.stem, str(path), None, kernel, h, K, seed,
                         sketch_mode, transparent))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_featurize_one, jobs))
    else:
        results = [_featurize_one(j) for j in jobs]

    (out / "hist").mkdir(parents=True, exist_ok=True)
    (out / "sketch").mkdir(parents=True, exist_ok=True)
    header = _header("featurize", chash, seed)
    feats: list[SnapshotFeatures] = []
    for name, fs in sorted(results, key=lambda r: r[0]):
        for f in fs:
            stem = f"{name}.{f.snapshot_id:05d}"
            f.histogram.to_csv(out / "hist" / f"{stem}.csv", header_comment=header)
            f.sketch.meta["config_hash"] = chash
            write_sketch(f.sketch, out / "sketch" / f"{stem}.psk", kernel=kernel, h=h)
            feats.append(f)
    write_sketch_csv([f.sketch for f in feats], out / "sketches.csv", header_comment=header)
    vocab, mat = sparse_vectorize([f.histogram for f in feats])
    write_sparse_csv(out / "sparse.csv", vocab, mat,
                     [{"partition": f.partition, "snapshot_id": f.snapshot_id} for f in feats],
                     header_comment=header)
    return feats


def load_sketch_dir(path):
    """All ``.psk`` files under ``path`` (or its ``sketch/`` child), sorted by name."""
    p = Path(path)
    if (p / "sketch").is_dir():
        p = p / "sketch"
    out = []
    for f in sorted(p.glob("*.psk")):
        sk, header = read_sketch(f)
        out.append((sk, header))
    return out


def training_split(sketches, truth: set, fold: int = 0, folds: int = 5):
    """Benign partitions outside ``fold`` train; everything else is evaluated."""
    train_set, test_set = [], []
    for sk in sketches:
        part = str(sk.meta.get("partition", ""))
        host = str(sk.meta.get("host", "")) or part
        benign = not (det.is_positive(truth, host) or det.is_positive(truth, part))
        if benign and det.fold_of(part, folds) != fold:
            train_set.append(sk)
        else:
            test_set.append(sk)
    return train_set, test_set


def window_of(ts: int, window_seconds: int) -> str:
    return str(ts // window_seconds) if window_seconds else ""


REPORT_COLUMNS = ("host", "window", "verdict", "first_anomaly_ts", "nearest_cluster", "distance", "threshold")


def evaluate(model, sketches, truth: set | None = None, window_seconds: int = 0, kernel=None, h=None,
             d=None):
    reports = [det.classify(model, sk, kernel, h, d) for sk in sketches]
    verdicts = det.host_verdicts(
        reports, key=lambda r: (r.host or r.partition, window_of(r.timestamp, window_seconds)))
    metrics = det.confusion(verdicts, truth) if truth is not None else None
    return reports, verdicts, metrics


def cross_validate(sketches, truth: set, folds: int = 5, k="auto", d: float = 2.0,
                   kernel: str = "", h: int = 0, window_seconds: int = 0):
    """Train on each benign fold complement, evaluate on the rest; returns per-fold and pooled metrics."""
    per_fold = []
    pooled = det.Metrics(0, 0, 0, 0)
    for f in range(folds):
        tr, te = training_split(sketches, truth, f, folds)
        model = det.train(tr, k=k, d=d, kernel=kernel, h=h)
        _, _, m = evaluate(model, te, truth, window_seconds, kernel, h)
        per_fold.append((f, model.k, m))
        for a in ("tp", "fp", "tn", "fn"):
            setattr(pooled, a, getattr(pooled, a) + getattr(m, a))
    return per_fold, pooled


def write_report(verdicts, reports, path, metrics=None, header: str | None = None) -> None:
    by_host: dict[tuple, list] = {}
    for r in reports:
        by_host.setdefault((r.host or r.partition), []).append(r)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for v in verdicts:
            r = v.first_anomaly
            if r is None:  # the snapshot that came closest to crossing its threshold
                rs = by_host.get(v.host, [])
                r = max(rs, key=lambda x: x.distance - x.threshold) if rs else None
            w.writerow([v.host, v.window, v.verdict,
                        v.first_anomaly.timestamp if v.first_anomaly else "",
                        r.nearest_medoid if r else "", f"{r.distance:.6f}" if r else "",
                        f"{r.threshold:.6f}" if r else ""])
        if metrics is not None:
            for key, val in metrics.as_dict().items():
                fh.write(f"# {key}={val}\n")


# -- orchestration --------------------------------------------------------
def _done(stage_dir: Path) -> bool:
    return (stage_dir / ".done").exists()


def _mark(stage_dir: Path, chash: str) -> None:
    (stage_dir / ".done").write_text(chash + "\n")


@dataclass
class PipelineResult:
    dirs: dict
    metrics: det.Metrics | None
    verdicts: list
    model_path: Path
    report_path: Path
    cv_pooled: det.Metrics | None = None


def run_pipeline(cfg: PipelineConfig, force: bool = False) -> PipelineResult:
    cfg.validate()
    if not Path(cfg.input).exists():
        raise ConfigError(f"input {cfg.input!r} does not exist")
    if cfg.ground_truth and not Path(cfg.ground_truth).exists():
        raise ConfigError(f"ground truth {cfg.ground_truth!r} does not exist")
    root = Path(cfg.workdir)
    dirs = {s: root / f"{s}-{config_hash(cfg, s)}" for s in STAGES}
    hashes = {s: config_hash(cfg, s) for s in STAGES}

    def run(stage, fn):
        d = dirs[stage]
        if _done(d) and not force:
            log.info("stage %s up to date in %s", stage, d)
            return
        d.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        try:
            fn(d)
        except Exception as exc:
            raise StageError(stage, exc) from exc
        _mark(d, hashes[stage])
        log.info("stage %s done in %.2fs", stage, time.perf_counter() - t0)

    run("ingest", lambda d: stage_ingest(cfg.input, cfg.input_format, d, cfg.lenient,
                                         hashes["ingest"], cfg.seed))
    run("build", lambda d: stage_build(dirs["ingest"], d, cfg.partition, cfg.snapshot,
                                       hashes["build"], cfg.seed))
    run("featurize", lambda d: stage_featurize(dirs["build"], d, cfg.kernel, cfg.h, cfg.K, cfg.seed,
                                               cfg.sketch_mode, cfg.transparent, cfg.workers,
                                               hashes["featurize"]))
    truth = det.read_ground_truth(cfg.ground_truth) if cfg.ground_truth else set()
    k_arg = "auto" if str(cfg.k) == "auto" else int(cfg.k)
    model_path = dirs["train"] / "model.json"

    def do_train(d):
        sks = [sk for sk, _ in load_sketch_dir(dirs["featurize"])]
        tr, _ = training_split(sks, truth, cfg.fold, cfg.folds)
        model = det.train(tr, k=k_arg, d=cfg.d, kernel=cfg.kernel,
                          h=cfg.h, config_hash=hashes["train"])
        model.save(model_path)

    run("train", do_train)
    report_path = dirs["detect"] / "report.csv"
    result = {}

    def do_detect(d):
        model = det.MedoidModel.load(model_path)
        sks = [sk for sk, _ in load_sketch_dir(dirs["featurize"])]
        _, test = training_split(sks, truth, cfg.fold, cfg.folds)
        reports, verdicts, metrics = evaluate(model, test, truth if cfg.ground_truth else None,
                                              cfg.window_seconds, cfg.kernel, cfg.h)
        write_report(verdicts, reports, report_path, metrics, _header("detect", hashes["detect"], cfg.seed))
        summary = {"config_hash": hashes["detect"], "config": cfg.to_dict(),
                   "metrics": metrics.as_dict() if metrics else None,
                   "k": model.k, "n_test": len(test)}
        if cfg.cv:
            per_fold, pooled = cross_validate(sks, truth, cfg.folds, k_arg, cfg.d, cfg.kernel, cfg.h,
                                              cfg.window_seconds)
            rows = [dict(fold=f, k=k, **m.as_dict()) for f, k, m in per_fold]
            rows.append(dict(fold="pooled", k="", **pooled.as_dict()))
            write_csv_rows(rows, d / "cv.csv", ["fold", "k"] + list(pooled.as_dict()),
                           header=_header("detect", hashes["detect"], cfg.seed))
            summary["cv_pooled"] = pooled.as_dict()
        (d / "metrics.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
        result.update(verdicts=verdicts, metrics=metrics)

    run("detect", do_detect)
    summary = json.loads((dirs["detect"] / "metrics.json").read_text())
    if not result:  # cached: reload the verdict summary
        m = summary.get("metrics")
        result.update(verdicts=_read_verdicts(report_path), metrics=_metrics(m))
    return PipelineResult(dirs, result["metrics"], result["verdicts"], model_path, report_path,
                          _metrics(summary.get("cv_pooled")))


def _metrics(m):
    return det.Metrics(m["tp"], m["fp"], m["tn"], m["fn"]) if m else None


def _read_verdicts(path):
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    return [det.HostVerdict(r["host"], r["window"], r["verdict"]) for r in rows]


# -- benchmarking ---------------------------------------------------------
BENCH_COLUMNS = ("kernel", "h", "avg_histogram_size", "vocab_size", "runtime_ns")


def bench(partitions: dict, kernels=KINDS, hs=range(0, 6), transparent: bool = True,
          per_snapshot: list | None = None) -> list[dict]:
    """Histogram size, shared vocabulary and kernel update time per (kernel, h).

    ``partitions`` maps a partition name to its ordered events. Only kernel
    updates are timed; graph insertion is replayed untimed.
    """
    rows = []
    for kind in kernels:
        kind = kernel_kind(kind)
        for h in hs:
            vocab: set = set()
            sizes = []
            elapsed = 0
            for part in sorted(partitions):
                g = ProvGraph(EventVocab())
                kern = make_kernel(kind, h, g.vocab, transparent=transparent)
                for ev in partitions[part]:
                    outcome = g.insert_event(ev)
                    t0 = time.perf_counter_ns()
                    kern.apply(g, outcome)
                    elapsed += time.perf_counter_ns() - t0
                sizes.append(len(kern.histogram))
                vocab.update(kern.histogram.bins)
                if per_snapshot is not None:
                    per_snapshot.append({"kernel": kind, "h": h, "partition": part,
                                         "histogram_size": len(kern.histogram),
                                         "cumulative_vocab": len(vocab)})
            rows.append({"kernel": kind, "h": h,
                         "avg_histogram_size": round(sum(sizes) / len(sizes), 3) if sizes else 0.0,
                         "vocab_size": len(vocab), "runtime_ns": elapsed})
    return rows


def write_csv_rows(rows, path, columns, header: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.DictWriter(fh, fieldnames=list(columns))
        w.writeheader()
        w.writerows(rows)


def parse_h_range(spec: str) -> list[int]:
    """``0..5``, ``1,3,5`` or ``3``."""
    s = str(spec).strip()
    m = re.fullmatch(r"(\d+)\.\.(\d+)", s)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        if lo > hi:
            raise ConfigError(f"empty h range {spec!r}")
        return list(range(lo, hi + 1))
    try:
        vals = [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad h range {spec!r}") from None
    if not vals or min(vals) < 0:
        raise ConfigError(f"bad h range {spec!r}")
    return vals


def load_partitions(path, fmt: str = "streamspot", by: str = "graph_id", lenient: bool = False):
    events = []
    vocab = EventVocab()
    for f in iter_event_files(path):
        if f.suffix == ".json" or f.name == "ground_truth.txt":
            continue
        kw = {} if fmt == "canonical" else {"lenient": lenient, "vocab": vocab}
        events.extend(load_events(f, fmt, **kw))
    parts = partition(events, by)
    return {p: sorted(evs, key=lambda e: (e.timestamp, e.seq)) for p, evs in parts.items()}
