"""Medoid-based behavior profiles and anomaly verdicts over sketches.

Training clusters benign sketches with PAM (BUILD + SWAP) under the distance
``1 - sketch_similarity``, picking k by mean silhouette when asked. Each
cluster keeps the mean and standard deviation of its members' distances to
the medoid; a sketch is anomalous when it lies beyond ``mean + d * std`` of
every cluster.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from hashlib import blake2b

import numpy as np

from .sketch import Sketch, similarity_matrix, sketch_distance

log = logging.getLogger(__name__)

MODEL_FORMAT = "provsketch-medoid-model"
MODEL_VERSION = 1
_EPS = 1e-12


class InsufficientSamples(ValueError):
    pass


class StampMismatch(ValueError):
    pass


def distance_matrix(sketches) -> np.ndarray:
    return 1.0 - similarity_matrix(list(sketches))


# -- PAM ------------------------------------------------------------------
def _cost(D, medoids) -> float:
    return float(D[medoids].min(axis=0).sum())


def pam_build(D: np.ndarray, k: int) -> list[int]:
    n = D.shape[0]
    first = int(np.argmin(D.sum(axis=1)))
    medoids = [first]
    nearest = D[first].copy()
    while len(medoids) < k:
        gains = np.maximum(nearest[None, :] - D, 0.0).sum(axis=1)
        gains[medoids] = -1.0
        c = int(np.argmax(gains))  # first max: lowest index on ties
        medoids.append(c)
        nearest = np.minimum(nearest, D[c])
    return medoids


def _swap(D, medoids, max_iter, trace):
    n, k = D.shape[0], len(medoids)
    cost = _cost(D, medoids)
    if trace is not None:
        trace.append(cost)
    for _ in range(max_iter):
        best = (cost, -1, -1)
        is_med = np.zeros(n, dtype=bool)
        is_med[medoids] = True
        for p in range(k):
            others = medoids[:p] + medoids[p + 1:]
            rest = D[others].min(axis=0) if others else np.full(n, np.inf)
            costs = np.minimum(D, rest[None, :]).sum(axis=1)
            costs[is_med] = np.inf
            o = int(np.argmin(costs))
            if costs[o] < best[0] - _EPS:
                best = (float(costs[o]), p, o)
        if best[1] < 0:
            break
        cost, p, o = best
        medoids[p] = o
        if trace is not None:
            trace.append(cost)
    return medoids, cost


def pam_fit(D, k: int, seed: int = 0, restarts: int = 8, max_iter: int = 1000,
            trace: list | None = None):
    """PAM on a precomputed distance matrix.

    BUILD then SWAP, followed by ``restarts`` extra SWAP runs from random
    medoid sets drawn with ``seed``; a restart only wins if strictly cheaper.
    Returns ``(medoids, assignments, cost)``; ``medoids`` are indices into the
    input, ``assignments[j]`` is the position of j's medoid in ``medoids``.
    If ``trace`` is given, the cost after BUILD and after every swap of the
    BUILD run is appended.
    """
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of samples ({n})")
    medoids, cost = _swap(D, pam_build(D, k), max_iter, trace)
    if 1 < k < n:
        rng = np.random.default_rng(seed)
        for _ in range(restarts):
            start = sorted(int(x) for x in rng.choice(n, size=k, replace=False))
            cand, c = _swap(D, start, max_iter, None)
            if c < cost - _EPS:
                medoids, cost = cand, c
    assign = D[medoids].argmin(axis=0)
    return list(medoids), assign, _cost(D, medoids)


# -- silhouette -----------------------------------------------------------
def silhouette_samples(D, assign) -> np.ndarray:
    """Per-point silhouette; singleton clusters and a = b = 0 give 0."""
    D = np.asarray(D, dtype=float)
    assign = np.asarray(assign)
    n = len(assign)
    clusters = np.unique(assign)
    out = np.zeros(n)
    if len(clusters) < 2:
        return out
    for i in range(n):
        own = assign == assign[i]
        size = own.sum()
        if size <= 1:
            continue
        a = D[i, own].sum() / (size - 1)
        b = min(D[i, assign == c].mean() for c in clusters if c != assign[i])
        m = max(a, b)
        out[i] = 0.0 if m == 0 else (b - a) / m
    return out


def silhouette_score(D, assign) -> float:
    return float(silhouette_samples(D, assign).mean())


def select_k(D, k_range=None, seed: int = 0) -> int:
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    if n < 3:
        raise InsufficientSamples("insufficient samples for silhouette")
    if k_range is None:
        k_range = range(2, min(10, n - 1) + 1)
    ks = [k for k in k_range if 2 <= k <= n - 1]
    if not ks:
        raise ValueError(f"empty k range for n={n}")
    best_k, best_s = ks[0], -np.inf
    for k in ks:
        _, assign, _ = pam_fit(D, k, seed)
        s = silhouette_score(D, assign)
        log.debug("k=%d silhouette=%.6f", k, s)
        if s > best_s + _EPS:
            best_k, best_s = k, s
    return best_k


# -- model ----------------------------------------------------------------
@dataclass
class ClusterStats:
    medoid: Sketch
    mu: float
    sigma: float
    threshold: float
    size: int
    brittle: bool = False


@dataclass
class MedoidModel:
    K: int
    seed: int
    kernel: str
    h: int
    d: float
    clusters: list[ClusterStats]
    config_hash: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.clusters)

    @property
    def medoids(self) -> list[Sketch]:
        return [c.medoid for c in self.clusters]

    def stamp(self) -> dict:
        return {"K": self.K, "seed": self.seed, "kernel": self.kernel, "h": self.h}

    def to_json(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "stamp": self.stamp(),
            "config_hash": self.config_hash,
            "d": self.d,
            "k": self.k,
            "clusters": [
                {"mu": c.mu, "sigma": c.sigma, "threshold": c.threshold, "size": c.size,
                 "brittle": c.brittle,
                 "medoid": {"labels": [int(x) for x in c.medoid.labels],
                            "hashes": [float(x) for x in c.medoid.hashes],
                            "meta": c.medoid.meta}}
                for c in self.clusters
            ],
            "extra": self.extra,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, sort_keys=True, indent=1)
            fh.write("\n")

    @classmethod
    def from_json(cls, d) -> "MedoidModel":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError("not a medoid model file")
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')}")
        st = d["stamp"]
        clusters = []
        for c in d["clusters"]:
            m = c["medoid"]
            sk = Sketch(st["K"], st["seed"], np.asarray(m["labels"], dtype=np.uint64),
                        np.asarray(m["hashes"], dtype=np.float64), m.get("meta", {}))
            clusters.append(ClusterStats(sk, c["mu"], c["sigma"], c["threshold"], c["size"],
                                         c.get("brittle", False)))
        return cls(st["K"], st["seed"], st["kernel"], st["h"], d["d"], clusters,
                   d.get("config_hash", ""), d.get("extra", {}))

    @classmethod
    def load(cls, path) -> "MedoidModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def fit_thresholds(D, medoids, assign, d: float = 2.0):
    """Per-cluster (mu, sigma, threshold, size) over members' distances to their medoid."""
    D = np.asarray(D, dtype=float)
    out = []
    for p, m in enumerate(medoids):
        members = np.flatnonzero(np.asarray(assign) == p)
        dist = D[m, members]
        mu = float(dist.mean())
        sigma = float(dist.std())
        out.append((mu, sigma, mu + d * sigma, len(members)))
    return out


def train(sketches, k="auto", d: float = 2.0, kernel: str = "", h: int = 0,
          k_range=None, config_hash: str = "") -> MedoidModel:
    sketches = list(sketches)
    if not sketches:
        raise InsufficientSamples("no training sketches")
    D = distance_matrix(sketches)
    seed = sketches[0].seed
    if k == "auto":
        k = select_k(D, k_range, seed)
    k = int(k)
    medoids, assign, cost = pam_fit(D, k, seed)
    clusters = []
    for m, (mu, sigma, thr, size) in zip(medoids, fit_thresholds(D, medoids, assign, d)):
        brittle = size == 1
        if brittle:
            log.warning("cluster with medoid %d is a singleton; its threshold is %.3g", m, thr)
        clusters.append(ClusterStats(sketches[m].copy(), mu, sigma, thr, size, brittle))
    s0 = sketches[0]
    return MedoidModel(s0.K, s0.seed, kernel, h, d, clusters, config_hash,
                       {"cost": cost, "n_train": len(sketches)})


@dataclass
class AnomalyReport:
    partition: str
    snapshot_id: int
    timestamp: int
    host: str
    user: str
    nearest_medoid: int
    distance: float
    threshold: float
    verdict: str

    @property
    def is_anomaly(self) -> bool:
        return self.verdict == "anomaly"


def check_stamp(model: MedoidModel, sk: Sketch, kernel: str | None = None, h: int | None = None):
    for name, mine, theirs in (("K", model.K, sk.K), ("seed", model.seed, sk.seed),
                               ("kernel", model.kernel, kernel), ("h", model.h, h)):
        if theirs is not None and mine != theirs:
            raise StampMismatch(f"{name} mismatch: model has {mine!r}, sketch has {theirs!r}")


def classify(model: MedoidModel, sk: Sketch, kernel: str | None = None, h: int | None = None,
             d: float | None = None) -> AnomalyReport:
    check_stamp(model, sk, kernel, h)
    dists = np.array([sketch_distance(c.medoid, sk) for c in model.clusters])
    if d is None:
        thr = np.array([c.threshold for c in model.clusters])
    else:
        thr = np.array([c.mu + d * c.sigma for c in model.clusters])
    nearest = int(np.argmin(dists))
    anomaly = bool(np.all(dists > thr))
    m = sk.meta
    return AnomalyReport(str(m.get("partition", "")), int(m.get("snapshot_id", 0)),
                         int(m.get("timestamp", 0)), str(m.get("host", "")), str(m.get("user", "")),
                         nearest, float(dists[nearest]), float(thr[nearest]),
                         "anomaly" if anomaly else "normal")


# -- host-level evaluation ------------------------------------------------
@dataclass
class HostVerdict:
    host: str
    window: str
    verdict: str
    first_anomaly: AnomalyReport | None = None
    snapshots: int = 0

    @property
    def compromised(self) -> bool:
        return self.verdict == "compromised"


def host_verdict(reports, host: str = "", window: str = "") -> HostVerdict:
    reports = sorted(reports, key=lambda r: (r.timestamp, r.snapshot_id))
    first = next((r for r in reports if r.is_anomaly), None)
    return HostVerdict(host or (reports[0].host if reports else ""), window,
                       "compromised" if first else "clean", first, len(reports))


def host_verdicts(reports, key=lambda r: (r.host or r.partition, "")) -> list[HostVerdict]:
    groups: dict[tuple, list] = {}
    for r in reports:
        groups.setdefault(key(r), []).append(r)
    return [host_verdict(rs, host, window) for (host, window), rs in sorted(groups.items())]


def read_ground_truth(path) -> set[tuple[str, str]]:
    """Lines ``host[,window]``; a bare host matches every window."""
    out = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            host, _, window = line.partition(",")
            out.add((host.strip(), window.strip()))
    return out


def is_positive(truth: set, host: str, window: str = "") -> bool:
    return (host, window) in truth or (host, "") in truth


@dataclass
class Metrics:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def accuracy(self) -> float:
        n = self.tp + self.fp + self.tn + self.fn
        return (self.tp + self.tn) / n if n else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def as_dict(self) -> dict:
        d = asdict(self)
        d.update(precision=self.precision, recall=self.recall, accuracy=self.accuracy, f1=self.f1)
        return d


def confusion(verdicts, truth: set) -> Metrics:
    tp = fp = tn = fn = 0
    for v in verdicts:
        pos = is_positive(truth, v.host, v.window)
        if v.compromised and pos:
            tp += 1
        elif v.compromised:
            fp += 1
        elif pos:
            fn += 1
        else:
            tn += 1
    return Metrics(tp, fp, tn, fn)


def fold_of(partition: str, folds: int = 5) -> int:
    digest = blake2b(partition.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % folds
