"""Fixed-size histogram sketches via consistent weighted sampling.

Each slot ``k`` of a sketch holds the consistent weighted sample of the
histogram for that slot: the argmin label and its hash value. Per-(label,
slot) randomness is regenerated on demand from a counter-based generator keyed
on ``(seed, label)``, so nothing proportional to ``K * |H|`` is stored.

Hashing follows improved CWS: the log-weight is quantized with
``t = floor(ln w / gamma + beta)`` before ``y = exp(gamma * (t - beta))``.
Two sketches agree on a slot when both the label and the hash agree, which
happens with probability equal to the normalized min-max similarity of the
two histograms.
"""
from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .kernels.labels import LabelHistogram

EMPTY_LABEL = 0
MAGIC = b"PSKT"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHIQ8sH")


class SketchMismatch(ValueError):
    pass


# -- randomness -----------------------------------------------------------
@lru_cache(maxsize=2048)
def cws_params(seed: int, label: int, K: int):
    """(gamma, beta, c) arrays of length K for one label.

    Draws for slot k occupy Philox outputs 5k..5k+4, so a slot's parameters do
    not depend on K. Gamma(2,1) is the sum of two unit exponentials.
    """
    bitgen = np.random.Philox(key=np.array([seed & 0xFFFFFFFFFFFFFFFF, label], dtype=np.uint64))
    u = np.random.Generator(bitgen).random((K, 5))
    gamma = -np.log1p(-u[:, 0]) - np.log1p(-u[:, 1])
    beta = u[:, 2]
    c = -np.log1p(-u[:, 3]) - np.log1p(-u[:, 4])
    for arr in (gamma, beta, c):
        arr.flags.writeable = False
    return gamma, beta, c


def cws_hash(weight, gamma, beta, c, quantized: bool = True):
    """Hash value ``a = c / (y * exp(gamma))`` of a label with the given weight.

    ``quantized=False`` gives the unquantized form ``y = exp(ln w - gamma*beta)``,
    which is strictly decreasing in the weight but does not give consistent
    samples; sketches always use the quantized form.
    """
    if np.any(np.asarray(weight) <= 0):
        raise ValueError("weight must be positive")
    lw = np.log(weight)
    if quantized:
        t = np.floor(lw / gamma + beta)
        y = np.exp(gamma * (t - beta))
    else:
        y = np.exp(lw - gamma * beta)
    return c / (y * np.exp(gamma))


def _row(seed: int, label: int, K: int, weight) -> np.ndarray:
    gamma, beta, c = cws_params(seed, label, K)
    return cws_hash(float(weight), gamma, beta, c)


# -- sketches -------------------------------------------------------------
@dataclass
class Sketch:
    K: int
    seed: int
    labels: np.ndarray
    hashes: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def is_empty(self) -> bool:
        return bool(np.all(self.labels == EMPTY_LABEL))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Sketch):
            return NotImplemented
        return (self.K == other.K and self.seed == other.seed
                and np.array_equal(self.labels, other.labels)
                and np.array_equal(self.hashes, other.hashes))

    def copy(self) -> "Sketch":
        return Sketch(self.K, self.seed, self.labels.copy(), self.hashes.copy(), dict(self.meta))


def empty_sketch(K: int, seed: int) -> Sketch:
    return Sketch(K, seed, np.full(K, EMPTY_LABEL, dtype=np.uint64), np.full(K, np.inf))


def _weights(hist) -> dict:
    if isinstance(hist, LabelHistogram):
        return hist.bins
    return {int(k): v for k, v in dict(hist).items() if v}


def sketch_from_histogram(hist, K: int, seed: int, meta: dict | None = None) -> Sketch:
    if K < 1:
        raise ValueError("K must be >= 1")
    bins = _weights(hist)
    if not bins:
        sk = empty_sketch(K, seed)
        sk.meta = dict(meta or {})
        return sk
    labels = sorted(bins)  # argmin keeps the first, i.e. smallest id, on ties
    A = np.vstack([_row(seed, lab, K, bins[lab]) for lab in labels])
    idx = A.argmin(axis=0)
    lab_arr = np.asarray(labels, dtype=np.uint64)
    return Sketch(K, seed, lab_arr[idx], A[idx, np.arange(K)], dict(meta or {}))


def sketch_update(sk: Sketch, delta: dict, hist) -> Sketch:
    """Bring a sketch up to date with a histogram that already includes ``delta``.

    Increments take the O(K) path per label. A decrement of a label that
    occupies a slot forces a rescan of the affected slots.
    """
    bins = _weights(hist)
    for lab, d in delta.items():
        if bins.get(lab, 0) < 0 or bins.get(lab, 0) - d < 0:
            raise ValueError(f"delta for label {lab:#x} inconsistent with histogram")
    if not delta:
        return sk.copy()
    if not bins:
        out = empty_sketch(sk.K, sk.seed)
        out.meta = dict(sk.meta)
        return out
    if sk.is_empty:
        return sketch_from_histogram(bins, sk.K, sk.seed, sk.meta)

    K, seed = sk.K, sk.seed
    labels = sk.labels.copy()
    hashes = sk.hashes.copy()
    dirty = np.zeros(K, dtype=bool)
    for lab, d in delta.items():
        if d < 0:
            dirty |= labels == np.uint64(lab)
    for lab in sorted(delta):
        if delta[lab] <= 0:
            continue
        row = _row(seed, lab, K, bins[lab])
        ulab = np.uint64(lab)
        better = (row < hashes) | ((row == hashes) & (ulab < labels)) | (labels == ulab)
        better &= ~dirty
        labels[better] = ulab
        hashes[better] = row[better]
    if dirty.any():
        cols = np.flatnonzero(dirty)
        cand = sorted(bins)
        A = np.vstack([_row(seed, lab, K, bins[lab]) for lab in cand])[:, cols]
        idx = A.argmin(axis=0)
        labels[cols] = np.asarray(cand, dtype=np.uint64)[idx]
        hashes[cols] = A[idx, np.arange(len(cols))]
    return Sketch(K, seed, labels, hashes, dict(sk.meta))


def sketch_similarity(s1: Sketch, s2: Sketch) -> float:
    """Fraction of slots holding the same consistent sample (label and hash)."""
    if s1.K != s2.K:
        raise SketchMismatch(f"sketch sizes differ: {s1.K} vs {s2.K}")
    if s1.seed != s2.seed:
        raise SketchMismatch(f"sketch seeds differ: {s1.seed} vs {s2.seed}")
    same = (s1.labels == s2.labels) & (s1.hashes == s2.hashes)
    return float(same.mean())


def sketch_distance(s1: Sketch, s2: Sketch) -> float:
    return 1.0 - sketch_similarity(s1, s2)


def similarity_matrix(sketches) -> np.ndarray:
    n = len(sketches)
    if n == 0:
        return np.zeros((0, 0))
    for s in sketches[1:]:
        if s.K != sketches[0].K or s.seed != sketches[0].seed:
            raise SketchMismatch("all sketches must share K and seed")
    L = np.vstack([s.labels for s in sketches])
    H = np.vstack([s.hashes for s in sketches])
    S = np.empty((n, n))
    for i in range(n):
        S[i] = ((L == L[i]) & (H == H[i])).mean(axis=1)
    return S


# -- exact similarity -----------------------------------------------------
def _as_vector(x):
    if isinstance(x, LabelHistogram):
        return x.bins
    if isinstance(x, dict):
        return x
    if sp.issparse(x):
        return np.asarray(x.todense()).ravel()
    return np.asarray(x, dtype=float).ravel()


def nmm_similarity(a, b) -> float:
    """Normalized min-max similarity: sum of minima over sum of maxima.

    Two all-zero inputs are identical (1.0); an all-zero input against a
    non-zero one gives 0.0.
    """
    va, vb = _as_vector(a), _as_vector(b)
    if isinstance(va, dict) != isinstance(vb, dict):
        raise TypeError("compare histograms with histograms and vectors with vectors")
    if isinstance(va, dict):
        keys = set(va) | set(vb)
        lo = hi = 0.0
        for k in keys:
            x, y = va.get(k, 0), vb.get(k, 0)
            if x < 0 or y < 0:
                raise ValueError("inputs must be non-negative")
            lo += min(x, y)
            hi += max(x, y)
    else:
        if va.shape != vb.shape:
            raise ValueError("vectors must share a vocabulary")
        if (va < 0).any() or (vb < 0).any():
            raise ValueError("inputs must be non-negative")
        lo = float(np.minimum(va, vb).sum())
        hi = float(np.maximum(va, vb).sum())
    if hi == 0:
        return 1.0
    return lo / hi


# -- static featurization -------------------------------------------------
def sparse_vectorize(hists):
    """Shared sorted vocabulary and one sparse row per histogram."""
    vocab = sorted(set().union(*(_weights(h).keys() for h in hists))) if hists else []
    col = {lab: j for j, lab in enumerate(vocab)}
    rows, cols, vals = [], [], []
    for i, h in enumerate(hists):
        for lab, n in _weights(h).items():
            rows.append(i)
            cols.append(col[lab])
            vals.append(n)
    mat = sp.csr_matrix((np.asarray(vals, dtype=float), (rows, cols)), shape=(len(hists), len(vocab)))
    return np.asarray(vocab, dtype=np.uint64), mat


def write_sparse_csv(path, vocab, mat, row_meta: list[dict] | None = None,
                     header_comment: str | None = None) -> None:
    meta_keys = list(row_meta[0].keys()) if row_meta else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(meta_keys + [str(int(v)) for v in vocab])
        dense = mat.toarray()
        for i in range(dense.shape[0]):
            vals = [int(x) if float(x).is_integer() else x for x in dense[i]]
            w.writerow([row_meta[i][k] for k in meta_keys] + vals if row_meta else vals)


# -- persistence ----------------------------------------------------------
def write_sketch(sk: Sketch, path, kernel: str = "", h: int = 0) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, sk.K, sk.seed & 0xFFFFFFFFFFFFFFFF,
                              kernel.encode("ascii")[:8].ljust(8, b"\0"), h))
        rec = np.empty(sk.K, dtype=[("label", "<u8"), ("hash", "<f8")])
        rec["label"] = sk.labels
        rec["hash"] = sk.hashes
        fh.write(rec.tobytes())
        meta = json.dumps(sk.meta, sort_keys=True).encode("utf-8")
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)


def read_sketch(path) -> tuple[Sketch, dict]:
    """Returns the sketch and its header fields (kernel, h, version)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, K, seed, kernel, h = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a sketch file")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported sketch format version {version}")
    off = _HEADER.size
    rec = np.frombuffer(raw, dtype=[("label", "<u8"), ("hash", "<f8")], count=K, offset=off)
    off += rec.nbytes
    (mlen,) = struct.unpack_from("<I", raw, off)
    meta = json.loads(raw[off + 4: off + 4 + mlen].decode("utf-8"))
    sk = Sketch(K, seed, rec["label"].astype(np.uint64), rec["hash"].astype(np.float64), meta)
    header = {"kernel": kernel.rstrip(b"\0").decode("ascii"), "h": h, "version": version}
    return sk, header


META_COLUMNS = ("partition", "snapshot_id", "timestamp", "host", "user")


def write_sketch_csv(sketches, path, header_comment: str | None = None) -> None:
    if not sketches:
        return
    K = sketches[0].K
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(list(META_COLUMNS) + [f"label_{k}" for k in range(K)] + [f"hash_{k}" for k in range(K)])
        for s in sketches:
            w.writerow([s.meta.get(c, "") for c in META_COLUMNS]
                       + [int(x) for x in s.labels] + [repr(float(x)) for x in s.hashes])


def binomial_band(s: float, K: int, sigmas: float = 3.0) -> float:
    return sigmas * math.sqrt(max(s * (1.0 - s), 0.0) / K)
