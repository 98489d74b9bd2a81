"""Label identities and the label histogram shared by all kernels.

Label ids are 64-bit hashes of a serialization built from type *names*, never
from interned integer ids, so histograms built in different runs (with
vocabularies filled in a different order) stay comparable.
"""
from __future__ import annotations

import csv
import json
import struct
from functools import lru_cache
from hashlib import blake2b

EMPTY = 0


def h64(data: bytes) -> int:
    v = int.from_bytes(blake2b(data, digest_size=8).digest(), "little")
    return v or 1  # 0 is reserved for "no label"


@lru_cache(maxsize=None)
def name_key(name: str) -> int:
    return h64(b"E" + name.encode("utf-8"))


def prov_label_id(layers) -> int:
    """Id of a provenance label given its layers, outermost (nearest edge) first.

    Each layer is an iterable of type names; the last layer holds entity types.
    """
    payload = json.dumps([sorted(layer) for layer in layers], separators=(",", ":"))
    return h64(b"P" + payload.encode("utf-8"))


def node_label_id(type_name: str) -> int:
    """Depth-0 label, shared by every kernel."""
    return prov_label_id([[type_name]])


def wl_label_id(depth: int, prev: int, pairs) -> int:
    """Id of a WL refinement; ``pairs`` is an ordered sequence of (event name, neighbor label)."""
    words = [depth, prev]
    for ename, lab in pairs:
        words.append(name_key(ename))
        words.append(lab)
    return h64(b"W" + struct.pack(f"<{len(words)}Q", *words))


class LabelHistogram:
    """Frequency map over label ids; zero bins are never stored."""

    def __init__(self):
        self.bins: dict[int, int] = {}
        self.depth_of: dict[int, int] = {}
        self.total = 0

    def add(self, label: int, depth: int, delta: int = 1) -> None:
        n = self.bins.get(label, 0) + delta
        if n < 0:
            raise RuntimeError(f"histogram bin {label:#x} would go negative")
        if n == 0:
            del self.bins[label]
            self.depth_of.pop(label, None)
        else:
            self.bins[label] = n
            self.depth_of[label] = depth
        self.total += delta

    def apply(self, delta: dict, depths: dict | None = None) -> None:
        for label, d in delta.items():
            self.add(label, (depths or self.depth_of).get(label, -1), d)

    def __getitem__(self, label) -> int:
        return self.bins.get(label, 0)

    def __contains__(self, label) -> bool:
        return label in self.bins

    def __len__(self) -> int:
        return len(self.bins)

    def __iter__(self):
        return iter(self.bins)

    def items(self):
        return self.bins.items()

    def __eq__(self, other) -> bool:
        if isinstance(other, LabelHistogram):
            return self.bins == other.bins
        if isinstance(other, dict):
            return self.bins == other
        return NotImplemented

    def __repr__(self) -> str:
        return f"LabelHistogram({len(self.bins)} bins, total={self.total})"

    def copy(self) -> "LabelHistogram":
        h = LabelHistogram()
        h.bins = dict(self.bins)
        h.depth_of = dict(self.depth_of)
        h.total = self.total
        return h

    def distinct_per_depth(self, h: int) -> list[int]:
        counts = [0] * (h + 1)
        for label in self.bins:
            d = self.depth_of.get(label, -1)
            if 0 <= d <= h:
                counts[d] += 1
        return counts

    def totals_per_depth(self, h: int) -> list[int]:
        counts = [0] * (h + 1)
        for label, n in self.bins.items():
            d = self.depth_of.get(label, -1)
            if 0 <= d <= h:
                counts[d] += n
        return counts

    @classmethod
    def from_counts(cls, counts: dict, depth: int = -1) -> "LabelHistogram":
        h = cls()
        for label, n in counts.items():
            if n:
                h.add(label, depth, n)
        return h

    def to_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(["canonical_id", "depth", "count"])
            for label in sorted(self.bins):
                w.writerow([label, self.depth_of.get(label, -1), self.bins[label]])

    @classmethod
    def read_csv(cls, path) -> "LabelHistogram":
        h = cls()
        with open(path, newline="", encoding="utf-8") as fh:
            rows = csv.DictReader(line for line in fh if not line.startswith("#"))
            for row in rows:
                h.add(int(row["canonical_id"]), int(row["depth"]), int(row["count"]))
        return h


class LabelCodec:
    """Memoizes label ids for a kernel; optionally checks for hash collisions."""

    def __init__(self, vocab, debug: bool = False):
        self.vocab = vocab
        self.debug = debug
        self._prov: dict[tuple, int] = {}
        self._names: dict[tuple[int, int], tuple[str, ...]] = {}
        self._seen: dict[int, object] = {}

    def _mask_names(self, mask: int, entity: bool) -> tuple[str, ...]:
        key = (mask, entity)
        names = self._names.get(key)
        if names is None:
            voc = self.vocab.entities if entity else self.vocab.events
            out = []
            i = 0
            m = mask
            while m:
                if m & 1:
                    out.append(voc.name(i))
                m >>= 1
                i += 1
            names = tuple(sorted(out))
            self._names[key] = names
        return names

    def prov(self, layers: tuple) -> int:
        """Id for bitmask layers ordered (tau^i, ..., tau^1, tau^0)."""
        lid = self._prov.get(layers)
        if lid is None:
            last = len(layers) - 1
            named = [self._mask_names(m, entity=(j == last)) for j, m in enumerate(layers)]
            lid = prov_label_id(named)
            self._prov[layers] = lid
            if self.debug:
                self.check(lid, ("P", tuple(named)))
        return lid

    def check(self, lid: int, serial) -> None:
        prev = self._seen.setdefault(lid, serial)
        if prev != serial:
            raise RuntimeError(f"label hash collision on {lid:#x}: {prev!r} vs {serial!r}")
