from .labels import EMPTY, LabelHistogram, node_label_id, prov_label_id, wl_label_id
from .prov import KernelDesync, ProvKernel, backward_walks, prov_recompute_full
from .wl import UnicornKernel, WLKernel, wl_recompute_full

KINDS = ("prov", "wl", "unicorn")
_ALIASES = {"prov": "prov", "wl": "wl", "wlsubtree": "wl", "unicorn": "unicorn"}


def kernel_kind(name: str) -> str:
    try:
        return _ALIASES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; expected one of {KINDS}") from None


def make_kernel(kind: str, h: int, vocab, transparent: bool = True):
    kind = kernel_kind(kind)
    if kind == "prov":
        return ProvKernel(h, vocab, transparent=transparent)
    if kind == "wl":
        return WLKernel(h, vocab, transparent=transparent)
    return UnicornKernel(h, vocab, transparent=transparent)


def recompute_full(kind: str, g, h: int, transparent: bool = True) -> LabelHistogram:
    kind = kernel_kind(kind)
    if kind == "prov":
        return prov_recompute_full(g, h, transparent)
    return wl_recompute_full(g, h, ordered=(kind == "unicorn"), transparent=transparent)


def distinct_label_counts(state) -> list[int]:
    """Distinct histogram bins per depth 0..h."""
    return state.histogram.distinct_per_depth(state.h)


__all__ = [
    "EMPTY", "KINDS", "KernelDesync", "LabelHistogram", "ProvKernel", "UnicornKernel",
    "WLKernel", "backward_walks", "distinct_label_counts", "kernel_kind", "make_kernel",
    "node_label_id", "prov_label_id", "prov_recompute_full", "recompute_full",
    "wl_label_id", "wl_recompute_full",
]
