"""Histogram size, vocabulary and runtime per kernel as the depth h grows."""
import argparse
import tempfile
from dataclasses import dataclass
from pathlib import Path

from provsketch.pipeline import bench, load_partitions, parse_h_range, write_csv_rows, BENCH_COLUMNS
from provsketch.synth import SynthSpec, synth_generate


@dataclass
class Config:
    hs: str = "0..5"
    runs: int = 3
    kernels: tuple = ("prov", "wl", "unicorn")
    seed: int = 0
    out: str = "results/h_study.csv"


def main(cfg: Config):
    corpus = Path(tempfile.mkdtemp(prefix="hstudy-"))
    synth_generate(corpus, cfg.seed, SynthSpec(runs=cfg.runs))
    rows = bench(load_partitions(corpus), kernels=cfg.kernels, hs=parse_h_range(cfg.hs))
    Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
    write_csv_rows(rows, cfg.out, BENCH_COLUMNS)
    for r in rows:
        print(f"{r['kernel']:8s} h={r['h']} avg_hist={r['avg_histogram_size']:>9} "
              f"vocab={r['vocab_size']:>7} {r['runtime_ns'] / 1e6:9.1f} ms")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--h", dest="hs", default=Config.hs)
    ap.add_argument("--runs", type=int, default=Config.runs)
    ap.add_argument("--out", default=Config.out)
    a = ap.parse_args()
    main(Config(hs=a.hs, runs=a.runs, out=a.out))
