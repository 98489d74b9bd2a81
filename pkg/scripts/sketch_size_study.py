"""How sketch size K trades estimation error against detection quality.

For each K: mean |sketch similarity - exact nmm| over random histogram pairs
from the synthetic corpus, plus pooled cross-validated precision/recall.
"""
import argparse
import csv
import random
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from provsketch.pipeline import PipelineConfig, run_pipeline
from provsketch.kernels import LabelHistogram
from provsketch.sketch import nmm_similarity, sketch_from_histogram, sketch_similarity
from provsketch.synth import SynthSpec, synth_generate


@dataclass
class Config:
    sizes: list = field(default_factory=lambda: [16, 64, 256, 1024, 2048])
    runs: int = 20
    h: int = 3
    pairs: int = 200
    seed: int = 0
    out: str = "results/sketch_size.csv"


def main(cfg: Config):
    work = Path(tempfile.mkdtemp(prefix="ksweep-"))
    corpus = work / "synth"
    synth_generate(corpus, cfg.seed, SynthSpec(runs=cfg.runs))
    rows = []
    hists = None
    for K in cfg.sizes:
        res = run_pipeline(PipelineConfig(input=str(corpus), workdir=str(work / "runs"), h=cfg.h, K=K,
                                          seed=cfg.seed, ground_truth=str(corpus / "ground_truth.txt"),
                                          cv=True))
        if hists is None:
            hists = [LabelHistogram.read_csv(p) for p in sorted((res.dirs["featurize"] / "hist").glob("*.csv"))]
            rng = random.Random(cfg.seed)
            pairs = [tuple(rng.sample(range(len(hists)), 2)) for _ in range(cfg.pairs)]
        errs = []
        for i, j in pairs:
            exact = nmm_similarity(hists[i], hists[j])
            est = sketch_similarity(sketch_from_histogram(hists[i], K, cfg.seed),
                                    sketch_from_histogram(hists[j], K, cfg.seed))
            errs.append(abs(est - exact))
        m = res.cv_pooled
        rows.append({"K": K, "mean_abs_err": round(float(np.mean(errs)), 5),
                     "max_abs_err": round(float(np.max(errs)), 5),
                     "precision": round(m.precision, 4), "recall": round(m.recall, 4)})
        print(rows[-1])
    Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
    with open(cfg.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=lambda s: [int(x) for x in s.split(",")], default=Config().sizes)
    ap.add_argument("--runs", type=int, default=Config.runs)
    ap.add_argument("--out", default=Config.out)
    a = ap.parse_args()
    main(Config(sizes=a.sizes, runs=a.runs, out=a.out))
