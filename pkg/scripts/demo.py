"""Synthetic corpus -> detection report, then a lateral-movement trace."""
import tempfile
from dataclasses import dataclass
from pathlib import Path

from provsketch.authtrace import temporal_traverse
from provsketch.pipeline import PipelineConfig, run_pipeline
from provsketch.synth import SynthSpec, fanout_sessions, synth_generate


@dataclass
class Config:
    runs: int = 20
    h: int = 3
    K: int = 2048
    workdir: str = ""


def main(cfg: Config):
    work = Path(cfg.workdir or tempfile.mkdtemp(prefix="demo-"))
    corpus = work / "synth"
    synth_generate(corpus, 0, SynthSpec(runs=cfg.runs))
    res = run_pipeline(PipelineConfig(input=str(corpus), workdir=str(work / "runs"), h=cfg.h, K=cfg.K,
                                      ground_truth=str(corpus / "ground_truth.txt"), cv=True))
    print(f"report: {res.report_path}")
    print(f"fold 0: {res.metrics}")
    print(f"5-fold pooled: {res.cv_pooled}")
    for v in [v for v in res.verdicts if v.compromised][:5]:
        print(f"  compromised {v.host} first at ts={v.first_anomaly.timestamp}")

    hosts = [f"SysClient{i:04d}" for i in range(300, 316)]
    edges = fanout_sessions("zleazer", "SysClient0201", 1000, hosts, ["SysClient0950"])
    tr = temporal_traverse(edges, "SysClient0201", "zleazer", 1000)
    print(f"trace: {len(tr.flagged_hosts)} hosts, users {sorted(tr.flagged_users)}")


if __name__ == "__main__":
    main(Config())
