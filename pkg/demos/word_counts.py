"""Brute-force check of the bound against finite-horizon word counts.

(1/N) log2 |W_N| decreases towards the counting entropy of the labelled
graph, and every term lies above log2 of the spectral radius of R.
"""

import math

from inventro.config import parse_config, preset
from inventro.oracle import count_words, growth_estimate
from inventro.pipeline import run_pipeline

configs = {
    "linear2d-coarse": preset("linear2d-coarse"),
    # a 10x20 grid: the bound and the counts no longer coincide
    "linear2d-10x20": parse_config("system = linear2d\neta_s = 0.2\neta_i = 0.1\n"),
}
for name, cfg in configs.items():
    report = run_pipeline(cfg, write=False)
    counts = [count_words(report.graph, n, max_nodes=report.cells) for n in range(1, 13)]
    _, seq = growth_estimate(counts)
    print(f"{name}: bound = {report.bound:.6f}")
    for n, (c, s) in enumerate(zip(counts, seq), start=1):
        print(f"  N={n:>2} |W_N|={c:>8} (1/N)log2|W_N|={s:.6f}")
    print(f"  log2|A| = {math.log2(report.partition_size):.6f}")
