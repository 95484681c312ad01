# Early per-label G-Mean on SS/50 with and without a similar source

import numpy as np

from marlene.experiment import ExperimentConfig, run_seed
from marlene.synth import SIMILAR, SynthConfig

seeds = range(5)
early = {}
for label, sources in (("similar source", (SIMILAR,)), ("no source", ())):
    curves = []
    for seed in seeds:
        synth = SynthConfig(per_gaussian_size=50, drift="SS", sources=sources)
        # proportional interleaving spreads the whole source over the target
        res, _ = run_seed(ExperimentConfig(synth=synth, policy="proportional"), seed)
        curves.append(res.label_curves[:100].mean())
    early[label] = np.mean(curves)
    print(f"{label:15s} mean per-label G-Mean over the first 100 examples: {early[label]:.3f}")

print(f"gain {early['similar source'] - early['no source']:+.3f}")
