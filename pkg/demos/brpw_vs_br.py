# BR and BRPW on the same synthetic stream; windowed metrics and training time

from marlene.experiment import BR, BRPW, ExperimentConfig, fmt_summary, run_experiment
from marlene.synth import SynthConfig

synth = SynthConfig(per_gaussian_size=200, drift="IA", n_labels=4)
for algorithm in (BR, BRPW):
    result = run_experiment(ExperimentConfig(synth=synth, algorithm=algorithm, seeds=(0, 1)))
    train = sum(r.timing["train"] for r in result.runs) / len(result.runs)
    print(f"{algorithm:5s} {fmt_summary(result)}  train={train:.2f}s")
