# Hand-written test-then-train loop over a synthetic stream with one similar source

from marlene import BRMarlene
from marlene.metrics import WindowEvaluator, window_length
from marlene.stream import interleave
from marlene.synth import SIMILAR, SynthConfig, synth_generate

# label 1 drifts abruptly at the midpoint; source kept short for a quick run
config = SynthConfig(per_gaussian_size=500, drift="AS", sources=(SIMILAR,),
                     source_per_gaussian_size=500, seed=1)
data = synth_generate(config)

model = BRMarlene(seed=1)
model.register_stream(data.target[0].stream, config.n_labels, n_features=2)
evaluator = WindowEvaluator(config.n_labels, window_length(len(data.target)))

for stream, inst in interleave(data.target, data.sources, "round-robin", seed=1):
    if stream.is_target:
        _, y_hat = model.predict(inst.x)  # test first
        snap = evaluator.step(y_hat, inst.y)
        if inst.t % 500 == 499:
            print(f"step {inst.t + 1:5d}  macro-G-Mean {snap.macro_gmean:.3f}  "
                  f"members {len(model.members):2d}  ASWR {model.aswr():.3f}")
    model.observe((stream, inst))  # then train

print("drift events (stream, label, step):", [(str(d.stream), d.unit, d.step) for d in model.drift_log])
