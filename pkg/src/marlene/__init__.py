"""Online multi-label learning with transfer across labels, label pairs and
source streams (BR-MARLENE and BRPW-MARLENE), plus the stream generator,
metrics and prequential runner used to evaluate them."""

from .br import BRMarlene, load_checkpoint, save_checkpoint
from .brpw import BRPWMarlene
from .drift import DriftConfig, DriftDetector, DriftSignal
from .experiment import ExperimentConfig, run_experiment
from .learners import HoeffdingTree, LearnerConfig, NaiveBayes, make_learner
from .metrics import ConfusionCounts, WindowEvaluator, gmean
from .stream import (
    TARGET,
    DatasetMeta,
    Instance,
    StreamId,
    dataset_stats,
    interleave,
    load_dataset,
    make_instance,
    parse_meka_arff,
)
from .synth import SynthConfig, synth_generate

__version__ = "0.1.0"

__all__ = [
    "BRMarlene",
    "BRPWMarlene",
    "ConfusionCounts",
    "DatasetMeta",
    "DriftConfig",
    "DriftDetector",
    "DriftSignal",
    "ExperimentConfig",
    "HoeffdingTree",
    "Instance",
    "LearnerConfig",
    "NaiveBayes",
    "StreamId",
    "SynthConfig",
    "TARGET",
    "WindowEvaluator",
    "dataset_stats",
    "gmean",
    "interleave",
    "load_checkpoint",
    "load_dataset",
    "make_instance",
    "make_learner",
    "parse_meka_arff",
    "run_experiment",
    "save_checkpoint",
    "synth_generate",
]
