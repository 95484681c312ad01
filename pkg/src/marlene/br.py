"""BR-MARLENE: binary-relevance sub-classifiers shared across labels and streams.

Every label of every registered stream owns a lineage of sub-classifiers; a
new generation is spawned when the lineage's drift detector fires.  All
members vote on every target label, each with its own per-label weight, so
knowledge flows from source streams and from other labels of the target.

Per event the ensemble

1. takes every member's raw prediction (before any training on the event),
2. feeds the newest member of each (stream, label) lineage's hard prediction
   to that lineage's drift detector and spawns on drift (a target drift also
   wipes that label's indicators on all members),
3. trains the newest member of each lineage ``k ~ Poisson(rate)`` times,
4. on target events, updates confusion counts and SC/SW of every
   (member, target label) cell from the predictions of step 1.
"""

from __future__ import annotations

import pickle
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Hashable, NamedTuple

import numpy as np

from .drift import DriftConfig, DriftDetector, DriftSignal
from .learners import BinaryModel, LearnerConfig, make_learner
from .stream import TARGET, Instance, StreamId
from .weighting import IndicatorTable, LabelIndicators, poisson_rate

CHECKPOINT_FORMAT = "marlene-ensemble"
CHECKPOINT_VERSION = 1


class NotRegisteredError(RuntimeError):
    """Prediction requested before any target example was observed."""


@dataclass(frozen=True)
class Origin:
    """Where a sub-classifier comes from: stream, label (or label pair), generation."""

    stream: StreamId
    unit: Hashable
    generation: int


class DriftEvent(NamedTuple):
    """A spawn: ensemble event index, lineage, and the step within its stream."""

    event: int
    stream: StreamId
    unit: Hashable
    step: int


class SubClassifier:
    """A base model plus the class counts of its own training examples."""

    __slots__ = ("model", "origin", "train_counts", "row")

    def __init__(self, model: BinaryModel, origin: Origin, row: int):
        self.model = model
        self.origin = origin
        self.train_counts = np.zeros(2)  # [negatives, positives]
        self.row = row

    @property
    def train_n_neg(self) -> float:
        return float(self.train_counts[0])

    @property
    def train_n_pos(self) -> float:
        return float(self.train_counts[1])

    def __repr__(self) -> str:
        o = self.origin
        return f"SubClassifier({o.stream}, {o.unit}, gen={o.generation})"


class LineageEnsemble:
    """Members organised in per-(stream, unit) lineages with drift-driven growth.

    Subclasses define what a unit is (a label, an ordered label pair), the
    model input and target for a unit, and how raw predictions map onto the
    target columns of the indicator table.
    """

    def __init__(
        self,
        learner: LearnerConfig | Callable[..., BinaryModel] | None = None,
        drift: DriftConfig | None = None,
        seed: int | np.random.SeedSequence = 0,
        max_members_per_lineage: int | None = None,
    ):
        self.learner = LearnerConfig() if learner is None else learner
        self.drift_config = DriftConfig() if drift is None else drift
        self.rng = np.random.default_rng(seed)
        if max_members_per_lineage is not None and max_members_per_lineage < 1:
            raise ValueError("max_members_per_lineage must be positive")
        self.max_members_per_lineage = max_members_per_lineage
        self.members: list[SubClassifier] = []
        self.detectors: dict[tuple[StreamId, Hashable], DriftDetector] = {}
        self.latest: dict[tuple[StreamId, Hashable], SubClassifier] = {}
        self.generations: dict[tuple[StreamId, Hashable], int] = {}
        self.streams: dict[StreamId, int] = {}
        self.masks: dict[StreamId, np.ndarray | None] = {}
        self.table: IndicatorTable | None = None
        self.target_units: list = []
        self.target_col: dict = {}
        self.drift_log: list[DriftEvent] = []
        self.n_events = 0
        self._raw_cache = None

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_raw_cache"] = None
        return state

    # -- unit definition -------------------------------------------------
    def units(self, n_labels: int) -> list:
        raise NotImplementedError

    def _model_mask(self, mask):
        return mask

    def _unit_input(self, x: np.ndarray, y: np.ndarray, unit) -> np.ndarray:
        raise NotImplementedError

    def _unit_label(self, y: np.ndarray, unit) -> int:
        raise NotImplementedError

    def _raw_all(self, x: np.ndarray) -> np.ndarray:
        """Raw positive probabilities of every member for a target example."""
        raise NotImplementedError

    def _raw_of(self, raw: np.ndarray, row: int, y: np.ndarray, unit) -> float:
        raise NotImplementedError

    def _raw(self, x: np.ndarray) -> np.ndarray:
        """``_raw_all`` memoised for one input between two events, so a
        prediction followed by learning the same example asks every member
        only once."""
        c = self._raw_cache
        if c is not None and c[1] == self.n_events and c[2] == len(self.members) and (
                c[0] is x or np.array_equal(c[0], x)):
            return c[3]
        raw = self._raw_all(x)
        self._raw_cache = (np.array(x, copy=True), self.n_events, len(self.members), raw)
        return raw

    def _weight_inputs(self, raw: np.ndarray, y: np.ndarray):
        """``(P, y_cols)``: raw probabilities ``(M, J)`` and the true class
        of every target column."""
        raise NotImplementedError

    # -- membership ------------------------------------------------------
    def _make_model(self, stream: StreamId) -> BinaryModel:
        mask = self._model_mask(self.masks.get(stream))
        if isinstance(self.learner, LearnerConfig):
            return make_learner(self.learner, mask)
        return self.learner(mask)

    def register_stream(self, stream: StreamId, n_labels: int, binary_mask=None,
                        n_features: int | None = None) -> None:
        """Declare a stream and create the first generation of its lineages.

        Without a ``binary_mask`` all features are treated as numeric.
        """
        if stream in self.streams:
            if self.streams[stream] != n_labels:
                raise ValueError(f"stream {stream} already registered with {self.streams[stream]} labels")
            return
        if n_labels < 1:
            raise ValueError("a stream needs at least one label")
        self.streams[stream] = n_labels
        if binary_mask is None and n_features is not None:
            binary_mask = np.zeros(n_features, dtype=bool)
        self.masks[stream] = None if binary_mask is None else np.asarray(binary_mask, dtype=bool)
        if stream.is_target:
            self.target_units = self.units(n_labels)
            self.target_col = {u: j for j, u in enumerate(self.target_units)}
            self.table = IndicatorTable(len(self.target_units), len(self.members))
        for u in self.units(n_labels):
            self.detectors[(stream, u)] = DriftDetector(self.drift_config)
            self._spawn(stream, u)

    def _spawn(self, stream: StreamId, unit) -> SubClassifier:
        key = (stream, unit)
        gen = self.generations.get(key, 0)
        self.generations[key] = gen + 1
        member = SubClassifier(self._make_model(stream), Origin(stream, unit, gen), len(self.members))
        self.members.append(member)
        self.latest[key] = member
        if self.table is not None:
            self.table.add_rows(1)
        cap = self.max_members_per_lineage
        if cap is not None:
            lineage = [m for m in self.members if m.origin.stream == stream and m.origin.unit == unit]
            if len(lineage) > cap:
                self._remove(lineage[0])
        return member

    def _remove(self, member: SubClassifier) -> None:
        row = member.row
        self._evicted_row = row
        del self.members[row]
        for m in self.members[row:]:
            m.row -= 1
        if self.table is not None:
            self.table.delete_row(row)

    @property
    def target_registered(self) -> bool:
        return self.table is not None

    def lineage_sizes(self) -> dict[tuple[StreamId, Hashable], int]:
        out: dict = {}
        for m in self.members:
            key = (m.origin.stream, m.origin.unit)
            out[key] = out.get(key, 0) + 1
        return out

    def indicators(self, member: int, unit) -> LabelIndicators:
        self._require_target()
        return self.table.get(member, self.target_col[unit])

    def alphas(self) -> np.ndarray:
        """Weights of every (member, target column), shape ``(M, J)``."""
        self._require_target()
        return self.table.alpha()

    def _require_target(self) -> None:
        if self.table is None:
            raise NotRegisteredError("no target example has been observed yet")

    # -- learning --------------------------------------------------------
    def observe(self, event) -> None:
        """Process one ``(StreamId, Instance)`` event (or an Instance, whose
        own stream tag is used)."""
        if isinstance(event, Instance):
            stream, inst = event.stream, event
        else:
            stream, inst = event
        x, y = inst.x, inst.y
        if stream not in self.streams:
            self.register_stream(stream, len(y), n_features=len(x))
        elif len(y) != self.streams[stream]:
            raise ValueError(
                f"stream {stream} has {self.streams[stream]} labels, event carries {len(y)}"
            )
        units = self.units(len(y))
        is_target = stream.is_target
        raw = self._raw(x) if is_target else None

        for u in units:
            key = (stream, u)
            member = self.latest[key]
            if is_target:
                p = self._raw_of(raw, member.row, y, u)
            else:
                p = member.model.predict_proba(self._unit_input(x, y, u))[1]
            signal = self.detectors[key].update(self._unit_label(y, u), int(p > 0.5))
            if signal is DriftSignal.DRIFT:
                self.drift_log.append(DriftEvent(self.n_events, stream, u, inst.t))
                n_before = len(self.members)
                new = self._spawn(stream, u)
                if is_target:
                    raw = self._realign(raw, n_before, new)
                    self.table.reset_columns(self.target_col[u])

        for u in units:
            member = self.latest[(stream, u)]
            yu = self._unit_label(y, u)
            member.train_counts[yu] += 1
            rate = poisson_rate(member.train_counts[1], member.train_counts[0], yu)
            k = int(self.rng.poisson(rate))
            if k > 0:
                member.model.learn(self._unit_input(x, y, u), yu, k)

        if is_target:
            P, y_cols = self._weight_inputs(raw, y)
            self.table.update(P, y_cols)
        self.n_events += 1

    def _realign(self, raw: np.ndarray, n_before: int, new: SubClassifier) -> np.ndarray:
        """Keep the per-member raw predictions in step with the member list
        after a spawn, which may also have evicted the lineage's oldest member."""
        if len(self.members) == n_before:
            raw = np.delete(raw, self._evicted_row, axis=0)
        fill = np.full((1,) + raw.shape[1:], 0.5)
        return np.concatenate([raw, fill], axis=0)

    def own_lineage_mask(self) -> np.ndarray:
        """``(M, J)`` booleans: member belongs to the target lineage of column j."""
        self._require_target()
        own = np.zeros((len(self.members), len(self.target_units)), dtype=bool)
        for i, m in enumerate(self.members):
            if m.origin.stream.is_target and m.origin.unit in self.target_col:
                own[i, self.target_col[m.origin.unit]] = True
        return own

    def aswr(self) -> float:
        """Average share of weight held by members outside each target
        column's own lineage (the source-weight ratio)."""
        return source_weight_ratio(None if self.table is None else self.table.alpha(),
                                   self.own_lineage_mask())

    # -- persistence -----------------------------------------------------
    def save(self, path: str | Path) -> None:
        save_checkpoint(self, path)


class BRMarlene(LineageEnsemble):
    """BR-MARLENE ensemble; units are label indices."""

    def units(self, n_labels: int) -> list:
        return list(range(n_labels))

    def _unit_input(self, x, y, unit):
        return x

    def _unit_label(self, y, unit) -> int:
        return int(y[unit])

    def _raw_all(self, x):
        return np.array([m.model.predict_proba(x)[1] for m in self.members])

    def _raw_of(self, raw, row, y, unit) -> float:
        return float(raw[row])

    def _weight_inputs(self, raw, y):
        return raw, np.asarray(y)

    def predict_scores(self, x) -> np.ndarray:
        """Per-label class scores, shape ``(L, 2)`` with columns (class 0, class 1)."""
        self._require_target()
        raw = self._raw(np.asarray(x, dtype=float))
        hp, hn = self.table.calibrated(raw[:, None])
        a = self.table.alpha()
        return np.stack([(a * hn).sum(axis=0), (a * hp).sum(axis=0)], axis=1)

    def predict(self, x) -> tuple[np.ndarray, np.ndarray]:
        """``(scores, y_hat)``; ties go to class 0.  Does not change any state."""
        scores = self.predict_scores(x)
        return scores, (scores[:, 1] > scores[:, 0]).astype(np.int8)

def source_weight_ratio(alphas: np.ndarray | None, own: np.ndarray) -> float:
    """Mean over target columns of the weight share held outside the own lineage.

    A column whose total weight is zero contributes 0.5.
    """
    if alphas is None:
        raise NotRegisteredError("no target example has been observed yet")
    total = alphas.sum(axis=0)
    src = np.where(own, 0.0, alphas).sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(total > 0, src / total, 0.5)
    return float(ratio.mean())


def save_checkpoint(ensemble: LineageEnsemble, path: str | Path) -> None:
    """Write a versioned pickle container holding the whole ensemble.

    Ensembles built from a :class:`LearnerConfig` always pickle; a custom
    learner factory must itself be picklable (a module-level callable).
    """
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "kind": type(ensemble).__name__,
        "ensemble": ensemble,
    }
    with open(path, "wb") as fh:
        pickle.dump(payload, fh, protocol=pickle.HIGHEST_PROTOCOL)


def load_checkpoint(path: str | Path) -> LineageEnsemble:
    """Load an ensemble written by :func:`save_checkpoint` (trusted files only)."""
    with open(path, "rb") as fh:
        payload = pickle.load(fh)
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not an ensemble checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    return payload["ensemble"]


__all__ = [
    "BRMarlene",
    "LineageEnsemble",
    "NotRegisteredError",
    "Origin",
    "SubClassifier",
    "TARGET",
    "load_checkpoint",
    "save_checkpoint",
    "source_weight_ratio",
]
