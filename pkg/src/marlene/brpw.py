"""BRPW-MARLENE: BR-MARLENE plus pairwise (PW) label-dependency classifiers.

A PW sub-classifier for the ordered pair ``(q, q')`` sees the features with
label ``q`` appended as one extra binary feature and predicts label ``q'``.
PW members are trained, drift-monitored and weighted exactly like BR members,
with label pairs in place of labels.  Training appends the true ``y_q``;
prediction appends BR-MARLENE's own prediction for ``q``.
"""

from __future__ import annotations

from pathlib import Path
from typing import Callable

import numpy as np

from .br import BRMarlene, LineageEnsemble, SubClassifier, save_checkpoint
from .drift import DriftConfig
from .learners import BinaryModel, LearnerConfig
from .stream import Instance, StreamId

NORMALIZED = "normalized"
RAW_SUM = "raw-sum"
MAX_PAIRWISE_LABELS = 32


class ScalabilityError(ValueError):
    """Target label count too large for the quadratic number of PW members."""


def ordered_pairs(n_labels: int) -> list[tuple[int, int]]:
    return [(a, b) for a in range(n_labels) for b in range(n_labels) if a != b]


class PairwiseEnsemble(LineageEnsemble):
    """The PW half of BRPW-MARLENE; units are ordered pairs ``(q, q')``."""

    def units(self, n_labels: int) -> list:
        return ordered_pairs(n_labels)

    def _model_mask(self, mask):
        return None if mask is None else np.append(mask, True)

    def _unit_input(self, x, y, unit):
        return np.append(x, float(y[unit[0]]))

    def _unit_label(self, y, unit) -> int:
        return int(y[unit[1]])

    def _raw_all(self, x):
        """``(M, 2)``: positive probability given appended label 0 and 1."""
        x0, x1 = np.append(x, 0.0), np.append(x, 1.0)
        out = np.empty((len(self.members), 2))
        for i, m in enumerate(self.members):
            out[i, 0] = m.model.predict_proba(x0)[1]
            out[i, 1] = m.model.predict_proba(x1)[1]
        return out

    def _raw_of(self, raw, row, y, unit) -> float:
        return float(raw[row, int(y[unit[0]])])

    def _columns(self, raw: np.ndarray, cond_values: np.ndarray) -> np.ndarray:
        """Raw probabilities per (member, target pair) for the given value
        of every pair's conditioning label."""
        cond = np.array([u[0] for u in self.target_units], dtype=int)
        pick = np.asarray(cond_values, dtype=int)[cond]
        return raw[:, pick] if raw.shape[0] else np.zeros((0, len(cond)))

    def _weight_inputs(self, raw, y):
        pred = np.array([u[1] for u in self.target_units], dtype=int)
        return self._columns(raw, y), np.asarray(y)[pred]

    def pair_scores(self, x, y_cond) -> np.ndarray:
        """Class scores of every target pair, shape ``(J, 2)``, with the
        conditioning labels set from ``y_cond``."""
        self._require_target()
        raw = self._raw(np.asarray(x, dtype=float))
        P = self._columns(raw, y_cond)
        hp, hn = self.table.calibrated(P)
        a = self.table.alpha()
        return np.stack([(a * hn).sum(axis=0), (a * hp).sum(axis=0)], axis=1)


def _normalize(scores: np.ndarray) -> np.ndarray:
    tot = scores.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(tot > 0, scores / tot, 0.5)


class BRPWMarlene:
    """BR-MARLENE and its pairwise extension, trained side by side.

    ``br`` evolves exactly as a standalone :class:`BRMarlene` with the same
    seed; the PW half draws its Poisson counts from an independent stream.
    ``combine`` chooses how BR and PW votes are summed: ``"normalized"``
    turns every vote vector into a distribution first, ``"raw-sum"`` adds
    the weighted scores as they are.
    """

    def __init__(
        self,
        learner: LearnerConfig | Callable[..., BinaryModel] | None = None,
        drift: DriftConfig | None = None,
        seed: int = 0,
        max_members_per_lineage: int | None = None,
        combine: str = NORMALIZED,
        force: bool = False,
    ):
        if combine not in (NORMALIZED, RAW_SUM):
            raise ValueError(f"combine must be {NORMALIZED!r} or {RAW_SUM!r}, got {combine!r}")
        self.combine = combine
        self.force = force
        self.br = BRMarlene(learner, drift, seed, max_members_per_lineage)
        pw_seed = np.random.SeedSequence(seed, spawn_key=(1,))
        self.pw = PairwiseEnsemble(learner, drift, pw_seed, max_members_per_lineage)

    @property
    def members(self) -> list[SubClassifier]:
        return self.br.members + self.pw.members

    @property
    def target_registered(self) -> bool:
        return self.br.target_registered

    def _guard(self, stream: StreamId, n_labels: int) -> None:
        if stream.is_target and n_labels > MAX_PAIRWISE_LABELS and not self.force:
            raise ScalabilityError(
                f"target has {n_labels} labels; BRPW would build {n_labels * (n_labels - 1)} "
                f"pairwise models (limit {MAX_PAIRWISE_LABELS} labels, pass force=True to override)"
            )

    def register_stream(self, stream: StreamId, n_labels: int, binary_mask=None,
                        n_features: int | None = None) -> None:
        self._guard(stream, n_labels)
        self.br.register_stream(stream, n_labels, binary_mask, n_features)
        self.pw.register_stream(stream, n_labels, binary_mask, n_features)

    def observe(self, event) -> None:
        stream, inst = (event.stream, event) if isinstance(event, Instance) else event
        if stream not in self.br.streams:
            self.register_stream(stream, len(inst.y), n_features=len(inst.x))
        self.br.observe((stream, inst))
        self.pw.observe((stream, inst))

    def pw_pair_score(self, x, y_hat_q: int, pair: tuple[int, int]) -> np.ndarray:
        """Weighted PW vote ``(score(0), score(1))`` for one target pair with
        its conditioning label set to ``y_hat_q``."""
        self.pw._require_target()
        if pair not in self.pw.target_col:
            raise KeyError(f"unknown target pair {pair}")
        cond = np.zeros(self.br.streams[StreamId(0)], dtype=int)
        cond[pair[0]] = int(y_hat_q)
        return self.pw.pair_scores(x, cond)[self.pw.target_col[pair]]

    def predict_scores(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Combined class scores ``(L, 2)`` and the BR prediction they were
        conditioned on."""
        br_scores, y_br = self.br.predict(x)
        n_labels = len(y_br)
        if n_labels == 1:
            return br_scores, y_br
        pw_scores = self.pw.pair_scores(x, y_br)
        if self.combine == NORMALIZED:
            br_scores, pw_scores = _normalize(br_scores), _normalize(pw_scores)
        combined = br_scores.copy()
        for j, (a, b) in enumerate(self.pw.target_units):
            combined[b] += pw_scores[j]
        return combined, y_br

    def predict(self, x) -> tuple[np.ndarray, np.ndarray]:
        """``(scores, y_hat)``; ties go to class 0.  Does not change any state."""
        scores, _ = self.predict_scores(x)
        return scores, (scores[:, 1] > scores[:, 0]).astype(np.int8)

    def aswr(self) -> float:
        return self.br.aswr()

    def aswr_pw(self) -> float:
        """Source-weight ratio of the PW members over the target pairs
        (NaN for a single-label target, which has no pairs)."""
        if self.pw.target_registered and not self.pw.target_units:
            return float("nan")
        return self.pw.aswr()

    def save(self, path: str | Path) -> None:
        save_checkpoint(self, path)
