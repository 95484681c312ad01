"""Multi-label stream metrics and the sliding-window prequential evaluator.

G-Mean is the geometric mean of positive- and negative-class recall.  A class
with no examples in the counted set has vacuous recall 1, so a window without
any positive of some label does not force that label's G-Mean to 0.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

SNAPSHOT_FIELDS = ("step", "macro_gmean", "micro_gmean", "ls_gmean", "hscore", "hloss")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.tn + other.tn, self.fn + other.fn)

    @classmethod
    def from_predictions(cls, y_hat, y) -> "ConfusionCounts":
        y_hat, y = _pair(y_hat, y)
        return cls(int(np.sum(y_hat & y)), int(np.sum(y_hat & ~y)),
                   int(np.sum(~y_hat & ~y)), int(np.sum(~y_hat & y)))


def _pair(y_hat, y) -> tuple[np.ndarray, np.ndarray]:
    y_hat = np.asarray(y_hat).astype(bool)
    y = np.asarray(y).astype(bool)
    if y_hat.shape != y.shape:
        raise ValueError(f"prediction has shape {y_hat.shape}, truth {y.shape}")
    return y_hat, y


def _gmean(tp, fp, tn, fn) -> float:
    pos, neg = tp + fn, tn + fp
    r_pos = tp / pos if pos else 1.0
    r_neg = tn / neg if neg else 1.0
    return math.sqrt(r_pos * r_neg)


def gmean(c: ConfusionCounts) -> float:
    return _gmean(c.tp, c.fp, c.tn, c.fn)


def macro_gmean(per_label: Sequence[ConfusionCounts]) -> float:
    if not per_label:
        raise ValueError("macro G-Mean of no labels")
    return math.fsum(gmean(c) for c in per_label) / len(per_label)


def micro_gmean(per_label: Sequence[ConfusionCounts]) -> float:
    if not per_label:
        raise ValueError("micro G-Mean of no labels")
    total = ConfusionCounts()
    for c in per_label:
        total = total + c
    return gmean(total)


def ls_gmean_step(y_hat, y) -> float:
    """G-Mean over the label slots of a single example."""
    return gmean(ConfusionCounts.from_predictions(y_hat, y))


def hamming_score_step(y_hat, y) -> float:
    y_hat, y = _pair(y_hat, y)
    if y.size == 0:
        raise ValueError("empty label vector")
    return int(np.sum(y_hat == y)) / y.size


@dataclass(frozen=True)
class MetricSnapshot:
    step: int
    macro_gmean: float
    micro_gmean: float
    ls_gmean: float
    hscore: float
    hloss: float

    def as_row(self) -> tuple:
        return (self.step, self.macro_gmean, self.micro_gmean, self.ls_gmean, self.hscore, self.hloss)


def window_length(n_examples: int, fraction: float = 0.1) -> int:
    """``ceil(fraction * n_examples)``, at least 1."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"window fraction must lie in (0, 1], got {fraction}")
    return max(1, math.ceil(fraction * n_examples))


class WindowEvaluator:
    """Prequential metrics over the most recent ``window_len`` examples.

    Per-label confusion counts and the number of correct label slots are
    kept as integers and adjusted on admission and eviction, so they always
    equal a recount of the buffer.  The per-example label-set G-Means are
    summed as exact fractions, so their mean is the correctly rounded value
    ``math.fsum`` gives on a recount.
    """

    def __init__(self, n_labels: int, window_len: int):
        if n_labels < 1 or window_len < 1:
            raise ValueError("n_labels and window_len must be positive")
        self.n_labels = n_labels
        self.window_len = window_len
        self.buffer: deque = deque()
        # columns tp, fp, tn, fn
        self.counts = np.zeros((n_labels, 4), dtype=np.int64)
        self.hits = 0
        self.ls_sum = Fraction(0)
        self.step_count = 0

    @staticmethod
    def _cells(y_hat: np.ndarray, y: np.ndarray) -> np.ndarray:
        # one-hot over (tp, fp, tn, fn) per label
        cells = np.zeros((len(y), 4), dtype=np.int64)
        cells[np.arange(len(y)), 2 - 2 * y_hat + (y_hat != y)] = 1
        return cells

    def step(self, y_hat, y) -> MetricSnapshot:
        y_hat, y = _pair(y_hat, y)
        if y.shape != (self.n_labels,):
            raise ValueError(f"expected {self.n_labels} labels, got shape {y.shape}")
        if len(self.buffer) == self.window_len:
            old_hat, old_y, old_ls, old_hits = self.buffer.popleft()
            self.counts -= self._cells(old_hat, old_y)
            self.hits -= old_hits
            self.ls_sum -= Fraction(old_ls)
        hits = int(np.sum(y_hat == y))
        ls = ls_gmean_step(y_hat, y)
        self.buffer.append((y_hat, y, ls, hits))
        self.counts += self._cells(y_hat, y)
        self.hits += hits
        self.ls_sum += Fraction(ls)
        self.step_count += 1
        return self.snapshot()

    def per_label(self) -> list[ConfusionCounts]:
        return [ConfusionCounts(*map(int, row)) for row in self.counts]

    def per_label_gmean(self) -> np.ndarray:
        return np.array([_gmean(*row) for row in self.counts.tolist()])

    def snapshot(self) -> MetricSnapshot:
        if not self.buffer:
            raise ValueError("no example scored yet")
        rows = self.counts.tolist()
        n = len(self.buffer)
        hscore = self.hits / (n * self.n_labels)
        tot = [sum(col) for col in zip(*rows)]
        return MetricSnapshot(
            step=self.step_count,
            macro_gmean=math.fsum(_gmean(*r) for r in rows) / len(rows),
            micro_gmean=_gmean(*tot),
            ls_gmean=float(self.ls_sum) / n,
            hscore=hscore,
            hloss=1.0 - hscore,
        )


def recount(pairs: Iterable[tuple], step: int = 0) -> MetricSnapshot:
    """Metrics of a set of ``(y_hat, y)`` pairs computed from scratch."""
    pairs = [_pair(a, b) for a, b in pairs]
    if not pairs:
        raise ValueError("no examples")
    n_labels = pairs[0][1].size
    per = [ConfusionCounts.from_predictions([p[0][q] for p in pairs], [p[1][q] for p in pairs])
           for q in range(n_labels)]
    hits = sum(int(np.sum(a == b)) for a, b in pairs)
    hscore = hits / (len(pairs) * n_labels)
    return MetricSnapshot(
        step=step,
        macro_gmean=macro_gmean(per),
        micro_gmean=micro_gmean(per),
        ls_gmean=math.fsum(ls_gmean_step(a, b) for a, b in pairs) / len(pairs),
        hscore=hscore,
        hloss=1.0 - hscore,
    )


class LabelCurves:
    """Cumulative prequential G-Mean per label, with counters reset at the
    given drift steps of each label (a reset at step ``t`` happens before
    example ``t`` is scored)."""

    def __init__(self, n_labels: int, resets: dict[int, Iterable[int]] | None = None):
        self.n_labels = n_labels
        self.resets = {q: set(v) for q, v in (resets or {}).items()}
        self.counts = np.zeros((n_labels, 4), dtype=np.int64)
        self.t = 0

    def step(self, y_hat, y) -> np.ndarray:
        y_hat, y = _pair(y_hat, y)
        for q, steps in self.resets.items():
            if self.t in steps:
                self.counts[q] = 0
        self.counts += np.stack([y_hat & y, y_hat & ~y, ~y_hat & ~y, ~y_hat & y], axis=1)
        self.t += 1
        return np.array([_gmean(*row) for row in self.counts.tolist()])
