"""Minority-class recall drift detection for imbalanced binary streams (DDM-OCI style).

Only examples whose true class is the current minority class update the
detector's recall estimate ``r``, a time-decayed fraction of correctly
predicted minority examples.  Its spread ``s = sqrt(r~(1 - r~) / n)`` uses the
decayed minority count ``n`` and a recall ``r~`` shrunk towards 1/2 by a small
pseudo-count, so a perfect streak does not produce ``s = 0``.  The pair
``(r_best, s_best)`` with the largest ``r + s`` is remembered; the detector
warns when ``r + s < r_best - warning_level * s_best`` and signals drift
below ``r_best - drift_level * s_best``, after which it starts afresh.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class DriftSignal(enum.Enum):
    STABLE = "stable"
    WARNING = "warning"
    DRIFT = "drift"


@dataclass(frozen=True)
class DriftConfig:
    lambda_decay: float = 0.999
    warning_level: float = 2.0
    drift_level: float = 3.0
    min_instances: int = 100
    prior: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.lambda_decay < 1.0:
            raise ValueError(f"lambda_decay must lie in (0, 1), got {self.lambda_decay}")
        if not 0 <= self.warning_level <= self.drift_level:
            raise ValueError("need 0 <= warning_level <= drift_level")
        if self.min_instances < 1:
            raise ValueError("min_instances must be positive")
        if self.prior < 0:
            raise ValueError("prior must be >= 0")


class DriftDetector:
    """One detector per monitored (stream, label) or (stream, label pair)."""

    def __init__(self, config: DriftConfig | None = None, **overrides):
        if config is None:
            config = DriftConfig(**overrides)
        elif overrides:
            raise TypeError("pass either a config or keyword overrides")
        self.config = config
        self.reset()

    @property
    def lambda_decay(self) -> float:
        return self.config.lambda_decay

    def reset(self) -> "DriftDetector":
        self._pos_w = 0.0
        self._all_w = 0.0
        self.seen = [False, False]
        self.minority = 1
        self._clear_recall()
        return self

    def _clear_recall(self) -> None:
        self.correct = 0.0
        self.n_pos = 0.0
        self.n_obs = 0
        self.r = 0.0
        self.s = 0.0
        self.r_best = None
        self.s_best = None
        self.state = DriftSignal.STABLE

    def _minority_class(self) -> int:
        if not (self.seen[0] and self.seen[1]):
            return 1
        return 1 if self.freq_pos <= 0.5 else 0

    @property
    def freq_pos(self) -> float:
        """Decayed frequency of the positive class."""
        return self._pos_w / self._all_w if self._all_w else 0.0

    def update(self, y_true: int, y_pred: int) -> DriftSignal:
        lam = self.config.lambda_decay
        y_true = int(y_true)
        self._pos_w = lam * self._pos_w + y_true
        self._all_w = lam * self._all_w + 1.0
        self.seen[y_true] = True
        minority = self._minority_class()
        if minority != self.minority:
            # the monitored recall now refers to the other class
            self.minority = minority
            self._clear_recall()
        if y_true != minority:
            self.state = DriftSignal.STABLE
            return self.state

        self.correct = lam * self.correct + (1.0 if int(y_pred) == y_true else 0.0)
        self.n_pos = lam * self.n_pos + 1.0
        self.n_obs += 1
        self.r = self.correct / self.n_pos
        a = self.config.prior
        rs = (self.correct + a) / (self.n_pos + 2.0 * a) if a > 0 else self.r
        self.s = math.sqrt(max(rs * (1.0 - rs), 0.0) / self.n_pos)
        if self.n_obs < self.config.min_instances:
            self.state = DriftSignal.STABLE
            return self.state
        if self.r_best is None or self.r + self.s > self.r_best + self.s_best:
            self.r_best, self.s_best = self.r, self.s
        level = self.r + self.s
        if level < self.r_best - self.config.drift_level * self.s_best:
            self.reset()
            return DriftSignal.DRIFT
        if level < self.r_best - self.config.warning_level * self.s_best:
            self.state = DriftSignal.WARNING
        else:
            self.state = DriftSignal.STABLE
        return self.state

    def snapshot(self) -> tuple:
        return (self._pos_w, self._all_w, tuple(self.seen), self.minority, self.correct, self.n_pos,
                self.n_obs, self.r, self.s, self.r_best, self.s_best, self.state)


def drift_update(detector: DriftDetector, y_true: int, y_pred: int) -> DriftSignal:
    return detector.update(y_true, y_pred)


def drift_reset(detector: DriftDetector) -> DriftDetector:
    return detector.reset()
