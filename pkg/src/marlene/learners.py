"""Incremental binary base learners.

Both learners accept weighted training (``k`` identical presentations in one
call) and return a two-class probability pair ``(P(y=0), P(y=1))``.
Numeric features use per-class Gaussian estimators, binary features per-class
Bernoulli estimators with Laplace smoothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np
from scipy.special import ndtr

HOEFFDING_TREE = "hoeffding_tree"
NAIVE_BAYES = "naive_bayes"
_LOG_2PI = math.log(2.0 * math.pi)


class BinaryModel(Protocol):
    n_seen: float

    def learn(self, x: np.ndarray, y: int, k: int = 1) -> None: ...

    def predict_proba(self, x: np.ndarray) -> tuple[float, float]: ...


@dataclass(frozen=True)
class LearnerConfig:
    kind: str = HOEFFDING_TREE
    ht_delta: float = 1e-7
    ht_grace_period: int = 200
    ht_tie_threshold: float = 0.05
    ht_split_points: int = 10
    nb_variance_floor: float = 1e-6

    def __post_init__(self):
        if self.kind not in (HOEFFDING_TREE, NAIVE_BAYES):
            raise ValueError(f"unknown learner kind {self.kind!r}")
        if not 0.0 < self.ht_delta < 1.0:
            raise ValueError(f"ht_delta must lie in (0, 1), got {self.ht_delta}")
        if self.ht_grace_period < 1:
            raise ValueError(f"ht_grace_period must be positive, got {self.ht_grace_period}")
        if self.ht_tie_threshold < 0:
            raise ValueError(f"ht_tie_threshold must be >= 0, got {self.ht_tie_threshold}")
        if self.ht_split_points < 1:
            raise ValueError("ht_split_points must be positive")
        if not self.nb_variance_floor > 0:
            raise ValueError(f"nb_variance_floor must be positive, got {self.nb_variance_floor}")


def make_learner(config: LearnerConfig, binary_mask=None) -> BinaryModel:
    if config.kind == NAIVE_BAYES:
        return NaiveBayes(config.nb_variance_floor, binary_mask)
    return HoeffdingTree(
        delta=config.ht_delta,
        grace_period=config.ht_grace_period,
        tie_threshold=config.ht_tie_threshold,
        split_points=config.ht_split_points,
        variance_floor=config.nb_variance_floor,
        binary_mask=binary_mask,
    )


def learner_factory(config: LearnerConfig) -> Callable[[object], BinaryModel]:
    """``factory(binary_mask) -> model`` for the ensembles."""
    return lambda binary_mask=None: make_learner(config, binary_mask)


def _check_k(k) -> int:
    if k != int(k) or k < 1:
        raise ValueError(f"training count k must be a positive integer, got {k}")
    return int(k)


class _ClassStats:
    """Per-class weighted mean/variance (West's update) for every feature."""

    __slots__ = ("w", "mean", "m2", "lo", "hi", "_terms")

    def __init__(self, n_features: int):
        self.w = np.zeros(2)
        self.mean = np.zeros((2, n_features))
        self.m2 = np.zeros((2, n_features))
        self.lo = np.full(n_features, np.inf)
        self.hi = np.full(n_features, -np.inf)
        self._terms = None

    def add(self, x: np.ndarray, y: int, k: float) -> None:
        self.w[y] += k
        mean = self.mean[y]
        delta = x - mean
        mean += delta * (k / self.w[y])
        self.m2[y] += k * delta * (x - mean)
        np.minimum(self.lo, x, out=self.lo)
        np.maximum(self.hi, x, out=self.hi)
        self._terms = None

    def variance(self, floor: float) -> np.ndarray:
        w = np.where(self.w > 0, self.w, 1.0)[:, None]
        return np.maximum(self.m2 / w, floor)

    def _likelihood_terms(self, floor, num_idx, bin_idx):
        """Per-class constants of the log-likelihood, kept until the next update."""
        if self._terms is None:
            mean = inv = None
            const = np.zeros(2)
            if num_idx is None or len(num_idx):
                var = self.variance(floor)
                mean = self.mean
                if num_idx is not None:
                    var, mean = var[:, num_idx], mean[:, num_idx]
                else:
                    mean = mean.copy()
                const -= 0.5 * (_LOG_2PI * var.shape[1] + np.log(var).sum(axis=1))
                inv = 0.5 / var
            log_p = log_q = None
            if bin_idx is not None and len(bin_idx):
                p = (self.mean[:, bin_idx] * self.w[:, None] + 1.0) / (self.w[:, None] + 2.0)
                log_p, log_q = np.log(p), np.log1p(-p)
            self._terms = (mean, inv, const, log_p, log_q)
        return self._terms

    def log_likelihood(self, x, floor, num_idx, bin_idx) -> np.ndarray:
        mean, inv, const, log_p, log_q = self._likelihood_terms(floor, num_idx, bin_idx)
        ll = const.copy()
        if mean is not None:
            xs = x if num_idx is None else x[num_idx]
            ll -= ((xs - mean) ** 2 * inv).sum(axis=1)
        if log_p is not None:
            ll += np.where(x[bin_idx] > 0.5, log_p, log_q).sum(axis=1)
        return ll


def _posterior(stats: _ClassStats, prior_w: np.ndarray, x, floor, num_idx, bin_idx):
    total = prior_w[0] + prior_w[1]
    if total <= 0:
        return 0.5, 0.5
    logp = np.log((prior_w + 1.0) / (total + 2.0))
    if stats.w[0] > 0 and stats.w[1] > 0:
        logp = logp + stats.log_likelihood(x, floor, num_idx, bin_idx)
    d = logp[1] - logp[0]
    # logistic of the log-odds keeps both outputs in [0, 1] and summing to 1
    if d >= 0:
        e = math.exp(-d)
        p1 = 1.0 / (1.0 + e)
        return e * p1, p1
    e = math.exp(d)
    p0 = 1.0 / (1.0 + e)
    return p0, e * p0


class _ArityMixin:
    n_features: int | None

    def _setup(self, x: np.ndarray) -> None:
        if self.n_features is None:
            self.n_features = len(x)
            mask = self._binary_mask
            if mask is None or not np.any(mask):
                self._num_idx, self._bin_idx = None, None
            else:
                mask = np.asarray(mask, dtype=bool)
                if len(mask) != self.n_features:
                    raise ValueError(
                        f"binary mask has {len(mask)} entries for {self.n_features} features"
                    )
                self._num_idx = np.flatnonzero(~mask)
                self._bin_idx = np.flatnonzero(mask)
            self._init_state()
        elif len(x) != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {len(x)}")

    def _init_state(self) -> None:
        pass


class NaiveBayes(_ArityMixin):
    """Streaming Gaussian/Bernoulli naive Bayes."""

    def __init__(self, variance_floor: float = 1e-6, binary_mask=None):
        if not variance_floor > 0:
            raise ValueError("variance_floor must be positive")
        self.variance_floor = variance_floor
        self._binary_mask = binary_mask
        self.n_features = None
        self.n_seen = 0.0
        self.stats: _ClassStats | None = None

    def _init_state(self) -> None:
        self.stats = _ClassStats(self.n_features)

    def learn(self, x, y, k=1) -> None:
        k = _check_k(k)
        x = np.asarray(x, dtype=np.float64)
        self._setup(x)
        self.stats.add(x, int(y), float(k))
        self.n_seen += k

    def predict_proba(self, x) -> tuple[float, float]:
        x = np.asarray(x, dtype=np.float64)
        self._setup(x)
        s = self.stats
        return _posterior(s, s.w, x, self.variance_floor, self._num_idx, self._bin_idx)


class _Leaf:
    __slots__ = ("stats", "class_w", "last_eval")

    def __init__(self, n_features: int, class_w=None):
        self.stats = _ClassStats(n_features)
        self.class_w = np.zeros(2) if class_w is None else np.asarray(class_w, dtype=float)
        self.last_eval = 0.0


class _Split:
    __slots__ = ("feature", "threshold", "left", "right")

    def __init__(self, feature: int, threshold: float, left, right):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right


def _entropy(w: np.ndarray) -> np.ndarray:
    """Binary entropy in bits of class weights along axis 0."""
    tot = w.sum(axis=0)
    safe = np.where(tot > 0, tot, 1.0)
    h = np.zeros_like(tot, dtype=float)
    for c in range(w.shape[0]):
        p = w[c] / safe
        with np.errstate(divide="ignore", invalid="ignore"):
            h -= np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return h


class HoeffdingTree(_ArityMixin):
    """VFDT with information gain, Gaussian split estimation and NB leaves.

    A leaf is re-examined every ``grace_period`` units of training weight.
    It splits when the best candidate beats the runner-up (the no-split
    option counts, with merit 0) by more than the Hoeffding bound
    ``sqrt(ln(1/delta) / (2 n))`` (range 1 for two-class information gain),
    or when the bound falls below ``tie_threshold``.
    """

    def __init__(
        self,
        delta: float = 1e-7,
        grace_period: int = 200,
        tie_threshold: float = 0.05,
        split_points: int = 10,
        variance_floor: float = 1e-6,
        binary_mask=None,
    ):
        LearnerConfig(
            kind=HOEFFDING_TREE,
            ht_delta=delta,
            ht_grace_period=grace_period,
            ht_tie_threshold=tie_threshold,
            ht_split_points=split_points,
            nb_variance_floor=variance_floor,
        )
        self.delta = delta
        self.grace_period = grace_period
        self.tie_threshold = tie_threshold
        self.split_points = split_points
        self.variance_floor = variance_floor
        self._binary_mask = binary_mask
        self.n_features = None
        self.n_seen = 0.0
        self.root = None
        self.n_splits = 0

    def _init_state(self) -> None:
        self.root = _Leaf(self.n_features)

    def _leaf(self, x: np.ndarray):
        node, parent, side = self.root, None, None
        while type(node) is _Split:
            parent = node
            if x[node.feature] <= node.threshold:
                node, side = node.left, 0
            else:
                node, side = node.right, 1
        return node, parent, side

    def hoeffding_bound(self, n: float) -> float:
        return math.sqrt(math.log(1.0 / self.delta) / (2.0 * n))

    def learn(self, x, y, k=1) -> None:
        k = _check_k(k)
        x = np.asarray(x, dtype=np.float64)
        self._setup(x)
        y = int(y)
        leaf, parent, side = self._leaf(x)
        leaf.stats.add(x, y, float(k))
        leaf.class_w[y] += k
        self.n_seen += k
        seen = leaf.stats.w.sum()
        if seen - leaf.last_eval >= self.grace_period:
            leaf.last_eval = seen
            self._attempt_split(leaf, parent, side)

    def split_merits(self, leaf: _Leaf):
        """Best information gain and threshold per feature, shape ``(F,)`` each."""
        s = leaf.stats
        F = self.n_features
        w = s.w
        parent_h = float(_entropy(w[:, None])[0])
        gains = np.zeros(F)
        thresholds = np.zeros(F)

        num = np.arange(F) if self._num_idx is None else self._num_idx
        if len(num):
            lo, hi = s.lo[num], s.hi[num]
            frac = np.arange(1, self.split_points + 1) / (self.split_points + 1)
            T = lo[:, None] + (hi - lo)[:, None] * frac[None, :]  # (Fn, P)
            var = s.variance(0.0)[:, num]
            left = np.empty((2,) + T.shape)
            for c in range(2):
                mu = s.mean[c, num][:, None]
                sd = np.sqrt(var[c])[:, None]
                with np.errstate(divide="ignore", invalid="ignore"):
                    z = (T - mu) / np.where(sd > 0, sd, 1.0)
                cdf = np.where(sd > 0, ndtr(z), (T >= mu).astype(float))
                left[c] = w[c] * cdf
            right = w[:, None, None] - left
            wl, wr = left.sum(axis=0), right.sum(axis=0)
            tot = w.sum()
            g = parent_h - (wl / tot) * _entropy(left) - (wr / tot) * _entropy(right)
            g = np.where(hi[:, None] > lo[:, None], g, 0.0)
            best = g.argmax(axis=1)
            gains[num] = g[np.arange(len(num)), best]
            thresholds[num] = T[np.arange(len(num)), best]
        if self._bin_idx is not None and len(self._bin_idx):
            b = self._bin_idx
            right = w[:, None] * s.mean[:, b]
            left = w[:, None] - right
            tot = w.sum()
            g = (parent_h - (left.sum(0) / tot) * _entropy(left)
                 - (right.sum(0) / tot) * _entropy(right))
            gains[b] = g
            thresholds[b] = 0.5
        return gains, thresholds

    def _attempt_split(self, leaf: _Leaf, parent, side) -> None:
        w = leaf.stats.w
        if w[0] <= 0 or w[1] <= 0:
            return
        gains, thresholds = self.split_merits(leaf)
        order = np.argsort(gains)[::-1]
        best = gains[order[0]]
        second = max(gains[order[1]], 0.0) if len(order) > 1 else 0.0
        eps = self.hoeffding_bound(w.sum())
        if best <= 0 or not (best - second > eps or eps < self.tie_threshold):
            return
        f = int(order[0])
        thr = float(thresholds[f])
        s = leaf.stats
        if self._bin_idx is not None and f in set(self._bin_idx.tolist()):
            right_w = w * s.mean[:, f]
        else:
            sd = np.sqrt(s.variance(0.0)[:, f])
            cdf = np.where(sd > 0, ndtr((thr - s.mean[:, f]) / np.where(sd > 0, sd, 1.0)),
                           (thr >= s.mean[:, f]).astype(float))
            right_w = w * (1.0 - cdf)
        node = _Split(f, thr, _Leaf(self.n_features, w - right_w), _Leaf(self.n_features, right_w))
        if parent is None:
            self.root = node
        elif side == 0:
            parent.left = node
        else:
            parent.right = node
        self.n_splits += 1

    def predict_proba(self, x) -> tuple[float, float]:
        x = np.asarray(x, dtype=np.float64)
        self._setup(x)
        leaf, _, _ = self._leaf(x)
        return _posterior(leaf.stats, leaf.class_w, x, self.variance_floor,
                          self._num_idx, self._bin_idx)

    @property
    def n_leaves(self) -> int:
        return self.n_splits + 1
