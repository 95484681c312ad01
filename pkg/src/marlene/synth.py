"""Multi-source synthetic multi-label streams with scheduled per-label drift.

Two numeric features are drawn from a mixture of equally weighted,
unit-covariance Gaussians whose means sit on a circle.  Label ``q`` is
positive exactly when the example came from its positive component
(component ``q mod C``), so with five labels and five components every
example has one positive label.

The first two labels follow the two-letter drift code (``S`` stable,
``A`` abrupt, ``I`` incremental); all other labels stay stable.

* Abrupt: at the midpoint the label's positive component becomes the next
  component on the circle.
* Incremental: over the middle 20% of the stream the positive component's
  mean moves in a straight line to the vacant point opposite its start, at
  twice the radius.  Only the drifting label's concept changes.

A similar source copies the target's layout with means shifted by uniform
offsets in ``[-0.5, 0.5]^2`` and follows the target's drift schedule at the
same relative position in its own, longer stream.  A non-similar source
draws fresh angles on the circle and a permuted label map, and never drifts.
All randomness comes from numpy's PCG64 generator seeded through
``SeedSequence(seed)``.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .stream import NUMERIC, TARGET, DatasetMeta, Instance, StreamId, make_instance

STABLE, ABRUPT, INCREMENTAL = "S", "A", "I"
VALID_CODES = ("SS", "IS", "II", "IA", "AA", "AS")
SIMILAR, NONSIMILAR = "similar", "nonsimilar"


class DriftKind(enum.Enum):
    STABLE = "stable"
    ABRUPT = "abrupt"
    INCREMENTAL = "incremental"


_KIND = {STABLE: DriftKind.STABLE, ABRUPT: DriftKind.ABRUPT, INCREMENTAL: DriftKind.INCREMENTAL}


@dataclass(frozen=True)
class DriftSpec:
    """Ground truth for one drifting label.

    ``payload`` is the new positive component (abrupt) or the translation of
    the positive component's mean (incremental).  For abrupt drift
    ``start == end`` is the first step of the new concept.
    """

    label: int
    kind: DriftKind
    start: int
    end: int
    payload: tuple = ()


@dataclass(frozen=True)
class SynthConfig:
    per_gaussian_size: int = 500
    sources: tuple[str, ...] = ()
    drift: str = "SS"
    seed: int = 0
    n_labels: int = 5
    n_components: int = 5
    radius: float = 5.0
    source_per_gaussian_size: int = 5000
    strict_code: bool = True

    def __post_init__(self):
        code = self.drift.upper()
        object.__setattr__(self, "drift", code)
        object.__setattr__(self, "sources", tuple(s.lower() for s in self.sources))
        if len(code) != 2 or any(c not in _KIND for c in code):
            raise ValueError(f"drift code must be two of S/A/I, got {self.drift!r}")
        if self.strict_code and code not in VALID_CODES:
            raise ValueError(f"drift code {code!r} is not one of {', '.join(VALID_CODES)}")
        for s in self.sources:
            if s not in (SIMILAR, NONSIMILAR):
                raise ValueError(f"source kind must be {SIMILAR!r} or {NONSIMILAR!r}, got {s!r}")
        if self.per_gaussian_size < 1 or self.source_per_gaussian_size < 1:
            raise ValueError("stream sizes must be positive")
        if self.n_labels < 2:
            raise ValueError("the drift code addresses two labels, need n_labels >= 2")
        if self.n_components < 2 or not self.radius > 0:
            raise ValueError("need at least two components and a positive radius")

    @property
    def target_length(self) -> int:
        return self.n_components * self.per_gaussian_size

    @property
    def source_length(self) -> int:
        return self.n_components * self.source_per_gaussian_size


@dataclass
class Layout:
    """Component means and label map of one stream, with its drift schedule."""

    means: np.ndarray  # (C, 2)
    positive: np.ndarray  # (L,)
    drifts: list[DriftSpec] = field(default_factory=list)

    def means_at(self, t: int) -> np.ndarray:
        m = self.means.copy()
        for d in self.drifts:
            if d.kind is DriftKind.INCREMENTAL:
                frac = min(max((t - d.start) / (d.end - d.start), 0.0), 1.0)
                m[self.positive[d.label]] += frac * np.asarray(d.payload)
        return m

    def positive_at(self, t: int) -> np.ndarray:
        pos = self.positive.copy()
        for d in self.drifts:
            if d.kind is DriftKind.ABRUPT and t >= d.start:
                pos[d.label] = d.payload[0]
        return pos


def circle_means(n: int, radius: float, angles=None) -> np.ndarray:
    if angles is None:
        angles = 2.0 * np.pi * np.arange(n) / n
    return radius * np.column_stack([np.cos(angles), np.sin(angles)])


def target_layout(config: SynthConfig) -> Layout:
    C, L, N = config.n_components, config.n_labels, config.target_length
    means = circle_means(C, config.radius)
    positive = np.arange(L) % C
    drifts = []
    for q, c in enumerate(config.drift):
        if c == ABRUPT:
            at = N // 2
            drifts.append(DriftSpec(q, DriftKind.ABRUPT, at, at, (int((positive[q] + 1) % C),)))
        elif c == INCREMENTAL:
            start, end = int(round(0.4 * N)), int(round(0.6 * N))
            origin = means[positive[q]]
            shift = -3.0 * origin  # to -2 r u, the vacant antipodal point
            drifts.append(DriftSpec(q, DriftKind.INCREMENTAL, start, end, tuple(map(float, shift))))
    return Layout(means, positive, drifts)


def source_layout(config: SynthConfig, kind: str, rng: np.random.Generator) -> Layout:
    base = target_layout(config)
    if kind == SIMILAR:
        means = base.means + rng.uniform(-0.5, 0.5, size=base.means.shape)
        scale = config.source_length / config.target_length
        drifts = [DriftSpec(d.label, d.kind, int(round(d.start * scale)), int(round(d.end * scale)), d.payload)
                  for d in base.drifts]
        return Layout(means, base.positive.copy(), drifts)
    angles = rng.uniform(0.0, 2.0 * np.pi, size=config.n_components)
    perm = rng.permutation(config.n_components)
    return Layout(circle_means(config.n_components, config.radius, angles), perm[base.positive])


def _sample(layout: Layout, n: int, n_labels: int, stream: StreamId, rng) -> list[Instance]:
    C = layout.means.shape[0]
    comp = rng.integers(0, C, size=n)
    noise = rng.standard_normal((n, 2))
    static = not layout.drifts
    means0, pos0 = layout.means, layout.positive
    out = []
    for t in range(n):
        means = means0 if static else layout.means_at(t)
        pos = pos0 if static else layout.positive_at(t)
        x = means[comp[t]] + noise[t]
        y = (pos == comp[t]).astype(np.int8)
        out.append(make_instance(x, y, stream, t))
    return out


class SynthStreams(NamedTuple):
    target: list[Instance]
    sources: list[list[Instance]]
    drifts: list[DriftSpec]
    meta: DatasetMeta


def synth_meta(config: SynthConfig, name: str = "synth") -> DatasetMeta:
    return DatasetMeta(2, (NUMERIC, NUMERIC), config.n_labels, name)


def synth_generate(config: SynthConfig) -> SynthStreams:
    """Target stream, source streams and the target's drift ground truth."""
    seeds = np.random.SeedSequence(config.seed).spawn(1 + 2 * len(config.sources))
    layout = target_layout(config)
    target = _sample(layout, config.target_length, config.n_labels, TARGET,
                     np.random.default_rng(seeds[0]))
    sources = []
    for i, kind in enumerate(config.sources):
        src_layout = source_layout(config, kind, np.random.default_rng(seeds[1 + 2 * i]))
        sources.append(_sample(src_layout, config.source_length, config.n_labels,
                               StreamId.source(i + 1), np.random.default_rng(seeds[2 + 2 * i])))
    name = f"synth-{config.drift}-{config.per_gaussian_size}"
    return SynthStreams(target, sources, list(layout.drifts), synth_meta(config, name))


def component_posterior(means: np.ndarray, x) -> np.ndarray:
    """Posterior over equally weighted unit-covariance components."""
    d2 = np.sum((means - np.asarray(x, dtype=float)) ** 2, axis=1)
    logit = -0.5 * (d2 - d2.min())
    w = np.exp(logit)
    return w / w.sum()


def synth_bayes_optimal(config: SynthConfig, x, step: int, label: int) -> int:
    """Bayes prediction of ``label`` at ``step`` of the target stream."""
    layout = target_layout(config)
    post = component_posterior(layout.means_at(step), x)
    pos = layout.positive_at(step)[label]
    return int(post[pos] > 0.5)


MANIFEST_HEADER = "label,kind,start,end"


def dump_manifest(drifts: Sequence[DriftSpec]) -> str:
    buf = io.StringIO()
    buf.write(MANIFEST_HEADER + "\n")
    for d in drifts:
        buf.write(f"{d.label},{d.kind.value},{d.start},{d.end}\n")
    return buf.getvalue()


def load_manifest(text: str) -> list[DriftSpec]:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != MANIFEST_HEADER:
        raise ValueError("not a drift manifest")
    out = []
    for ln in lines[1:]:
        label, kind, start, end = ln.split(",")
        out.append(DriftSpec(int(label), DriftKind(kind), int(start), int(end)))
    return out


def reset_steps(drifts: Sequence[DriftSpec]) -> dict[int, list[int]]:
    """Per label, the steps at which prequential counters restart."""
    out: dict[int, list[int]] = {}
    for d in drifts:
        if d.kind is not DriftKind.STABLE:
            out.setdefault(d.label, []).append(d.start)
    return out
