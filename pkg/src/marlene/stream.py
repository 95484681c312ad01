"""Multi-label stream data model, dataset I/O and stream interleaving.

Instances carry a feature vector, a binary label vector, the id of the stream
they came from and their time step within that stream.  Datasets are read
from MEKA-style multi-label ARFF (the relation name carries ``-C L``) or from
a plain CSV layout with a JSON sidecar.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

NUMERIC = "numeric"
BINARY = "binary"


@dataclass(frozen=True, order=True)
class StreamId:
    """Origin of an example: the target stream (``k == 0``) or source ``k``."""

    k: int = 0

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"source index must be positive, got {self.k}")

    @classmethod
    def target(cls) -> "StreamId":
        return cls(0)

    @classmethod
    def source(cls, k: int) -> "StreamId":
        if k < 1:
            raise ValueError(f"source index must be >= 1, got {k}")
        return cls(k)

    @property
    def is_target(self) -> bool:
        return self.k == 0

    @classmethod
    def parse(cls, text: str) -> "StreamId":
        text = text.strip()
        if text == "T":
            return cls.target()
        m = re.fullmatch(r"S(\d+)", text)
        if m is None:
            raise ValueError(f"bad stream tag {text!r} (expected 'T' or 'S<k>')")
        return cls.source(int(m.group(1)))

    def __str__(self) -> str:
        return "T" if self.k == 0 else f"S{self.k}"


TARGET = StreamId.target()


@dataclass(frozen=True, eq=False)
class Instance:
    x: np.ndarray
    y: np.ndarray
    stream: StreamId = TARGET
    t: int = 0

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.stream == other.stream
            and self.t == other.t
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
        )

    __hash__ = None


def make_instance(x, y, stream: StreamId = TARGET, t: int = 0) -> Instance:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int8)
    if x.ndim != 1 or y.ndim != 1:
        raise ValueError("x and y must be one-dimensional")
    if np.any((y != 0) & (y != 1)):
        raise ValueError("label vector entries must be 0 or 1")
    x.flags.writeable = False
    y.flags.writeable = False
    return Instance(x, y, stream, t)


@dataclass(frozen=True)
class DatasetMeta:
    n_features: int
    feature_kinds: tuple[str, ...]
    n_labels: int
    name: str = "dataset"
    feature_names: tuple[str, ...] = ()
    label_names: tuple[str, ...] = ()

    def __post_init__(self):
        if self.n_features < 1 or self.n_labels < 1:
            raise ValueError("a dataset needs at least one feature and one label")
        if len(self.feature_kinds) != self.n_features:
            raise ValueError("feature_kinds length must equal n_features")
        bad = set(self.feature_kinds) - {NUMERIC, BINARY}
        if bad:
            raise ValueError(f"unknown feature kinds {sorted(bad)}")
        if not self.feature_names:
            object.__setattr__(
                self, "feature_names", tuple(f"f{i + 1}" for i in range(self.n_features))
            )
        if not self.label_names:
            object.__setattr__(
                self, "label_names", tuple(f"l{i + 1}" for i in range(self.n_labels))
            )

    @property
    def binary_mask(self) -> np.ndarray:
        return np.array([k == BINARY for k in self.feature_kinds], dtype=bool)


# --------------------------------------------------------------------------
# ARFF
# --------------------------------------------------------------------------


class ArffError(ValueError):
    """Malformed ARFF header or data."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ArffSchemaError(ArffError):
    """Attribute types or label values outside what multi-label ARFF allows."""


class ArffRowError(ArffError):
    """A data row that does not match the declared attributes."""


_ATTR_RE = re.compile(r"@attribute\s+('(?:[^'\\]|\\.)*'|\"(?:[^\"\\]|\\.)*\"|\S+)\s+(.+)$", re.I)
_LABEL_COUNT_RE = re.compile(r"-C\s+(-?\d+)")


def _unquote(name: str) -> str:
    if len(name) >= 2 and name[0] == name[-1] and name[0] in "'\"":
        return re.sub(r"\\(.)", r"\1", name[1:-1])
    return name


def _attr_kind(decl: str, lineno: int) -> str:
    decl = decl.strip()
    low = decl.lower()
    if low in ("numeric", "real", "integer"):
        return NUMERIC
    if decl.startswith("{") and decl.endswith("}"):
        values = {v.strip().strip("'\"") for v in decl[1:-1].split(",")}
        if values == {"0", "1"}:
            return BINARY
        raise ArffSchemaError(f"only {{0,1}} nominal attributes are supported, got {decl}", lineno)
    raise ArffSchemaError(f"unsupported attribute type {decl!r}", lineno)


def _split_row(text: str) -> list[str]:
    return [v.strip() for v in next(csv.reader([text], skipinitialspace=True))]


def parse_meka_arff(
    raw: bytes | str, stream: StreamId = TARGET
) -> tuple[DatasetMeta, list[Instance]]:
    """Parse a MEKA multi-label ARFF document.

    The number of labels comes from ``-C L`` in the relation name: the first
    ``L`` attributes are labels when ``L > 0``, the last ``|L|`` when negative.
    Dense and sparse (``{index value, ...}``) rows are accepted.  Missing
    feature values (``?``) become 0 for binary features and the running mean
    of the preceding rows for numeric ones.
    """
    text = raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw
    lines = text.splitlines()

    relation = None
    names: list[str] = []
    kinds: list[str] = []
    data_start = None
    for lineno, line in enumerate(lines, start=1):
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        low = s.lower()
        if low.startswith("@relation"):
            relation = _unquote(s[len("@relation"):].strip())
        elif low.startswith("@attribute"):
            m = _ATTR_RE.match(s)
            if m is None:
                raise ArffError(f"cannot parse attribute declaration {s!r}", lineno)
            names.append(_unquote(m.group(1)))
            kinds.append(_attr_kind(m.group(2), lineno))
        elif low.startswith("@data"):
            data_start = lineno
            break
        else:
            raise ArffError(f"unexpected header line {s!r}", lineno)

    if relation is None:
        raise ArffError("missing @relation", 1)
    if data_start is None:
        raise ArffError("missing @data section", len(lines))
    m = _LABEL_COUNT_RE.search(relation)
    if m is None:
        raise ArffSchemaError("relation name lacks the '-C <labels>' convention", 1)
    c = int(m.group(1))
    n_attr = len(names)
    n_labels = abs(c)
    if n_labels == 0 or n_labels >= n_attr:
        raise ArffSchemaError(
            f"-C {c} is incompatible with {n_attr} attributes (need at least one feature)", 1
        )
    if c > 0:
        label_idx = np.arange(n_labels)
        feat_idx = np.arange(n_labels, n_attr)
    else:
        feat_idx = np.arange(n_attr - n_labels)
        label_idx = np.arange(n_attr - n_labels, n_attr)
    feat_kinds = tuple(kinds[i] for i in feat_idx)
    meta = DatasetMeta(
        n_features=len(feat_idx),
        feature_kinds=feat_kinds,
        n_labels=n_labels,
        name=relation.split(":")[0].strip() or "dataset",
        feature_names=tuple(names[i] for i in feat_idx),
        label_names=tuple(names[i] for i in label_idx),
    )
    is_label = np.zeros(n_attr, dtype=bool)
    is_label[label_idx] = True
    is_binary_feat = np.array([kinds[i] == BINARY for i in feat_idx])

    feat_sum = np.zeros(len(feat_idx))
    feat_cnt = np.zeros(len(feat_idx))
    instances: list[Instance] = []
    for lineno in range(data_start + 1, len(lines) + 1):
        s = lines[lineno - 1].strip()
        if not s or s.startswith("%"):
            continue
        values: list[str | None] = ["0"] * n_attr
        if s.startswith("{"):
            if not s.endswith("}"):
                raise ArffRowError("unterminated sparse row", lineno)
            body = s[1:-1].strip()
            if body:
                for item in body.split(","):
                    parts = item.split()
                    if len(parts) != 2:
                        raise ArffRowError(f"bad sparse entry {item.strip()!r}", lineno)
                    try:
                        j = int(parts[0])
                    except ValueError:
                        raise ArffRowError(f"bad sparse index {parts[0]!r}", lineno) from None
                    if not 0 <= j < n_attr:
                        raise ArffRowError(
                            f"sparse index {j} out of range for {n_attr} attributes", lineno
                        )
                    values[j] = parts[1].strip("'\"")
        else:
            fields = _split_row(s)
            if len(fields) != n_attr:
                raise ArffRowError(
                    f"row has {len(fields)} values, expected {n_attr}", lineno
                )
            values = [f.strip("'\"") for f in fields]

        y = np.empty(n_labels, dtype=np.int8)
        for pos, j in enumerate(label_idx):
            v = values[j]
            try:
                fv = float(v)
            except (TypeError, ValueError):
                fv = math.nan
            if fv not in (0.0, 1.0):
                raise ArffSchemaError(
                    f"label {names[j]!r} has value {v!r}, expected 0 or 1", lineno
                )
            y[pos] = int(fv)
        x = np.empty(len(feat_idx))
        for pos, j in enumerate(feat_idx):
            v = values[j]
            if v == "?":
                if is_binary_feat[pos]:
                    x[pos] = 0.0
                else:
                    x[pos] = feat_sum[pos] / feat_cnt[pos] if feat_cnt[pos] else 0.0
                continue
            try:
                fv = float(v)
            except ValueError:
                raise ArffRowError(f"non-numeric value {v!r} for {names[j]!r}", lineno) from None
            if is_binary_feat[pos] and fv not in (0.0, 1.0):
                raise ArffRowError(f"binary feature {names[j]!r} has value {v!r}", lineno)
            x[pos] = fv
            feat_sum[pos] += fv
            feat_cnt[pos] += 1
        instances.append(make_instance(x, y, stream, len(instances)))
    return meta, instances


def _fmt(v: float) -> str:
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def dump_meka_arff(meta: DatasetMeta, instances: Iterable[Instance], sparse: bool = False) -> str:
    """Serialize to MEKA ARFF with labels first (``-C L``)."""
    out = io.StringIO()
    out.write(f"@relation '{meta.name}: -C {meta.n_labels}'\n\n")
    for name in meta.label_names:
        out.write(f"@attribute {_quote(name)} {{0,1}}\n")
    for name, kind in zip(meta.feature_names, meta.feature_kinds):
        out.write(f"@attribute {_quote(name)} {'{0,1}' if kind == BINARY else 'numeric'}\n")
    out.write("\n@data\n")
    for inst in instances:
        row = np.concatenate([inst.y.astype(np.float64), inst.x])
        if sparse:
            nz = np.flatnonzero(row)
            out.write("{" + ",".join(f"{j} {_fmt(row[j])}" for j in nz) + "}\n")
        else:
            out.write(",".join(_fmt(v) for v in row) + "\n")
    return out.getvalue()


def _quote(name: str) -> str:
    if re.fullmatch(r"[A-Za-z_][\w.\-]*", name):
        return name
    return "'" + name.replace("\\", "\\\\").replace("'", "\\'") + "'"


def load_dataset(path: str | Path, stream: StreamId = TARGET) -> tuple[DatasetMeta, list[Instance]]:
    """Load an ``.arff`` or ``.csv`` file, dispatching on the suffix."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_csv(path, stream=stream)
    return parse_meka_arff(path.read_bytes(), stream=stream)


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def write_csv(path: str | Path, meta: DatasetMeta, instances: Iterable[Instance]) -> None:
    """Write ``f1..fm,l1..lq`` rows plus a ``<file>.json`` sidecar with the label count."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*meta.feature_names, *meta.label_names])
        for inst in instances:
            w.writerow([*(_fmt(v) for v in inst.x), *(int(v) for v in inst.y)])
    _sidecar(path).write_text(
        json.dumps(
            {"name": meta.name, "n_labels": meta.n_labels, "feature_kinds": list(meta.feature_kinds)},
            indent=1,
        )
        + "\n",
        encoding="utf-8",
    )


def read_csv(
    path: str | Path, n_labels: int | None = None, stream: StreamId = TARGET
) -> tuple[DatasetMeta, list[Instance]]:
    """Read the CSV layout; labels are the trailing ``n_labels`` columns.

    ``n_labels`` falls back to the JSON sidecar, then to the number of trailing
    header columns named ``l<digits>``.
    """
    path = Path(path)
    side = {}
    if _sidecar(path).exists():
        side = json.loads(_sidecar(path).read_text(encoding="utf-8"))
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV file")
    header = [h.strip() for h in rows[0]]
    if n_labels is None:
        n_labels = side.get("n_labels")
    if n_labels is None:
        n_labels = 0
        for h in reversed(header):
            if not re.fullmatch(r"l\d+", h):
                break
            n_labels += 1
    if not 0 < n_labels < len(header):
        raise ValueError(f"{path}: cannot determine label columns (n_labels={n_labels})")
    m = len(header) - n_labels
    kinds = tuple(side.get("feature_kinds", [NUMERIC] * m))
    meta = DatasetMeta(
        n_features=m,
        feature_kinds=kinds,
        n_labels=n_labels,
        name=side.get("name", path.stem),
        feature_names=tuple(header[:m]),
        label_names=tuple(header[m:]),
    )
    instances = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ValueError(f"{path}: line {lineno}: expected {len(header)} values, got {len(row)}")
        vals = [float(v) for v in row]
        instances.append(make_instance(vals[:m], vals[m:], stream, len(instances)))
    return meta, instances


# --------------------------------------------------------------------------
# statistics
# --------------------------------------------------------------------------


class DatasetStats(NamedTuple):
    lden: float
    lir: float
    lsir: float


def label_matrix(data: Sequence[Instance]) -> np.ndarray:
    return np.stack([inst.y for inst in data]).astype(np.int64)


def dataset_stats(data: Sequence[Instance]) -> DatasetStats:
    """Label density, label imbalance rate and label-set imbalance rate."""
    if len(data) == 0:
        raise ValueError("dataset_stats needs at least one instance")
    Y = label_matrix(data)
    n, q = Y.shape
    pos_per_label = Y.sum(axis=0)
    pos_per_inst = Y.sum(axis=1)
    lden = pos_per_label.sum() / (n * q)
    lir = np.minimum(pos_per_label, n - pos_per_label).sum() / (n * q)
    lsir = np.minimum(pos_per_inst, q - pos_per_inst).sum() / (n * q)
    return DatasetStats(float(lden), float(lir), float(lsir))


# --------------------------------------------------------------------------
# interleaving
# --------------------------------------------------------------------------


class InterleavePolicy(enum.Enum):
    ROUND_ROBIN = "round-robin"
    RANDOM = "random"
    PROPORTIONAL = "proportional"


@dataclass(frozen=True)
class StreamSchedule:
    """Immutable ordered list of ``(StreamId, Instance)`` events."""

    events: tuple[tuple[StreamId, Instance], ...] = field(default_factory=tuple)

    def __iter__(self) -> Iterator[tuple[StreamId, Instance]]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def __getitem__(self, i):
        return self.events[i]

    def order(self) -> list[StreamId]:
        return [sid for sid, _ in self.events]

    def dumps(self) -> str:
        """Stream tags one per line; ``interleave(..., order=...)`` replays them."""
        return "".join(f"{sid}\n" for sid in self.order())


def read_schedule_order(text: str) -> list[StreamId]:
    return [StreamId.parse(line) for line in text.splitlines() if line.strip()]


def interleave(
    target: Sequence[Instance],
    sources: Sequence[Sequence[Instance]] = (),
    policy: InterleavePolicy | str = InterleavePolicy.ROUND_ROBIN,
    seed: int = 0,
    order: Sequence[StreamId] | None = None,
) -> StreamSchedule:
    """Merge one target and several source sequences into a single schedule.

    Round-robin takes one example from every non-exhausted stream per cycle,
    sources first and the target last.  ``random`` picks the next stream
    uniformly among the non-exhausted ones; ``proportional`` picks with
    probability proportional to the examples each stream has left, so all
    streams finish at about the same time.  An explicit ``order`` of stream
    ids overrides the policy; tags for exhausted streams are skipped and any
    leftovers are appended round-robin.
    """
    policy = InterleavePolicy(policy)
    ids = [StreamId.source(k + 1) for k in range(len(sources))] + [TARGET]
    seqs = [list(s) for s in sources] + [list(target)]
    pos = [0] * len(seqs)
    events: list[tuple[StreamId, Instance]] = []

    def take(i: int) -> None:
        inst = seqs[i][pos[i]]
        if inst.stream != ids[i]:
            inst = replace(inst, stream=ids[i])
        events.append((ids[i], inst))
        pos[i] += 1

    if order is not None:
        index = {sid: i for i, sid in enumerate(ids)}
        for sid in order:
            i = index.get(sid)
            if i is None:
                raise ValueError(f"schedule names unknown stream {sid}")
            if pos[i] < len(seqs[i]):
                take(i)
        policy = InterleavePolicy.ROUND_ROBIN

    if policy is InterleavePolicy.ROUND_ROBIN:
        while True:
            progressed = False
            for i in range(len(seqs)):
                if pos[i] < len(seqs[i]):
                    take(i)
                    progressed = True
            if not progressed:
                break
    else:
        rng = np.random.default_rng(seed)
        while True:
            left = np.array([len(s) - p for s, p in zip(seqs, pos)], dtype=float)
            total = left.sum()
            if total == 0:
                break
            if policy is InterleavePolicy.RANDOM:
                w = (left > 0).astype(float)
                w /= w.sum()
            else:
                w = left / total
            take(int(rng.choice(len(seqs), p=w)))
    return StreamSchedule(tuple(events))
