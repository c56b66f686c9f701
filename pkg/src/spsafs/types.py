"""Shared value types: feature masks, datasets and run traces.

Weight vectors are plain float64 numpy arrays; :func:`bound` and
:func:`round_mask` are the only ways the optimizers turn them into masks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

CLASSIFICATION = "classification"
REGRESSION = "regression"
TASK_KINDS = (CLASSIFICATION, REGRESSION)


@dataclass(frozen=True)
class FeatureMask:
    """Binary indicator over ``p`` features.

    ``bits[j] == 1`` means feature ``j`` (0-based) is selected.
    """

    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if len(bits) == 0:
            raise ValueError("FeatureMask needs at least one position")
        if any(b not in (0, 1) for b in bits):
            raise ValueError(f"FeatureMask bits must be 0/1, got {self.bits!r}")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_indices(cls, indices: Iterable[int], p: int) -> "FeatureMask":
        bits = [0] * p
        for j in indices:
            if not 0 <= j < p:
                raise IndexError(f"feature index {j} out of range for p={p}")
            bits[j] = 1
        return cls(tuple(bits))

    @classmethod
    def full(cls, p: int) -> "FeatureMask":
        return cls((1,) * p)

    @classmethod
    def from_hex(cls, text: str, p: int) -> "FeatureMask":
        value = int(text, 16)
        if value >> p:
            raise ValueError(f"hex mask {text!r} has bits beyond p={p}")
        return cls(tuple((value >> j) & 1 for j in range(p)))

    @property
    def p(self) -> int:
        return len(self.bits)

    @property
    def indices(self) -> tuple[int, ...]:
        """Sorted 0-based indices of the selected features."""
        return tuple(j for j, b in enumerate(self.bits) if b)

    @property
    def count(self) -> int:
        return sum(self.bits)

    @property
    def is_empty(self) -> bool:
        return self.count == 0

    def to_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=bool)

    def to_hex(self) -> str:
        """Hex string where bit ``j`` of the integer is feature ``j``.

        Zero-padded to ``ceil(p / 4)`` digits so equal-length masks compare
        as equal-length strings.
        """
        value = sum(1 << j for j, b in enumerate(self.bits) if b)
        return format(value, f"0{(self.p + 3) // 4}x")

    def with_bit(self, j: int, value: int) -> "FeatureMask":
        bits = list(self.bits)
        bits[j] = value
        return FeatureMask(tuple(bits))

    def __len__(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return "".join(map(str, self.bits))


def bound(w) -> np.ndarray:
    """Clamp every component into [0, 1]. Returns a new array."""
    return np.clip(np.asarray(w, dtype=np.float64), 0.0, 1.0)


def round_mask(w) -> FeatureMask:
    """Round a bounded weight vector to a mask; exactly 0.5 rounds up."""
    w = np.asarray(w, dtype=np.float64)
    return FeatureMask(tuple((w >= 0.5).astype(int).tolist()))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix ``x`` (n x p) with a response ``y``.

    For classification ``y`` holds dense integer codes into ``labels``; for
    regression it holds floats and ``labels`` is empty.
    """

    x: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    task_kind: str
    labels: tuple = ()

    def __post_init__(self):
        x = np.array(self.x, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError(f"x must be 2-D, got shape {x.shape}")
        n, p = x.shape
        if n < 2 or p < 1:
            raise ValueError(f"need n >= 2 and p >= 1, got n={n}, p={p}")
        if not np.all(np.isfinite(x)):
            raise ValueError("x contains missing or non-finite values")
        if self.task_kind not in TASK_KINDS:
            raise ValueError(f"task_kind must be one of {TASK_KINDS}, got {self.task_kind!r}")
        if self.task_kind == CLASSIFICATION:
            y = np.array(self.y, dtype=np.int64)
            if len(np.unique(y)) < 2:
                raise ValueError("classification needs at least 2 distinct labels")
            labels = tuple(self.labels) if self.labels else tuple(range(int(y.max()) + 1))
            if y.min() < 0 or y.max() >= len(labels):
                raise ValueError("label codes fall outside the label table")
        else:
            y = np.array(self.y, dtype=np.float64)
            if not np.all(np.isfinite(y)):
                raise ValueError("y contains missing or non-finite values")
            labels = ()
        if y.shape != (n,):
            raise ValueError(f"y must have shape ({n},), got {y.shape}")
        names = tuple(self.feature_names) if self.feature_names else tuple(f"x{j + 1}" for j in range(p))
        if len(names) != p:
            raise ValueError(f"{len(names)} feature names for {p} features")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.labels)

    @property
    def is_classification(self) -> bool:
        return self.task_kind == CLASSIFICATION

    def columns(self, mask: FeatureMask) -> np.ndarray:
        if mask.p != self.p:
            raise ValueError(f"mask has {mask.p} positions, dataset has {self.p} features")
        return self.x[:, list(mask.indices)]


@dataclass(frozen=True)
class IterationRecord:
    k: int
    y_plus: float
    y_minus: float
    gain_used: float
    mask_plus: FeatureMask
    mask_minus: FeatureMask
    weights: tuple[float, ...]  # iterate after this iteration's update


@dataclass
class RunTrace:
    """Per-iteration history of one optimizer run.

    ``wall_time`` is excluded from equality so two runs with the same seeds
    compare equal.
    """

    records: list[IterationRecord] = field(default_factory=list)
    final_weights: tuple[float, ...] = ()
    final_mask: FeatureMask | None = None
    best_mask: FeatureMask | None = None
    best_loss: float = float("inf")
    iterations_run: int = 0
    evaluations: int = 0
    wall_time: float = field(default=0.0, compare=False)

    def add(self, record: IterationRecord) -> None:
        if self.records and record.k != self.records[-1].k + 1:
            raise ValueError("records must be ordered by k without gaps")
        if not self.records and record.k != 0:
            raise ValueError("records must start at k = 0")
        self.records.append(record)
        for loss, mask in ((record.y_plus, record.mask_plus), (record.y_minus, record.mask_minus)):
            if loss < self.best_loss:
                self.best_loss = loss
                self.best_mask = mask
        self.iterations_run = len(self.records)

    def running_best(self) -> np.ndarray:
        """Running minimum of evaluated loss after each iteration."""
        per_iter = [min(r.y_plus, r.y_minus) for r in self.records]
        return np.minimum.accumulate(np.array(per_iter, dtype=np.float64))

    def gains(self) -> np.ndarray:
        return np.array([r.gain_used for r in self.records], dtype=np.float64)


def as_weights(w: Sequence[float] | np.ndarray, p: int | None = None) -> np.ndarray:
    arr = np.array(w, dtype=np.float64).reshape(-1)
    if p is not None and arr.shape[0] != p:
        raise ValueError(f"weight vector has length {arr.shape[0]}, expected {p}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("weight vector has non-finite entries")
    return arr
