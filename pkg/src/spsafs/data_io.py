"""Dataset ingestion, synthetic benchmark data and seed derivation.

Random streams
--------------
Every random draw in the package comes from a Philox4x64-10 counter-based
generator keyed directly with a 64-bit seed (``numpy.random.Philox(key=seed)``,
counter starting at zero). Seeds for independent streams are derived with
:func:`derive_seed`, which hashes ``"{root}/{label}/{index}"`` with BLAKE2b
(8-byte digest, read little-endian). Perturbation vectors use the raw
keystream bits only, so they reproduce in any language with a Philox
implementation: component ``j`` is ``+1`` when bit ``j % 64`` of raw word
``j // 64`` is set, else ``-1``.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .types import CLASSIFICATION, REGRESSION, TASK_KINDS, Dataset

MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none", "?"})
MASK64 = (1 << 64) - 1


def derive_seed(root_seed: int, stream_label: str, index: int = 0) -> int:
    """Derive a 64-bit seed for the stream ``(stream_label, index)``."""
    key = f"{int(root_seed) & MASK64}/{stream_label}/{int(index)}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & MASK64))


def sample_perturbation(seed: int, p: int) -> np.ndarray:
    """Symmetric Bernoulli +/-1 vector of length ``p`` from the raw Philox stream."""
    words = np.random.Philox(key=int(seed) & MASK64).random_raw(math.ceil(p / 64))
    words = np.atleast_1d(np.asarray(words, dtype=np.uint64))
    j = np.arange(p)
    bits = (words[j // 64] >> (j % 64).astype(np.uint64)) & np.uint64(1)
    return np.where(bits == 1, 1.0, -1.0)


class DataError(ValueError):
    """Input file could not be turned into a valid Dataset."""


@dataclass(frozen=True)
class CsvSchema:
    target_column: str
    task_kind: str = CLASSIFICATION
    id_columns: tuple[str, ...] = ()
    delimiter: str = ","
    has_header: bool = True
    missing: str = "reject"  # or "drop-row"

    def __post_init__(self):
        if self.task_kind not in TASK_KINDS:
            raise ValueError(f"task_kind must be one of {TASK_KINDS}")
        if self.missing not in ("reject", "drop-row"):
            raise ValueError("missing policy must be 'reject' or 'drop-row'")


def _is_missing(cell: str) -> bool:
    return cell.strip().lower() in MISSING_TOKENS


def load_csv(path, schema: CsvSchema) -> Dataset:
    """Load a delimited file into a :class:`Dataset`.

    Without a header row, columns are named ``c1, c2, ...`` and
    ``target_column`` may name one of those or give a 1-based position.
    Classification targets are interned to integer codes in order of
    sorted distinct label text (numerically sorted when all labels parse
    as numbers).
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset file not found: {path}")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=schema.delimiter) if r]
    if not rows:
        raise DataError(f"{path}: file is empty")
    if schema.has_header:
        header, body = [h.strip() for h in rows[0]], rows[1:]
    else:
        header, body = [f"c{i + 1}" for i in range(len(rows[0]))], rows
    if not body:
        raise DataError(f"{path}: no data rows")

    target = schema.target_column
    if target not in header and not schema.has_header and target.isdigit():
        target = f"c{target}"
    if target not in header:
        raise DataError(f"{path}: target column {schema.target_column!r} not in {header}")
    for col in schema.id_columns:
        if col not in header:
            raise DataError(f"{path}: id column {col!r} not in {header}")
    t_idx = header.index(target)
    drop = {header.index(c) for c in schema.id_columns} | {t_idx}
    feat_idx = [i for i in range(len(header)) if i not in drop]
    if not feat_idx:
        raise DataError(f"{path}: no feature columns left")

    x_rows, y_raw = [], []
    first_line = 2 if schema.has_header else 1
    for r_no, row in enumerate(body, start=first_line):
        if len(row) != len(header):
            raise DataError(f"{path}: line {r_no} has {len(row)} fields, expected {len(header)}")
        used = feat_idx + [t_idx]
        missing = [header[i] for i in used if _is_missing(row[i])]
        if missing:
            if schema.missing == "drop-row":
                continue
            raise DataError(f"{path}: missing value at line {r_no}, column {missing[0]!r}")
        values = []
        for i in feat_idx:
            try:
                values.append(float(row[i]))
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric value {row[i]!r} at line {r_no}, column {header[i]!r}"
                ) from None
        x_rows.append(values)
        y_raw.append(row[t_idx].strip())
    if len(x_rows) < 2:
        raise DataError(f"{path}: fewer than 2 usable rows")

    names = tuple(header[i] for i in feat_idx)
    x = np.array(x_rows, dtype=np.float64)
    if schema.task_kind == CLASSIFICATION:
        codes, labels = _intern_labels(y_raw)
        return Dataset(x, codes, names, CLASSIFICATION, labels)
    try:
        y = np.array([float(v) for v in y_raw])
    except ValueError as exc:
        raise DataError(f"{path}: regression target must be numeric ({exc})") from None
    return Dataset(x, y, names, REGRESSION)


def _intern_labels(raw: Sequence[str]):
    distinct = set(raw)
    try:
        labels = sorted(distinct, key=float)
    except ValueError:
        labels = sorted(distinct)
    table = {lab: i for i, lab in enumerate(labels)}
    return np.array([table[v] for v in raw], dtype=np.int64), tuple(labels)


def write_csv(dataset: Dataset, path, target_column: str = "y", delimiter: str = ",") -> None:
    """Write ``dataset`` with a header row; floats use ``repr`` (round-trip exact)."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow([*dataset.feature_names, target_column])
        for i in range(dataset.n):
            if dataset.is_classification:
                target = dataset.labels[dataset.y[i]]
            else:
                target = repr(float(dataset.y[i]))
            w.writerow([*(repr(float(v)) for v in dataset.x[i]), target])


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a seeded synthetic dataset.

    ``informative`` holds 0-based feature indices. With ``noise_correlation``
    set, every non-informative feature is a noisy copy of one informative
    feature (redundant proxy) instead of pure noise.
    """

    n: int
    p: int
    informative: tuple[int, ...]
    noise_sd: float = 0.0
    task_kind: str = CLASSIFICATION
    seed: int = 0
    noise_correlation: float = 0.0
    class_sep: float = 0.5
    coef: tuple[float, ...] | None = None


def make_synthetic(spec: SyntheticSpec) -> Dataset:
    """Generate a dataset whose response depends only on ``spec.informative``.

    Classification: ``y = 1[x_S . beta + noise_sd * eps > 0]``; the informative
    block is then pushed ``class_sep`` along ``beta`` away from the decision
    boundary so the noiseless case is cleanly separable.
    Regression: ``y = x_S . beta + noise_sd * eps``.
    """
    inf = tuple(int(j) for j in spec.informative)
    if not inf or len(set(inf)) != len(inf) or not all(0 <= j < spec.p for j in inf):
        raise ValueError(f"informative indices {spec.informative} must be distinct and in [0, {spec.p})")
    if spec.task_kind not in TASK_KINDS:
        raise ValueError(f"task_kind must be one of {TASK_KINDS}")
    if not 0.0 <= spec.noise_correlation < 1.0:
        raise ValueError("noise_correlation must lie in [0, 1)")
    beta = np.ones(len(inf)) if spec.coef is None else np.asarray(spec.coef, dtype=np.float64)
    if beta.shape != (len(inf),):
        raise ValueError("coef must have one entry per informative feature")

    rng = make_rng(spec.seed)
    x = rng.standard_normal((spec.n, spec.p))
    eps = rng.standard_normal(spec.n)
    rho = spec.noise_correlation
    if rho > 0:
        others = [j for j in range(spec.p) if j not in inf]
        for t, j in enumerate(others):
            src = inf[t % len(inf)]
            x[:, j] = rho * x[:, src] + math.sqrt(1.0 - rho * rho) * x[:, j]

    score = x[:, inf] @ beta + spec.noise_sd * eps
    if spec.task_kind == REGRESSION:
        return Dataset(x, score, (), REGRESSION)
    y = (score > 0).astype(np.int64)
    if len(np.unique(y)) < 2:
        y[np.argmax(score)] = 1 - y[np.argmax(score)]
    direction = beta / np.linalg.norm(beta)
    x[:, inf] += spec.class_sep * (2 * y - 1)[:, None] * direction[None, :]
    return Dataset(x, y, (), CLASSIFICATION, (0, 1))
