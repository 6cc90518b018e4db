"""CSV ingestion, feature encoding, imputation and seeded splitting."""

from __future__ import annotations

import csv
import hashlib
import logging
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    ConfigError,
    DatasetTooSmall,
    IoError,
    MissingLabelColumn,
    NonBinaryLabel,
    ParseError,
    UnparseableNumeric,
)
from .venn import Observation

log = logging.getLogger(__name__)

PRNG_NAME = "philox4x64-10"
SHUFFLE_VERSION = "fisher-yates-v1"
BUNDLED = ("breast", "diabetes", "sample_1d", "sample_mixed")


@dataclass(frozen=True)
class DatasetSpec:
    path: Path
    label_column: str | int = -1
    positive_label: str | None = None
    missing_token: str = "?"
    categorical: tuple[str, ...] | None = None  # None: auto-detect
    name: str | None = None

    @property
    def dataset_id(self) -> str:
        return self.name or Path(self.path).stem

    @classmethod
    def from_mapping(cls, values: dict, base: Path | None = None) -> "DatasetSpec":
        unknown = set(values) - {"path", "label_column", "positive_label", "missing_token", "categorical", "name"}
        if unknown:
            raise ConfigError(f"unknown dataset spec keys: {sorted(unknown)}")
        if "path" not in values:
            raise ConfigError("dataset spec needs a 'path'")
        path = Path(values["path"])
        if base is not None and not path.is_absolute():
            path = base / path
        label = values.get("label_column", -1)
        if isinstance(label, str) and label.lstrip("-").isdigit():
            label = int(label)
        categorical = values.get("categorical")
        if isinstance(categorical, str):
            categorical = None if categorical.strip().lower() in ("", "auto") else tuple(
                c.strip() for c in categorical.split(",") if c.strip())
        elif categorical is not None:
            categorical = tuple(categorical)
        return cls(path, label, values.get("positive_label"), values.get("missing_token", "?"),
                   categorical, values.get("name"))

    @classmethod
    def from_file(cls, path) -> "DatasetSpec":
        path = Path(path)
        values = read_key_values(path)
        values.setdefault("name", path.stem)
        return cls.from_mapping(values, base=path.parent)


def read_key_values(path) -> dict[str, str]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment line."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def bundled_spec(name: str) -> DatasetSpec:
    if name not in BUNDLED:
        raise ConfigError(f"no bundled dataset {name!r}; available: {', '.join(BUNDLED)}")
    root = resources.files("venn_calib") / "datasets"
    return DatasetSpec.from_file(Path(str(root / f"{name}.cfg")))


@dataclass
class RawTable:
    header: list[str]
    rows: list[list[str | None]]  # None marks a missing cell
    label_index: int
    lines: list[int]  # source line of each row

    @property
    def label_name(self) -> str:
        return self.header[self.label_index]


def load_csv(spec: DatasetSpec) -> RawTable:
    try:
        handle = open(spec.path, newline="")
    except OSError as exc:
        raise IoError(f"cannot open {spec.path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file, expected a header row", line=1) from None
        except csv.Error as exc:
            raise ParseError(str(exc), line=reader.line_num) from exc
        rows, lines = [], []
        try:
            for row in reader:
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(header):
                    raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=reader.line_num)
                rows.append([None if c.strip() == spec.missing_token else c.strip() for c in row])
                lines.append(reader.line_num)
        except csv.Error as exc:
            raise ParseError(str(exc), line=reader.line_num) from exc
    label = spec.label_column
    if isinstance(label, int):
        if not -len(header) <= label < len(header):
            raise MissingLabelColumn(f"label column index {label} out of range")
        index = label % len(header)
    elif label in header:
        index = header.index(label)
    else:
        raise MissingLabelColumn(f"no column named {label!r} in {spec.path}")
    return RawTable(header, rows, index, lines)


@dataclass(frozen=True)
class FeatureGroup:
    column: str
    kind: str  # "numeric" or "categorical"
    indices: tuple[int, ...]
    categories: tuple[str, ...] = ()


@dataclass(frozen=True)
class EncodedDataset:
    """Feature matrix (NaN where missing) with binary labels."""

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    groups: tuple[FeatureGroup, ...]
    label_map: dict = field(default_factory=dict)
    imputation: dict = field(default_factory=dict)
    warnings: tuple[str, ...] = ()
    name: str = "dataset"

    def __len__(self):
        return len(self.y)

    @property
    def has_missing(self) -> bool:
        return bool(np.isnan(self.X).any())

    def take(self, idx) -> "EncodedDataset":
        idx = np.asarray(idx, dtype=int)
        return replace(self, X=self.X[idx], y=self.y[idx])

    def observations(self, idx=None) -> list[Observation]:
        X, y = (self.X, self.y) if idx is None else (self.X[np.asarray(idx, dtype=int)], self.y[np.asarray(idx, dtype=int)])
        return [Observation(tuple(row), int(label)) for row, label in zip(X.tolist(), y.tolist())]

    @classmethod
    def from_observations(cls, data: Sequence[Observation], name="observations") -> "EncodedDataset":
        if not data:
            raise DatasetTooSmall("no observations")
        X = np.array([z.x for z in data], dtype=float)
        names = tuple(f"x{j}" for j in range(X.shape[1]))
        groups = tuple(FeatureGroup(n, "numeric", (j,)) for j, n in enumerate(names))
        return cls(X, np.array([z.y for z in data], dtype=int), names, groups, name=name)


def _parse_float(cell: str) -> float | None:
    try:
        value = float(cell)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def encode(raw: RawTable, spec: DatasetSpec) -> EncodedDataset:
    """Numeric columns become floats, categorical columns become one-hot
    indicators in first-appearance order, and labels map to {0, 1}."""
    labels = [row[raw.label_index] for row in raw.rows]
    for label, line in zip(labels, raw.lines):
        if label is None:
            raise ParseError("missing label", line=line, column=raw.label_name)
    distinct = list(dict.fromkeys(labels))
    if len(distinct) != 2:
        raise NonBinaryLabel(f"label column {raw.label_name!r} has {len(distinct)} distinct values: {distinct[:5]}")
    positive = spec.positive_label
    if positive is None:
        if set(distinct) != {"0", "1"}:
            raise ConfigError(f"labels are {distinct}; set positive_label")
        positive = "1"
    if positive not in distinct:
        raise NonBinaryLabel(f"positive label {positive!r} not among label values {distinct}")
    negative = next(v for v in distinct if v != positive)
    y = np.array([1 if v == positive else 0 for v in labels], dtype=int)

    declared = None if spec.categorical is None else set(spec.categorical)
    if declared is not None:
        missing = declared - set(raw.header)
        if missing:
            raise ConfigError(f"categorical columns not in header: {sorted(missing)}")
    columns, names, groups = [], [], []
    for c, column in enumerate(raw.header):
        if c == raw.label_index:
            continue
        cells = [row[c] for row in raw.rows]
        if declared is None:
            categorical = any(v is not None and _parse_float(v) is None for v in cells)
        else:
            categorical = column in declared
        start = len(names)
        if categorical:
            categories = list(dict.fromkeys(v for v in cells if v is not None))
            block = np.zeros((len(cells), len(categories)))
            for i, v in enumerate(cells):
                if v is None:
                    block[i, :] = np.nan
                else:
                    block[i, categories.index(v)] = 1.0
            columns.append(block)
            names.extend(f"{column}={v}" for v in categories)
            groups.append(FeatureGroup(column, "categorical", tuple(range(start, len(names))), tuple(categories)))
        else:
            values = np.empty((len(cells), 1))
            for i, v in enumerate(cells):
                if v is None:
                    values[i, 0] = np.nan
                    continue
                parsed = _parse_float(v)
                if parsed is None:
                    raise UnparseableNumeric(f"cannot parse {v!r} as a number", line=raw.lines[i], column=column)
                values[i, 0] = parsed
            columns.append(values)
            names.append(column)
            groups.append(FeatureGroup(column, "numeric", (start,)))
    X = np.hstack(columns) if columns else np.zeros((len(y), 0))
    return EncodedDataset(X, y, tuple(names), tuple(groups), {negative: 0, positive: 1}, name=spec.dataset_id)


def load_dataset(spec: DatasetSpec) -> EncodedDataset:
    return encode(load_csv(spec), spec)


def impute(dataset: EncodedDataset, train_idx) -> EncodedDataset:
    """Fill missing cells using statistics of the training rows only.

    Numeric cells get the training mean (0 if the training column is all
    missing, with a warning); missing categorical cells become all-zero
    indicator rows.
    """
    train_idx = np.asarray(train_idx, dtype=int)
    if len(train_idx) == 0:
        raise ValueError("imputation needs at least one training row")
    X = dataset.X.copy()
    stats, warnings = {}, list(dataset.warnings)
    for group in dataset.groups:
        if group.kind == "categorical":
            cols = list(group.indices)
            X[:, cols] = np.nan_to_num(X[:, cols], nan=0.0)
            continue
        j = group.indices[0]
        column = X[:, j]
        if not np.isnan(column).any():
            continue
        train_values = dataset.X[train_idx, j]
        observed = train_values[~np.isnan(train_values)]
        if len(observed):
            fill = float(observed.mean())
        else:
            fill = 0.0
            message = f"column {group.column!r} has no training values; imputed 0"
            warnings.append(message)
            log.warning(message)
        column[np.isnan(column)] = fill
        stats[group.column] = fill
    return replace(dataset, X=X, imputation=stats, warnings=tuple(warnings))


def derive_seed(master_seed: int, *parts) -> int:
    """64-bit seed from a master seed and a path of ints/strings (BLAKE2b)."""
    h = hashlib.blake2b(digest_size=8, person=b"venn-calib")
    h.update(int(master_seed).to_bytes(16, "little", signed=True))
    for part in parts:
        h.update(b"\x00" + str(part).encode())
    return int.from_bytes(h.digest(), "little")


def fisher_yates(n: int, seed: int) -> list[int]:
    """Uniform permutation of ``range(n)`` driven by raw Philox4x64-10 output.

    Index draws use rejection sampling on 64-bit words, so the permutation is
    fully determined by the seed (used as the Philox key, counter 0).
    """
    bits = np.random.Philox(key=int(seed) % 2**64)
    perm = list(range(n))
    for i in range(n - 1, 0, -1):
        bound = i + 1
        limit = 2**64 - 2**64 % bound
        while True:
            r = int(bits.random_raw())
            if r < limit:
                break
        j = r % bound
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def train_size(n: int, train_fraction: float) -> int:
    return math.floor(train_fraction * n)


def split_indices(n: int, seed: int, train_fraction: float = 2 / 3) -> tuple[list[int], list[int]]:
    if n < 3:
        raise DatasetTooSmall(f"need at least 3 observations to split, got {n}")
    if not 0 < train_fraction < 1:
        raise ConfigError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    perm = fisher_yates(n, seed)
    m = train_size(n, train_fraction)
    return perm[:m], perm[m:]


def permute_split(data, seed: int, train_fraction: float = 2 / 3):
    """Shuffle with :func:`fisher_yates` and cut at ``floor(f * N)``."""
    train_idx, test_idx = split_indices(len(data), seed, train_fraction)
    if isinstance(data, EncodedDataset):
        return data.take(train_idx), data.take(test_idx)
    return [data[i] for i in train_idx], [data[i] for i in test_idx]
